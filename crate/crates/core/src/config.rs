//! Experiment configuration: the `key = value` file format and the preset catalog.
//!
//! ```text
//! # single soliton, temporal error study
//! preset = example1
//! tau = 0.01
//! m_orders = 1, 2, 3
//! ```
//!
//! Numbers may be decimals or rationals (`A = 3/8`). `#` starts a comment.
//! Explicit keys override the values a preset supplies.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::diagnostics::BlowupPolicy;
use crate::error::Result;
use crate::solutions::{initial_pair, initial_single, InitialData, Motion, Sign, SolitonParams, SolitonSpec};
use crate::spectral::TorusGrid;
use crate::stepper::Nonlinearity;

pub const KEYS: &[&str] = &[
    "a",
    "b",
    "M",
    "h",
    "tau",
    "T",
    "preset",
    "family",
    "A",
    "A1",
    "A2",
    "x0",
    "x1",
    "x2",
    "v_sign",
    "v1_sign",
    "v2_sign",
    "static",
    "nonlinearity",
    "m_orders",
    "snapshot_stride",
    "series_stride",
    "blowup_threshold",
    "out_dir",
    "strict_steps",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },

    #[error("missing required key `{0}`")]
    Missing(&'static str),

    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },

    #[error("unknown preset `{id}`; valid presets: {valid}")]
    UnknownPreset { id: String, valid: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Initial-data family of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSpec {
    Single(SolitonSpec),
    Pair(SolitonSpec, SolitonSpec),
}

/// One run (or the base point of a sweep).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub a: f64,
    pub b: f64,
    pub modes: usize,
    pub tau: f64,
    pub t_final: f64,
    pub initial: InitialSpec,
    pub nonlinearity: String,
    pub m_orders: Vec<f64>,
    /// Steps between snapshot files; 0 writes only the first and last.
    pub snapshot_stride: u64,
    pub series_stride: u64,
    pub blowup: BlowupPolicy,
    pub out_dir: PathBuf,
    /// Refuse `T` that is not an integer multiple of `tau`.
    pub strict_steps: bool,
}

impl ExperimentConfig {
    fn base(a: f64, b: f64, modes: usize, tau: f64, t_final: f64, initial: InitialSpec) -> Self {
        Self {
            preset: None,
            a,
            b,
            modes,
            tau,
            t_final,
            initial,
            nonlinearity: "quadratic".into(),
            m_orders: vec![1.0, 2.0, 3.0],
            snapshot_stride: 0,
            series_stride: 100,
            blowup: BlowupPolicy::default(),
            out_dir: PathBuf::from("out"),
            strict_steps: true,
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.a, self.b, self.modes)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        Nonlinearity::by_name(&self.nonlinearity)
    }

    /// Number of steps to reach `T`; in non-strict mode a trailing partial
    /// step is dropped.
    pub fn n_steps(&self) -> Result<u64, ConfigError> {
        steps_for(self.t_final, self.tau, self.strict_steps)
    }

    pub fn initial_data(&self, grid: TorusGrid) -> Result<InitialData> {
        match self.initial {
            InitialSpec::Single(s) => initial_single(grid, s.amplitude, s.center, s.motion),
            InitialSpec::Pair(first, second) => initial_pair(grid, first, second),
        }
    }

    /// The closed-form solution when the initial data is an exact soliton.
    pub fn exact_solution(&self) -> Option<SolitonParams> {
        match self.initial {
            InitialSpec::Single(s) => s.params().ok().filter(|p| p.is_exact()),
            InitialSpec::Pair(..) => None,
        }
    }

    /// Checks every cross-field constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid().map_err(|e| invalid("M", e.to_string()))?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid("tau", format!("{} must be positive", self.tau)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(invalid("T", format!("{} must be non-negative", self.t_final)));
        }
        self.n_steps()?;
        let check = |key: &str, s: &SolitonSpec| {
            s.params().map(|_| ()).map_err(|e| invalid(key, e.to_string()))
        };
        match &self.initial {
            InitialSpec::Single(s) => check("A", s)?,
            InitialSpec::Pair(s1, s2) => {
                if s1.amplitude != 0.0 {
                    check("A1", s1)?;
                }
                if s2.amplitude != 0.0 {
                    check("A2", s2)?;
                }
            }
        }
        self.nonlinearity()
            .map_err(|e| invalid("nonlinearity", e.to_string()))?;
        if self.m_orders.is_empty() || self.m_orders.iter().any(|m| !m.is_finite()) {
            return Err(invalid("m_orders", "need at least one finite order"));
        }
        if self.series_stride == 0 {
            return Err(invalid("series_stride", "must be at least 1"));
        }
        if !(self.blowup.threshold > 0.0) {
            return Err(invalid("blowup_threshold", "must be positive"));
        }
        Ok(())
    }

    /// Renders every key; [`parse_config`] of the output reproduces `self`.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        put("a", fmt_f64(self.a));
        put("b", fmt_f64(self.b));
        put("M", self.modes.to_string());
        put("tau", fmt_f64(self.tau));
        put("T", fmt_f64(self.t_final));
        match &self.initial {
            InitialSpec::Single(s) => {
                put("family", "single".into());
                put("A", fmt_f64(s.amplitude));
                put("x0", fmt_f64(s.center));
                put("v_sign", fmt_motion(s.motion));
                put("static", (s.motion == Motion::Static).to_string());
            }
            InitialSpec::Pair(s1, s2) => {
                put("family", "pair".into());
                put("A1", fmt_f64(s1.amplitude));
                put("A2", fmt_f64(s2.amplitude));
                put("x1", fmt_f64(s1.center));
                put("x2", fmt_f64(s2.center));
                put("v1_sign", fmt_motion(s1.motion));
                put("v2_sign", fmt_motion(s2.motion));
            }
        }
        put("nonlinearity", self.nonlinearity.clone());
        put(
            "m_orders",
            self.m_orders.iter().map(|m| fmt_f64(*m)).collect::<Vec<_>>().join(", "),
        );
        put("snapshot_stride", self.snapshot_stride.to_string());
        put("series_stride", self.series_stride.to_string());
        put("blowup_threshold", fmt_f64(self.blowup.threshold));
        put("out_dir", self.out_dir.display().to_string());
        put("strict_steps", self.strict_steps.to_string());
        out
    }
}

/// Steps needed to cover `t_final` with step `tau`.
pub fn steps_for(t_final: f64, tau: f64, strict: bool) -> Result<u64, ConfigError> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("{tau} must be positive")));
    }
    let ratio = t_final / tau;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        Ok(rounded as u64)
    } else if strict {
        Err(invalid(
            "T",
            format!("T = {t_final} is not an integer multiple of tau = {tau}; adjust tau or set strict_steps = false"),
        ))
    } else {
        Ok(ratio.floor() as u64)
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_motion(m: Motion) -> String {
    match m {
        Motion::Traveling(Sign::Plus) => "+1".into(),
        Motion::Traveling(Sign::Minus) => "-1".into(),
        Motion::Static => "0".into(),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let parsed = match value.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| invalid(key, format!("`{value}` is not a number")))?;
            let den: f64 = den.trim().parse().map_err(|_| invalid(key, format!("`{value}` is not a number")))?;
            if den == 0.0 {
                return Err(invalid(key, "zero denominator"));
            }
            num / den
        }
        None => value
            .parse()
            .map_err(|_| invalid(key, format!("`{value}` is not a number")))?,
    };
    if !parsed.is_finite() {
        return Err(invalid(key, format!("`{value}` is not finite")));
    }
    Ok(parsed)
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("`{value}` is not a non-negative integer")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, format!("`{value}` is not a boolean"))),
    }
}

fn parse_motion(key: &str, value: &str) -> Result<Motion, ConfigError> {
    match value {
        "+1" | "1" | "+" => Ok(Motion::Traveling(Sign::Plus)),
        "-1" | "-" => Ok(Motion::Traveling(Sign::Minus)),
        "0" => Ok(Motion::Static),
        _ => Err(invalid(key, format!("`{value}` must be +1, -1 or 0"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Single,
    Pair,
}

/// Partially specified configuration, filled from a preset and then from
/// explicit keys.
#[derive(Debug, Default)]
struct Draft {
    preset: Option<String>,
    a: Option<f64>,
    b: Option<f64>,
    modes: Option<usize>,
    h: Option<f64>,
    tau: Option<f64>,
    t_final: Option<f64>,
    family: Option<Family>,
    amp: Option<f64>,
    x0: Option<f64>,
    motion: Option<Motion>,
    is_static: Option<bool>,
    amp1: Option<f64>,
    amp2: Option<f64>,
    x1: Option<f64>,
    x2: Option<f64>,
    motion1: Option<Motion>,
    motion2: Option<Motion>,
    nonlinearity: Option<String>,
    m_orders: Option<Vec<f64>>,
    snapshot_stride: Option<u64>,
    series_stride: Option<u64>,
    blowup_threshold: Option<f64>,
    out_dir: Option<PathBuf>,
    strict_steps: Option<bool>,
}

impl Draft {
    fn from_config(c: &ExperimentConfig) -> Self {
        let mut d = Draft {
            preset: c.preset.clone(),
            a: Some(c.a),
            b: Some(c.b),
            modes: Some(c.modes),
            tau: Some(c.tau),
            t_final: Some(c.t_final),
            nonlinearity: Some(c.nonlinearity.clone()),
            m_orders: Some(c.m_orders.clone()),
            snapshot_stride: Some(c.snapshot_stride),
            series_stride: Some(c.series_stride),
            blowup_threshold: Some(c.blowup.threshold),
            out_dir: Some(c.out_dir.clone()),
            strict_steps: Some(c.strict_steps),
            ..Default::default()
        };
        match c.initial {
            InitialSpec::Single(s) => {
                d.family = Some(Family::Single);
                d.amp = Some(s.amplitude);
                d.x0 = Some(s.center);
                d.motion = Some(s.motion);
            }
            InitialSpec::Pair(s1, s2) => {
                d.family = Some(Family::Pair);
                d.amp1 = Some(s1.amplitude);
                d.amp2 = Some(s2.amplitude);
                d.x1 = Some(s1.center);
                d.x2 = Some(s2.center);
                d.motion1 = Some(s1.motion);
                d.motion2 = Some(s2.motion);
            }
        }
        d
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "a" => self.a = Some(parse_f64(key, value)?),
            "b" => self.b = Some(parse_f64(key, value)?),
            "M" => {
                let m = parse_u64(key, value)?;
                self.modes = Some(m as usize);
            }
            "h" => self.h = Some(parse_f64(key, value)?),
            "tau" => self.tau = Some(parse_f64(key, value)?),
            "T" => self.t_final = Some(parse_f64(key, value)?),
            "preset" => {}
            "family" => {
                self.family = Some(match value {
                    "single" => Family::Single,
                    "pair" => Family::Pair,
                    _ => return Err(invalid(key, format!("`{value}` must be single or pair"))),
                })
            }
            "A" => self.amp = Some(parse_f64(key, value)?),
            "A1" => self.amp1 = Some(parse_f64(key, value)?),
            "A2" => self.amp2 = Some(parse_f64(key, value)?),
            "x0" => self.x0 = Some(parse_f64(key, value)?),
            "x1" => self.x1 = Some(parse_f64(key, value)?),
            "x2" => self.x2 = Some(parse_f64(key, value)?),
            "v_sign" => self.motion = Some(parse_motion(key, value)?),
            "v1_sign" => self.motion1 = Some(parse_motion(key, value)?),
            "v2_sign" => self.motion2 = Some(parse_motion(key, value)?),
            "static" => self.is_static = Some(parse_bool(key, value)?),
            "nonlinearity" => self.nonlinearity = Some(value.to_string()),
            "m_orders" => {
                let list = value.trim_start_matches('[').trim_end_matches(']');
                let orders = list
                    .split(',')
                    .map(|s| parse_f64(key, s.trim()))
                    .collect::<Result<Vec<_>, _>>()?;
                self.m_orders = Some(orders);
            }
            "snapshot_stride" => self.snapshot_stride = Some(parse_u64(key, value)?),
            "series_stride" => self.series_stride = Some(parse_u64(key, value)?),
            "blowup_threshold" => self.blowup_threshold = Some(parse_f64(key, value)?),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "strict_steps" => self.strict_steps = Some(parse_bool(key, value)?),
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    fn finish(self) -> Result<ExperimentConfig, ConfigError> {
        let a = self.a.ok_or(ConfigError::Missing("a"))?;
        let b = self.b.ok_or(ConfigError::Missing("b"))?;
        let modes = match (self.modes, self.h) {
            (Some(m), None) => m,
            (None, Some(h)) => TorusGrid::with_mesh_size(a, b, h)
                .map_err(|e| invalid("h", e.to_string()))?
                .modes(),
            (Some(m), Some(h)) => {
                if ((b - a) / m as f64 - h).abs() > 1e-12 * h {
                    return Err(invalid("h", format!("h = {h} disagrees with M = {m}")));
                }
                m
            }
            (None, None) => return Err(ConfigError::Missing("M")),
        };
        let tau = self.tau.ok_or(ConfigError::Missing("tau"))?;
        let t_final = self.t_final.ok_or(ConfigError::Missing("T"))?;
        let initial = match self.family.ok_or(ConfigError::Missing("family"))? {
            Family::Single => {
                let mut motion = self.motion.unwrap_or(Motion::Traveling(Sign::Plus));
                if self.is_static == Some(true) {
                    motion = Motion::Static;
                } else if self.is_static == Some(false) && motion == Motion::Static {
                    return Err(invalid("static", "static = false contradicts v_sign = 0"));
                }
                InitialSpec::Single(SolitonSpec::new(
                    self.amp.ok_or(ConfigError::Missing("A"))?,
                    self.x0.unwrap_or(0.0),
                    motion,
                ))
            }
            Family::Pair => {
                if self.is_static.is_some() {
                    return Err(invalid("static", "applies to family = single; use v1_sign/v2_sign = 0"));
                }
                InitialSpec::Pair(
                    SolitonSpec::new(
                        self.amp1.ok_or(ConfigError::Missing("A1"))?,
                        self.x1.ok_or(ConfigError::Missing("x1"))?,
                        self.motion1.unwrap_or(Motion::Traveling(Sign::Plus)),
                    ),
                    SolitonSpec::new(
                        self.amp2.ok_or(ConfigError::Missing("A2"))?,
                        self.x2.ok_or(ConfigError::Missing("x2"))?,
                        self.motion2.unwrap_or(Motion::Traveling(Sign::Minus)),
                    ),
                )
            }
        };
        let defaults = ExperimentConfig::base(a, b, modes, tau, t_final, initial);
        let blowup = BlowupPolicy {
            threshold: self.blowup_threshold.unwrap_or(defaults.blowup.threshold),
            ..defaults.blowup
        };
        let config = ExperimentConfig {
            preset: self.preset,
            nonlinearity: self.nonlinearity.unwrap_or(defaults.nonlinearity),
            m_orders: self.m_orders.unwrap_or(defaults.m_orders),
            snapshot_stride: self.snapshot_stride.unwrap_or(defaults.snapshot_stride),
            series_stride: self.series_stride.unwrap_or(defaults.series_stride),
            blowup,
            out_dir: self.out_dir.unwrap_or(defaults.out_dir),
            strict_steps: self.strict_steps.unwrap_or(defaults.strict_steps),
            ..defaults
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parses a configuration file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            text: raw.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line: line_no,
                text: raw.to_string(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        if seen.insert(key.to_string(), line_no).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        entries.push((line_no, key.to_string(), value.to_string()));
    }

    let mut draft = match entries.iter().find(|(_, k, _)| k == "preset") {
        Some((_, _, id)) => Draft::from_config(&preset_case(id)?),
        None => Draft::default(),
    };
    // an explicit resolution replaces the preset's
    if seen.contains_key("M") || seen.contains_key("h") {
        draft.modes = None;
        draft.h = None;
    }
    for (_, key, value) in &entries {
        draft.apply(key, value)?;
    }
    draft.finish()
}

/// Domain, resolution and step shared by the interaction experiments.
const INTERACTION_DOMAIN: (f64, f64) = (-400.0, 400.0);
const PAPER_MESH: f64 = 0.125;
const PAPER_TAU: f64 = 1e-3;
const INTERACTION_T: f64 = 100.0;
// the A = 1.5 pulse at rest separates into two minima only after t ~ 33 at tau = 1e-3
const SPLITTING_T: f64 = 40.0;

const CASES: &[&str] = &[
    "i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi",
];

/// Comma-separated list of preset identifiers.
pub fn valid_presets() -> String {
    let mut ids = vec!["example1".to_string(), "example1-long".to_string()];
    ids.extend(CASES.iter().map(|c| format!("case-{c}")));
    ids.push("birth-A=<value>".into());
    ids.push("static-A=<value>".into());
    ids.join(", ")
}

fn modes_for(a: f64, b: f64, h: f64) -> usize {
    ((b - a) / h).round() as usize
}

/// Expands a preset identifier into a full configuration.
///
/// Identifiers: `example1`, `example1-long`, `case-i` ... `case-xi` (the bare
/// roman numeral is accepted too), `birth-A=<value>` (travelling soliton of
/// amplitude A) and `static-A=<value>` (soliton profile at rest).
pub fn preset_case(id: &str) -> Result<ExperimentConfig, ConfigError> {
    let unknown = || ConfigError::UnknownPreset {
        id: id.to_string(),
        valid: valid_presets(),
    };
    let plus = Motion::Traveling(Sign::Plus);
    let minus = Motion::Traveling(Sign::Minus);
    let (lo, hi) = INTERACTION_DOMAIN;
    let interaction_modes = modes_for(lo, hi, PAPER_MESH);

    let mut config = match id {
        "example1" => ExperimentConfig::base(
            -60.0,
            60.0,
            modes_for(-60.0, 60.0, PAPER_MESH),
            PAPER_TAU,
            2.0,
            InitialSpec::Single(SolitonSpec::new(0.375, 0.0, plus)),
        ),
        // long-time mass study, shortened to T = 20
        "example1-long" => ExperimentConfig::base(
            -300.0,
            300.0,
            modes_for(-300.0, 300.0, PAPER_MESH),
            PAPER_TAU,
            20.0,
            InitialSpec::Single(SolitonSpec::new(0.375, 0.0, plus)),
        ),
        _ if id.starts_with("birth-A=") || id.starts_with("static-A=") => {
            let (_, value) = id.split_once('=').ok_or_else(unknown)?;
            let amplitude = parse_f64("preset", value).map_err(|_| unknown())?;
            let motion = if id.starts_with("birth") { plus } else { Motion::Static };
            let mut c = ExperimentConfig::base(
                lo,
                hi,
                interaction_modes,
                PAPER_TAU,
                SPLITTING_T,
                InitialSpec::Single(SolitonSpec::new(amplitude, 0.0, motion)),
            );
            c.snapshot_stride = 5000;
            c.validate()?;
            c
        }
        _ => {
            let case = id.strip_prefix("case-").unwrap_or(id);
            // soliton 1 starts on the left so that v1 > 0, v2 < 0 is a head-on collision
            let (s1, s2) = match case {
                "i" => (SolitonSpec::new(0.2, -50.0, plus), SolitonSpec::new(0.3, 50.0, minus)),
                "ii" => (SolitonSpec::new(0.2, -10.0, plus), SolitonSpec::new(0.5, 10.0, minus)),
                "iii" => (SolitonSpec::new(0.37, -50.0, plus), SolitonSpec::new(0.37, 50.0, minus)),
                "iv" => (SolitonSpec::new(0.38, -50.0, plus), SolitonSpec::new(0.38, 50.0, minus)),
                "v" => (SolitonSpec::new(0.3, -50.0, plus), SolitonSpec::new(0.45, 50.0, minus)),
                "vi" => (SolitonSpec::new(0.3, -50.0, plus), SolitonSpec::new(0.46, 50.0, minus)),
                "vii" => (SolitonSpec::new(0.37, -50.0, plus), SolitonSpec::new(1.5, 50.0, Motion::Static)),
                "viii" => (SolitonSpec::new(0.38, -50.0, plus), SolitonSpec::new(1.5, 50.0, Motion::Static)),
                "ix" => (SolitonSpec::new(1.5, 30.0, Motion::Static), SolitonSpec::new(1.5, -30.0, Motion::Static)),
                "x" => (SolitonSpec::new(1.5, 20.0, Motion::Static), SolitonSpec::new(1.5, -20.0, Motion::Static)),
                "xi" => (SolitonSpec::new(0.2, -80.0, plus), SolitonSpec::new(1.0, -50.0, plus)),
                _ => return Err(unknown()),
            };
            let mut c = ExperimentConfig::base(
                lo,
                hi,
                interaction_modes,
                PAPER_TAU,
                INTERACTION_T,
                InitialSpec::Pair(s1, s2),
            );
            c.snapshot_stride = 10_000;
            c
        }
    };
    config.preset = Some(id.to_string());
    Ok(config)
}
