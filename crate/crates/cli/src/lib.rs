//! Experiment drivers behind the `gbdei` binary.
//!
//! [`run`] evolves one configuration and writes plot-ready CSV files;
//! [`converge`] repeats a configuration over several step sizes or grids and
//! assembles an order table.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gbdei_core::config::steps_for;
use gbdei_core::stepper::ObserverError;
use gbdei_core::{
    error_reports, fit_order, mass, BlowupDetector, BlowupRecord, Control, DeiFp, ErrorReport,
    ExperimentConfig, Fourier, NodalField, Observer, SolitonParams, TorusGrid, WaveState,
};

/// Process exit status for a run that detected blow-up.
pub const EXIT_BLOWUP: u8 = 2;
/// Process exit status for an invalid configuration (`EX_USAGE`).
pub const EXIT_INVALID_CONFIG: u8 = 64;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    BlewUp(BlowupRecord),
}

impl RunStatus {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::BlewUp(_) => EXIT_BLOWUP,
        }
    }

    /// The final status line printed by the binary.
    pub fn status_line(&self) -> String {
        match self {
            RunStatus::Completed => "status: completed".to_string(),
            RunStatus::BlewUp(r) => format!(
                "status: blew-up t={} step={} max|z|={:e}",
                r.t, r.step, r.max_amplitude
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub final_state: WaveState,
    /// Errors at the final time; empty without an exact solution.
    pub final_errors: Vec<ErrorReport>,
    pub files: Vec<PathBuf>,
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn boxed(e: impl std::error::Error + Send + Sync + 'static) -> ObserverError {
    Box::new(e)
}

struct SeriesWriter {
    stride: u64,
    fourier: Fourier,
    mass: BufWriter<File>,
    amplitude: BufWriter<File>,
}

impl Observer for SeriesWriter {
    fn stride(&self) -> u64 {
        self.stride
    }

    fn observe(&mut self, state: &WaveState) -> std::result::Result<Control, ObserverError> {
        let t = state.t();
        writeln!(self.mass, "{t},{:.16e}", mass(state).map_err(boxed)?)?;
        let z = self.fourier.inverse(state.zhat()).map_err(boxed)?;
        writeln!(self.amplitude, "{t},{:.16e}", z.max_abs())?;
        Ok(Control::Continue)
    }
}

struct ErrorWriter {
    stride: u64,
    exact: SolitonParams,
    orders: Vec<f64>,
    fourier: Fourier,
    out: BufWriter<File>,
}

impl Observer for ErrorWriter {
    fn stride(&self) -> u64 {
        self.stride
    }

    fn observe(&mut self, state: &WaveState) -> std::result::Result<Control, ObserverError> {
        for r in error_reports(state, &self.exact, &self.orders, &mut self.fourier).map_err(boxed)? {
            writeln!(
                self.out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                r.t, r.m, r.e_z, r.e_dz, r.total
            )?;
        }
        Ok(Control::Continue)
    }
}

struct SnapshotWriter {
    stride: u64,
    dir: PathBuf,
    fourier: Fourier,
    last_step: Option<u64>,
    written: Vec<PathBuf>,
    /// Nodal initial data, written verbatim for step 0.
    initial: (NodalField, NodalField),
}

impl SnapshotWriter {
    fn write(&mut self, state: &WaveState) -> Result<()> {
        if self.last_step == Some(state.step_index()) {
            return Ok(());
        }
        let path = self.dir.join(format!("snapshot_{:08}.csv", state.step_index()));
        let (z, dz) = if state.step_index() == 0 {
            self.initial.clone()
        } else {
            state.nodal(&mut self.fourier)?
        };
        let mut out = csv_writer(&path)?;
        writeln!(out, "x,z,dz")?;
        let grid = state.grid();
        for (j, (zj, dzj)) in z.values().iter().zip(dz.values()).enumerate() {
            writeln!(out, "{:.16e},{zj:.16e},{dzj:.16e}", grid.node(j))?;
        }
        out.flush()?;
        self.last_step = Some(state.step_index());
        self.written.push(path);
        Ok(())
    }
}

impl Observer for SnapshotWriter {
    fn stride(&self) -> u64 {
        // stride 0: only the initial snapshot here, the final one is written after the run
        if self.stride == 0 {
            u64::MAX
        } else {
            self.stride
        }
    }

    fn observe(&mut self, state: &WaveState) -> std::result::Result<Control, ObserverError> {
        self.write(state).map_err(|e| -> ObserverError { e.into() })?;
        Ok(Control::Continue)
    }
}

/// Evolves `config` and writes its artifacts to `config.out_dir`:
///
/// * `snapshot_XXXXXXXX.csv` (`x,z,dz` at step `XXXXXXXX`, i.e. `t = step * tau`)
/// * `mass.csv` (`t,mass`) and `amplitude.csv` (`t,value` with `max_j |z_j|`)
/// * `errors.csv` (`t,m,e_z,e_dz,total`) when the data is an exact soliton
/// * `config.txt`, the fully expanded configuration
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let grid = config.grid()?;
    let n_steps = config.n_steps()?;
    let dir = &config.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;

    let config_path = dir.join("config.txt");
    fs::write(&config_path, config.to_config_text())
        .with_context(|| format!("cannot write {}", config_path.display()))?;

    let mut fourier = Fourier::new(grid);
    let data = config.initial_data(grid)?;
    let state = WaveState::from_nodal(0.0, &data.z0, &data.z1, &mut fourier)?;
    let mut stepper = DeiFp::new(grid, config.tau, config.nonlinearity()?)?;

    let mass_path = dir.join("mass.csv");
    let amplitude_path = dir.join("amplitude.csv");
    let mut series = SeriesWriter {
        stride: config.series_stride,
        fourier: fourier.clone(),
        mass: csv_writer(&mass_path)?,
        amplitude: csv_writer(&amplitude_path)?,
    };
    writeln!(series.mass, "t,mass")?;
    writeln!(series.amplitude, "t,value")?;

    let exact = config.exact_solution();
    let errors_path = dir.join("errors.csv");
    let mut errors = match exact {
        Some(exact) => {
            let mut out = csv_writer(&errors_path)?;
            writeln!(out, "t,m,e_z,e_dz,total")?;
            Some(ErrorWriter {
                stride: config.series_stride,
                exact,
                orders: config.m_orders.clone(),
                fourier: fourier.clone(),
                out,
            })
        }
        None => None,
    };
    let mut snapshots = SnapshotWriter {
        stride: config.snapshot_stride,
        dir: dir.clone(),
        fourier: fourier.clone(),
        last_step: None,
        written: Vec::new(),
        initial: (data.z0.clone(), data.z1.clone()),
    };
    let mut detector = BlowupDetector::new(config.blowup, fourier.clone());

    let state = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut detector, &mut series, &mut snapshots];
        if let Some(e) = errors.as_mut() {
            observers.push(e);
        }
        stepper.evolve(state, n_steps, &mut observers)?
    };

    let status = match detector.record() {
        Some(record) => RunStatus::BlewUp(record),
        None if state.is_diverged() => RunStatus::BlewUp(BlowupRecord {
            t: state.t(),
            step: state.step_index(),
            max_amplitude: f64::INFINITY,
        }),
        None => RunStatus::Completed,
    };
    if state.zhat().is_finite() && state.dzhat().is_finite() {
        snapshots.write(&state)?;
    }

    let mut final_errors = Vec::new();
    if let (Some(exact), RunStatus::Completed) = (exact, status) {
        final_errors = error_reports(&state, &exact, &config.m_orders, &mut fourier)?;
    }

    let mut files = vec![config_path, mass_path, amplitude_path];
    series.mass.flush()?;
    series.amplitude.flush()?;
    if let Some(mut e) = errors {
        e.out.flush()?;
        files.push(errors_path);
    }
    files.extend(snapshots.written);
    Ok(RunSummary {
        status,
        final_state: state,
        final_errors,
        files,
    })
}

/// What a convergence sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Levels are step sizes `tau`; the grid is fixed.
    Time,
    /// Levels are mode counts `M`; the step size is fixed.
    Space,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Time => "time",
            SweepMode::Space => "space",
        }
    }
}

/// Temporal levels `0.2 * 2^-k`, `k = 0..5`, on the configured grid.
pub fn default_time_levels() -> Vec<f64> {
    (0..6).map(|k| 0.2 / f64::from(1u32 << k)).collect()
}

/// Spatial levels `M = 60, 120, 240, 480`.
pub fn default_space_levels() -> Vec<f64> {
    vec![60.0, 120.0, 240.0, 480.0]
}

/// Desk-scale spatial sweep setup: `tau = 1e-4`, `T = 1`. The full-scale
/// `tau = 1e-6`, `T = 2` is reachable by configuring it and keeping it.
pub fn desk_space_sweep(mut config: ExperimentConfig) -> ExperimentConfig {
    config.tau = 1e-4;
    config.t_final = 1.0;
    config
}

/// One level of a sweep; `errors` is `None` when the level diverged.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub level: usize,
    /// `tau` for a temporal sweep, `h` for a spatial one.
    pub step: f64,
    pub modes: usize,
    pub tau: f64,
    pub errors: Option<Vec<ErrorReport>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub mode: SweepMode,
    pub orders: Vec<f64>,
    pub rows: Vec<OrderRow>,
}

impl OrderTable {
    /// Error `total` for order index `k` at each converged row.
    pub fn series(&self, k: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.errors.as_ref().map(|e| (r.step, e[k].total)))
            .collect()
    }

    /// Least-squares slope of `log e` against `log step` for order index `k`;
    /// `None` with fewer than three converged levels.
    pub fn fitted_order(&self, k: usize) -> Option<f64> {
        fit_order(&self.series(k)).ok().map(|f| f.slope)
    }

    /// Observed order between row `i - 1` and row `i`, first requested `m`.
    pub fn local_order(&self, i: usize) -> Option<f64> {
        if i == 0 {
            return None;
        }
        let (prev, cur) = (&self.rows[i - 1], &self.rows[i]);
        let (ep, ec) = (prev.errors.as_ref()?[0].total, cur.errors.as_ref()?[0].total);
        Some((ep / ec).ln() / (prev.step / cur.step).ln())
    }

    /// `level,step,e_<m>...,fitted_order`. `fitted_order` holds the local
    /// order against the previous level for the first `m`; the trailing `fit`
    /// row holds the least-squares slope for every `m`. Diverged levels read
    /// `diverged`, unavailable values `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,step");
        for m in &self.orders {
            out.push_str(&format!(",e_{m}"));
        }
        out.push_str(",fitted_order\n");
        let na = || "NA".to_string();
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{},{:.16e}", row.level, row.step));
            match &row.errors {
                Some(errors) => {
                    for e in errors {
                        out.push_str(&format!(",{:.16e}", e.total));
                    }
                    let local = self.local_order(i).map_or_else(na, |p| format!("{p:.6}"));
                    out.push_str(&format!(",{local}\n"));
                }
                None => {
                    for _ in &self.orders {
                        out.push_str(",diverged");
                    }
                    out.push_str(",diverged\n");
                }
            }
        }
        out.push_str("fit,NA");
        for k in 0..self.orders.len() {
            let fit = self.fitted_order(k).map_or_else(na, |p| format!("{p:.6}"));
            out.push_str(&format!(",{fit}"));
        }
        let first = self.fitted_order(0).map_or_else(na, |p| format!("{p:.6}"));
        out.push_str(&format!(",{first}\n"));
        out
    }
}

fn run_level(config: &ExperimentConfig, exact: &SolitonParams, grid: TorusGrid, tau: f64) -> Result<Option<Vec<ErrorReport>>> {
    let n_steps = steps_for(config.t_final, tau, config.strict_steps)?;
    let mut fourier = Fourier::new(grid);
    let data = config.initial_data(grid)?;
    let state = WaveState::from_nodal(0.0, &data.z0, &data.z1, &mut fourier)?;
    let mut stepper = DeiFp::new(grid, tau, config.nonlinearity()?)?;
    let mut detector = BlowupDetector::new(config.blowup, fourier.clone());
    let state = stepper.evolve(state, n_steps, &mut [&mut detector])?;
    if state.is_diverged() || detector.record().is_some() {
        return Ok(None);
    }
    Ok(Some(error_reports(&state, exact, &config.m_orders, &mut fourier)?))
}

/// Runs `config` once per level and tabulates the final-time errors.
///
/// Levels run concurrently; each is independent and deterministic.
pub fn converge(config: &ExperimentConfig, mode: SweepMode, levels: &[f64]) -> Result<OrderTable> {
    config.validate()?;
    if levels.len() < 3 {
        bail!("a convergence sweep needs at least 3 levels, got {}", levels.len());
    }
    let exact = config
        .exact_solution()
        .ok_or_else(|| anyhow!("convergence sweeps need an exact travelling-soliton solution"))?;
    let jobs: Vec<(TorusGrid, f64)> = levels
        .iter()
        .map(|&level| match mode {
            SweepMode::Time => Ok((config.grid()?, level)),
            SweepMode::Space => {
                if level.fract() != 0.0 || level < 4.0 {
                    bail!("spatial level {level} is not a mode count");
                }
                Ok((TorusGrid::new(config.a, config.b, level as usize)?, config.tau))
            }
        })
        .collect::<Result<_>>()?;

    let results: Vec<Result<Option<Vec<ErrorReport>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(grid, tau)| scope.spawn(move || run_level(config, &exact, grid, tau)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("sweep level panicked"))))
            .collect()
    });

    let mut rows = Vec::with_capacity(levels.len());
    for (level, (result, (grid, tau))) in results.into_iter().zip(jobs).enumerate() {
        rows.push(OrderRow {
            level,
            step: match mode {
                SweepMode::Time => tau,
                SweepMode::Space => grid.h(),
            },
            modes: grid.modes(),
            tau,
            errors: result.with_context(|| format!("sweep level {level}"))?,
        });
    }
    Ok(OrderTable {
        mode,
        orders: config.m_orders.clone(),
        rows,
    })
}

/// Replaces or appends `key = value` lines in a configuration text.
pub fn apply_overrides(text: &str, overrides: &[(String, String)]) -> String {
    let mut out: String = text
        .lines()
        .filter(|line| {
            let key = line.split('#').next().unwrap_or("").split('=').next().unwrap_or("").trim();
            !overrides.iter().any(|(k, _)| k == key)
        })
        .map(|line| format!("{line}\n"))
        .collect();
    for (k, v) in overrides {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use gbdei_core::preset_case;

    fn report(total: f64) -> ErrorReport {
        ErrorReport {
            m: 2.0,
            e_z: total,
            e_dz: 0.0,
            total,
            t: 1.0,
        }
    }

    #[test]
    fn synthetic_quadratic_errors_fit_order_two() {
        let rows = default_time_levels()
            .into_iter()
            .enumerate()
            .map(|(level, tau)| OrderRow {
                level,
                step: tau,
                modes: 960,
                tau,
                errors: Some(vec![report(3.7 * tau * tau)]),
            })
            .collect();
        let table = OrderTable {
            mode: SweepMode::Time,
            orders: vec![2.0],
            rows,
        };
        assert!((table.fitted_order(0).unwrap() - 2.0).abs() < 1e-12);
        assert!((table.local_order(3).unwrap() - 2.0).abs() < 1e-12);
        let csv = table.to_csv();
        assert!(csv.starts_with("level,step,e_2,fitted_order\n0,"));
        assert!(csv.trim_end().ends_with("fit,NA,2.000000,2.000000"));
    }

    #[test]
    fn diverged_levels_are_marked() {
        let table = OrderTable {
            mode: SweepMode::Time,
            orders: vec![1.0, 2.0],
            rows: vec![
                OrderRow { level: 0, step: 0.2, modes: 8, tau: 0.2, errors: None },
                OrderRow { level: 1, step: 0.1, modes: 8, tau: 0.1, errors: Some(vec![report(1e-2), report(2e-2)]) },
            ],
        };
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[1].ends_with(",diverged,diverged,diverged"));
        assert!(lines[2].ends_with(",NA"));
        assert_eq!(lines[3], "fit,NA,NA,NA,NA");
    }

    #[test]
    fn overrides_replace_keys() {
        let text = "preset = example1\ntau = 0.01 # coarse\nT = 1\n";
        let merged = apply_overrides(text, &[("tau".into(), "0.02".into()), ("M".into(), "64".into())]);
        assert_eq!(merged, "preset = example1\nT = 1\ntau = 0.02\nM = 64\n");
        let c = gbdei_core::parse_config(&merged).unwrap();
        assert_eq!((c.tau, c.modes), (0.02, 64));
    }

    #[test]
    fn sweep_needs_three_levels_and_an_exact_solution() {
        let c = preset_case("example1").unwrap();
        assert!(converge(&c, SweepMode::Time, &[0.1, 0.05]).is_err());
        let pair = preset_case("case-i").unwrap();
        assert!(converge(&pair, SweepMode::Time, &[0.1, 0.05, 0.025]).is_err());
        assert!(converge(&c, SweepMode::Space, &[60.0, 120.5, 240.0]).is_err());
    }
}
