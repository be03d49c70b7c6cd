//! Norms, error functionals, mass, blow-up detection and order fitting.

use crate::error::{Error, Result};
use crate::solutions::{soliton, soliton_time_derivative, SolitonParams};
use crate::spectral::{Fourier, NodalField, SpectrumField};
use crate::stepper::{Control, Observer, ObserverError, WaveState};

/// `||f||_m = sqrt( sum_l (1 + mu_l^2)^m |f_l|^2 )`, for any real order `m`.
pub fn sobolev_norm(spectrum: &SpectrumField, m: f64) -> Result<f64> {
    if !spectrum.is_finite() {
        return Err(Error::NonFinite("spectrum"));
    }
    let grid = spectrum.grid();
    let sum: f64 = spectrum
        .modes()
        .map(|(l, c)| {
            let mu = grid.wavenumber(l);
            (1.0 + mu * mu).powf(m) * c.norm_sqr()
        })
        .sum();
    Ok(sum.sqrt())
}

/// Something that can be evaluated as `(z, dz/dt)` at `(x, t)`.
pub trait ExactSolution {
    fn eval(&self, x: f64, t: f64) -> (f64, f64);
}

impl ExactSolution for SolitonParams {
    fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        (soliton(x, t, self), soliton_time_derivative(x, t, self))
    }
}

impl<F: Fn(f64, f64) -> (f64, f64)> ExactSolution for F {
    fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        self(x, t)
    }
}

/// `e_z = ||z_num - z_exact||_m`, `e_dz = ||dz_num - dz_exact||_{m-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub m: f64,
    pub e_z: f64,
    pub e_dz: f64,
    pub total: f64,
    pub t: f64,
}

/// Error of `state` against `exact` for each requested order.
///
/// The exact solution is sampled at the nodes, so this measures the
/// interpolant of the nodal difference.
pub fn error_reports(
    state: &WaveState,
    exact: &dyn ExactSolution,
    orders: &[f64],
    fourier: &mut Fourier,
) -> Result<Vec<ErrorReport>> {
    if state.is_diverged() {
        return Err(Error::Diverged {
            step: state.step_index(),
            t: state.t(),
        });
    }
    let grid = state.grid();
    let t = state.t();
    let samples: Vec<(f64, f64)> = grid.nodes().into_iter().map(|x| exact.eval(x, t)).collect();
    let ez = NodalField::new(grid, samples.iter().map(|s| s.0).collect())?;
    let edz = NodalField::new(grid, samples.iter().map(|s| s.1).collect())?;
    let dz_diff = state.zhat().add_scaled(-1.0, &fourier.forward(&ez)?)?;
    let ddz_diff = state.dzhat().add_scaled(-1.0, &fourier.forward(&edz)?)?;
    orders
        .iter()
        .map(|&m| {
            let e_z = sobolev_norm(&dz_diff, m)?;
            let e_dz = sobolev_norm(&ddz_diff, m - 2.0)?;
            Ok(ErrorReport {
                m,
                e_z,
                e_dz,
                total: e_z + e_dz,
                t,
            })
        })
        .collect()
}

/// Single-order form of [`error_reports`].
pub fn error_pair(
    state: &WaveState,
    exact: &dyn ExactSolution,
    m: f64,
    fourier: &mut Fourier,
) -> Result<ErrorReport> {
    Ok(error_reports(state, exact, &[m], fourier)?[0])
}

/// `int_a^b z dx = (b - a) Re z_0`.
pub fn mass(state: &WaveState) -> Result<f64> {
    if state.is_diverged() {
        return Err(Error::Diverged {
            step: state.step_index(),
            t: state.t(),
        });
    }
    let z0 = state.zhat().get(0);
    if !z0.re.is_finite() {
        return Err(Error::NonFinite("zero mode"));
    }
    Ok(state.grid().width() * z0.re)
}

/// Fraction of the spectral energy held by modes with `|l| > M/3`.
pub fn aliasing_fraction(spectrum: &SpectrumField) -> f64 {
    let cutoff = spectrum.grid().modes() as i64 / 3;
    let (mut high, mut total) = (0.0, 0.0);
    for (l, c) in spectrum.modes() {
        total += c.norm_sqr();
        if l.abs() > cutoff {
            high += c.norm_sqr();
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupPolicy {
    /// Trigger level for `max_j |z_j|`.
    pub threshold: f64,
    pub check_stride: u64,
}

impl Default for BlowupPolicy {
    fn default() -> Self {
        Self {
            threshold: 1e6,
            check_stride: 10,
        }
    }
}

impl BlowupPolicy {
    pub fn new(threshold: f64, check_stride: u64) -> Result<Self> {
        if !(threshold > 0.0) || check_stride == 0 {
            return Err(Error::Parameter(format!(
                "blow-up threshold {threshold} must be positive and stride {check_stride} non-zero"
            )));
        }
        Ok(Self {
            threshold,
            check_stride,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupRecord {
    pub t: f64,
    pub step: u64,
    /// `max_j |z_j|`; infinite when the state held non-finite values.
    pub max_amplitude: f64,
}

/// Checks one state against the policy.
pub fn detect_blowup(
    state: &WaveState,
    policy: &BlowupPolicy,
    fourier: &mut Fourier,
) -> Option<BlowupRecord> {
    let record = |max_amplitude| {
        Some(BlowupRecord {
            t: state.t(),
            step: state.step_index(),
            max_amplitude,
        })
    };
    if !state.zhat().is_finite() || !state.dzhat().is_finite() {
        return record(f64::INFINITY);
    }
    match fourier.inverse(state.zhat()) {
        Ok(z) => {
            let max = z.max_abs();
            if max >= policy.threshold || !max.is_finite() {
                record(max)
            } else {
                None
            }
        }
        Err(_) => record(f64::INFINITY),
    }
}

/// Observer that halts the run on the first blow-up detection.
#[derive(Debug)]
pub struct BlowupDetector {
    policy: BlowupPolicy,
    fourier: Fourier,
    record: Option<BlowupRecord>,
}

impl BlowupDetector {
    pub fn new(policy: BlowupPolicy, fourier: Fourier) -> Self {
        Self {
            policy,
            fourier,
            record: None,
        }
    }

    pub fn record(&self) -> Option<BlowupRecord> {
        self.record
    }
}

impl Observer for BlowupDetector {
    fn stride(&self) -> u64 {
        self.policy.check_stride
    }

    fn observe(&mut self, state: &WaveState) -> Result<Control, ObserverError> {
        if self.record.is_some() {
            return Ok(Control::Diverged);
        }
        self.record = detect_blowup(state, &self.policy, &mut self.fourier);
        Ok(if self.record.is_some() {
            Control::Diverged
        } else {
            Control::Continue
        })
    }
}

/// Least-squares fit of `log(error) = slope * log(step) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
}

pub fn fit_order(samples: &[(f64, f64)]) -> Result<OrderFit> {
    if samples.len() < 3 {
        return Err(Error::Parameter(format!(
            "order fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples
        .iter()
        .find(|(s, e)| !(*s > 0.0 && *e > 0.0 && s.is_finite() && e.is_finite()))
    {
        return Err(Error::Parameter(format!(
            "order fit needs positive finite samples, got {bad:?}"
        )));
    }
    let n = samples.len() as f64;
    let pts: Vec<(f64, f64)> = samples.iter().map(|(s, e)| (s.ln(), e.ln())).collect();
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("order fit needs distinct step sizes".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).abs())
        .fold(0.0, f64::max);
    Ok(OrderFit {
        slope,
        intercept,
        max_residual,
    })
}
