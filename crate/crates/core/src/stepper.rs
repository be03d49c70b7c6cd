//! Deuflhard-type exponential integrator in Fourier coefficient space.
//!
//! Each mode `l != 0` of the semi-discrete system
//! `z_l'' + theta_l^2 z_l + mu_l^2 rho_l = 0`, `rho = f(z)`, is advanced with
//! the variation-of-constants formula and a trapezoidal rule for the
//! convolution integrals:
//!
//! ```text
//! z_l^{k+1}  =  cos(theta tau) z_l^k + sin(theta tau)/theta v_l^k - tau mu^2 sin(theta tau)/(2 theta) rho_l^k
//! v_l^{k+1}  = -theta sin(theta tau) z_l^k + cos(theta tau) v_l^k - tau mu^2/2 (cos(theta tau) rho_l^k + rho_l^{k+1})
//! ```
//!
//! The zero mode moves linearly: `z_0 += tau v_0`, `v_0` is constant.
//! `rho^{k+1}` uses the freshly computed `z^{k+1}`, so the step is explicit.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Fourier, NodalField, SpectrumField, TorusGrid};

/// A pointwise nonlinearity `f: R -> R`.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity").field("name", &self.name).finish()
    }
}

impl Nonlinearity {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// `f(z) = z^2`, the classical Good Boussinesq nonlinearity.
    pub fn quadratic() -> Self {
        Self::new("quadratic", |z| z * z)
    }

    pub fn cubic() -> Self {
        Self::new("cubic", |z| z * z * z)
    }

    /// `f = 0`: the linear (free) equation.
    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0)
    }

    pub fn identity() -> Self {
        Self::new("identity", |z| z)
    }

    /// Looks up one of the built-in nonlinearities by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "quadratic" => Ok(Self::quadratic()),
            "cubic" => Ok(Self::cubic()),
            "zero" => Ok(Self::zero()),
            "identity" => Ok(Self::identity()),
            other => Err(Error::Parameter(format!(
                "unknown nonlinearity `{other}` (expected quadratic, cubic, zero or identity)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, z: f64) -> f64 {
        (self.f)(z)
    }
}

/// Per-mode trigonometric update weights for one `(grid, tau)` pair.
///
/// Arrays are slot-ordered; the slot of mode `0` holds zeros and is never
/// read, the zero mode uses the linear branch instead.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperCoefficients {
    grid: TorusGrid,
    tau: f64,
    cos_t: Vec<f64>,
    sinc_t: Vec<f64>,
    pz: Vec<f64>,
    dz: Vec<f64>,
    qc: Vec<f64>,
    qn: Vec<f64>,
}

/// The six weights of one mode, see [`StepperCoefficients::weights`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeWeights {
    pub cos_t: f64,
    pub sinc_t: f64,
    pub pz: f64,
    pub dz: f64,
    pub qc: f64,
    pub qn: f64,
}

impl StepperCoefficients {
    /// Builds the tables. Negative `tau` is accepted (backward stepping).
    pub fn build(grid: TorusGrid, tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau == 0.0 {
            return Err(Error::Parameter(format!(
                "time step tau = {tau} must be finite and non-zero"
            )));
        }
        let symbols = grid.symbols();
        let n = grid.modes();
        let mut table = Self {
            grid,
            tau,
            cos_t: vec![0.0; n],
            sinc_t: vec![0.0; n],
            pz: vec![0.0; n],
            dz: vec![0.0; n],
            qc: vec![0.0; n],
            qn: vec![0.0; n],
        };
        let mus = symbols.mu_slots();
        let thetas = symbols.theta_slots();
        for k in 1..n {
            let (mu2, theta) = (mus[k] * mus[k], thetas[k]);
            let (sin, cos) = (theta * tau).sin_cos();
            let half = 0.5 * tau * mu2;
            table.cos_t[k] = cos;
            table.sinc_t[k] = sin / theta;
            table.pz[k] = half * sin / theta;
            table.dz[k] = theta * sin;
            table.qc[k] = half * cos;
            table.qn[k] = half;
        }
        Ok(table)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Weights of mode `l`; `None` for the zero mode.
    pub fn weights(&self, l: i64) -> Option<ModeWeights> {
        if l == 0 || !self.grid.mode_range().contains(&l) {
            return None;
        }
        let k = self.grid.slot(l);
        Some(ModeWeights {
            cos_t: self.cos_t[k],
            sinc_t: self.sinc_t[k],
            pz: self.pz[k],
            dz: self.dz[k],
            qc: self.qc[k],
            qn: self.qn[k],
        })
    }
}

/// Numerical state: spectra of `z` and `dz/dt` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    t: f64,
    step: u64,
    zhat: SpectrumField,
    dzhat: SpectrumField,
    diverged: bool,
}

impl WaveState {
    pub fn new(t: f64, zhat: SpectrumField, dzhat: SpectrumField) -> Result<Self> {
        if zhat.grid() != dzhat.grid() {
            return Err(Error::GridMismatch);
        }
        if !zhat.is_finite() || !dzhat.is_finite() {
            return Err(Error::NonFinite("initial spectra"));
        }
        Ok(Self {
            t,
            step: 0,
            zhat,
            dzhat,
            diverged: false,
        })
    }

    /// Transforms nodal samples of `z` and `dz/dt` into a state at time `t`.
    pub fn from_nodal(
        t: f64,
        z: &NodalField,
        dz: &NodalField,
        fourier: &mut Fourier,
    ) -> Result<Self> {
        Self::new(t, fourier.forward(z)?, fourier.forward(dz)?)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Number of steps taken since the state was created.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn zhat(&self) -> &SpectrumField {
        &self.zhat
    }

    pub fn dzhat(&self) -> &SpectrumField {
        &self.dzhat
    }

    pub fn grid(&self) -> TorusGrid {
        self.zhat.grid()
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    pub fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    #[cfg(test)]
    pub(crate) fn zhat_mut_for_tests(&mut self) -> &mut SpectrumField {
        &mut self.zhat
    }

    /// Nodal values of `z` and `dz/dt`.
    pub fn nodal(&self, fourier: &mut Fourier) -> Result<(NodalField, NodalField)> {
        Ok((fourier.inverse(&self.zhat)?, fourier.inverse(&self.dzhat)?))
    }
}

/// What an observer asks the driver to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    /// Blow-up detected: flag the state as diverged and stop.
    Diverged,
}

pub type ObserverError = Box<dyn std::error::Error + Send + Sync>;

/// Callback invoked by [`DeiFp::evolve`] every `stride()` steps (and at step 0).
pub trait Observer {
    fn stride(&self) -> u64;

    fn observe(&mut self, state: &WaveState) -> Result<Control, ObserverError>;
}

/// The time stepper: tables, transform plans and work buffers for one grid and step size.
#[derive(Debug, Clone)]
pub struct DeiFp {
    tables: StepperCoefficients,
    nonlinearity: Nonlinearity,
    fourier: Fourier,
    dealias: bool,
    nodal: Vec<f64>,
    rho_old: Vec<Complex64>,
    rho_new: Vec<Complex64>,
    z_next: Vec<Complex64>,
    v_next: Vec<Complex64>,
}

impl DeiFp {
    pub fn new(grid: TorusGrid, tau: f64, nonlinearity: Nonlinearity) -> Result<Self> {
        let tables = StepperCoefficients::build(grid, tau)?;
        let n = grid.modes();
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self {
            tables,
            nonlinearity,
            fourier: Fourier::new(grid),
            dealias: false,
            nodal: vec![0.0; n],
            rho_old: vec![zero; n],
            rho_new: vec![zero; n],
            z_next: vec![zero; n],
            v_next: vec![zero; n],
        })
    }

    /// Enables 2/3-rule truncation of the nonlinear term (off by default).
    pub fn with_dealiasing(mut self, enabled: bool) -> Self {
        self.dealias = enabled;
        self
    }

    pub fn tables(&self) -> &StepperCoefficients {
        &self.tables
    }

    pub fn tau(&self) -> f64 {
        self.tables.tau
    }

    pub fn grid(&self) -> TorusGrid {
        self.tables.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    /// Coefficients of the interpolant of `f(z)` at the nodes.
    pub fn nonlinear_spectrum(&mut self, zhat: &SpectrumField) -> Result<SpectrumField> {
        if zhat.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid().modes()];
        self.nonlinear_into(zhat.slots(), &mut out)?;
        Ok(SpectrumField::from_slots(self.grid(), out))
    }

    fn nonlinear_into(&mut self, zhat: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.fourier.inverse_into(zhat, &mut self.nodal)?;
        for v in self.nodal.iter_mut() {
            *v = self.nonlinearity.apply(*v);
        }
        self.fourier.forward_into(&self.nodal, out)?;
        if self.dealias {
            let grid = self.grid();
            let cutoff = grid.modes() as i64 / 3;
            for (k, c) in out.iter_mut().enumerate() {
                if grid.mode_at(k).abs() > cutoff {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(())
    }

    /// Advances `state` by one step of size `tau`.
    ///
    /// If the step produces non-finite values the state is flagged diverged
    /// and keeps its last finite data and step index.
    pub fn step(&mut self, state: &mut WaveState) -> Result<()> {
        if state.diverged {
            return Err(Error::Diverged {
                step: state.step,
                t: state.t,
            });
        }
        if state.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let mut rho_old = std::mem::take(&mut self.rho_old);
        let mut rho_new = std::mem::take(&mut self.rho_new);
        let mut z_next = std::mem::take(&mut self.z_next);
        let mut v_next = std::mem::take(&mut self.v_next);
        let outcome = self.advance(state, &mut rho_old, &mut rho_new, &mut z_next, &mut v_next);
        let result = match outcome {
            Ok(true) => {
                state.zhat.slots_mut().swap_with_slice(&mut z_next);
                state.dzhat.slots_mut().swap_with_slice(&mut v_next);
                state.step += 1;
                state.t += self.tau();
                Ok(())
            }
            Ok(false) | Err(Error::NonFinite(_)) => {
                state.diverged = true;
                Ok(())
            }
            Err(e) => Err(e),
        };
        self.restore(rho_old, rho_new, z_next, v_next);
        result
    }

    fn restore(
        &mut self,
        rho_old: Vec<Complex64>,
        rho_new: Vec<Complex64>,
        z_next: Vec<Complex64>,
        v_next: Vec<Complex64>,
    ) {
        self.rho_old = rho_old;
        self.rho_new = rho_new;
        self.z_next = z_next;
        self.v_next = v_next;
    }

    /// Computes the next state into the work buffers; `Ok(false)` when it is not finite.
    fn advance(
        &mut self,
        state: &WaveState,
        rho_old: &mut [Complex64],
        rho_new: &mut [Complex64],
        z_next: &mut [Complex64],
        v_next: &mut [Complex64],
    ) -> Result<bool> {
        let z = state.zhat.slots();
        let v = state.dzhat.slots();
        let tau = self.tau();

        self.nonlinear_into(z, rho_old)?;

        let t = &self.tables;
        z_next[0] = z[0] + v[0] * tau;
        for k in 1..z.len() {
            z_next[k] = z[k] * t.cos_t[k] + v[k] * t.sinc_t[k] - rho_old[k] * t.pz[k];
        }
        if z_next.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Ok(false);
        }

        self.nonlinear_into(z_next, rho_new)?;

        let t = &self.tables;
        v_next[0] = v[0];
        for k in 1..z.len() {
            v_next[k] = v[k] * t.cos_t[k]
                - z[k] * t.dz[k]
                - rho_old[k] * t.qc[k]
                - rho_new[k] * t.qn[k];
        }
        Ok(v_next.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    /// Applies `n_steps` steps, calling each observer at step 0 and at every
    /// multiple of its stride. Stops early once the state diverges.
    pub fn evolve(
        &mut self,
        mut state: WaveState,
        n_steps: u64,
        observers: &mut [&mut dyn Observer],
    ) -> Result<WaveState> {
        let t_start = state.t;
        let step_start = state.step;
        if notify(observers, &state)? == Control::Diverged {
            state.diverged = true;
            return Ok(state);
        }
        for i in 1..=n_steps {
            self.step(&mut state)?;
            if state.diverged {
                return Ok(state);
            }
            // avoid accumulating rounding in t over long runs
            state.t = t_start + i as f64 * self.tau();
            debug_assert_eq!(state.step, step_start + i);
            if notify(observers, &state)? == Control::Diverged {
                state.diverged = true;
                return Ok(state);
            }
        }
        Ok(state)
    }
}

fn notify(observers: &mut [&mut dyn Observer], state: &WaveState) -> Result<Control> {
    let mut control = Control::Continue;
    for observer in observers.iter_mut() {
        let stride = observer.stride().max(1);
        if state.step % stride != 0 {
            continue;
        }
        match observer.observe(state) {
            Ok(Control::Diverged) => control = Control::Diverged,
            Ok(Control::Continue) => {}
            Err(e) => {
                return Err(Error::Observer {
                    step: state.step,
                    t: state.t,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(control)
}
