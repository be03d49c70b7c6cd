//! Periodic grid, discrete Fourier transforms and trigonometric interpolation.
//!
//! Coefficients are exposed through the signed mode index `l = -M/2..M/2-1`
//! with the `1/M` normalisation on the forward transform:
//!
//! ```text
//! c_l = (1/M) sum_j v_j exp(-i mu_l (x_j - a)),    v_j = sum_l c_l exp(i mu_l (x_j - a))
//! ```
//!
//! Internally the coefficients are stored in the transform library's natural
//! `0..M` order; `TorusGrid::slot` is the bijection `l -> l mod M`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Maximum imaginary residue of an inverse transform, relative to the field scale.
pub const REALNESS_TOLERANCE: f64 = 1e-12;

/// Equispaced periodic grid on `[a, b)` with `M` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    a: f64,
    b: f64,
    modes: usize,
}

impl TorusGrid {
    pub fn new(a: f64, b: f64, modes: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || b <= a {
            return Err(Error::Parameter(format!(
                "domain [{a}, {b}] must be finite with b > a"
            )));
        }
        if modes < 4 || modes % 2 != 0 {
            return Err(Error::Parameter(format!(
                "mode count M = {modes} must be even and at least 4"
            )));
        }
        Ok(Self { a, b, modes })
    }

    /// Builds the grid whose mesh size is `h`; `(b - a) / h` must be an even integer.
    pub fn with_mesh_size(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Parameter(format!("mesh size h = {h} must be positive")));
        }
        let ratio = (b - a) / h;
        let modes = ratio.round();
        if (ratio - modes).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Parameter(format!(
                "mesh size h = {h} does not divide the domain width {}",
                b - a
            )));
        }
        Self::new(a, b, modes as usize)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of nodes (and of Fourier modes), `M`.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        self.width() / self.modes as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.modes).map(|j| self.node(j)).collect()
    }

    /// Signed mode indices `-M/2..M/2`.
    pub fn mode_range(&self) -> Range<i64> {
        let half = (self.modes / 2) as i64;
        -half..half
    }

    /// Storage slot of signed mode `l`.
    pub fn slot(&self, l: i64) -> usize {
        l.rem_euclid(self.modes as i64) as usize
    }

    /// Signed mode stored at `slot`; slot `M/2` holds the Nyquist mode `-M/2`.
    pub fn mode_at(&self, slot: usize) -> i64 {
        if slot < self.modes / 2 {
            slot as i64
        } else {
            slot as i64 - self.modes as i64
        }
    }

    /// `mu_l = 2 pi l / (b - a)`.
    pub fn wavenumber(&self, l: i64) -> f64 {
        2.0 * PI * l as f64 / self.width()
    }

    pub fn symbols(&self) -> SymbolTable {
        SymbolTable::new(*self)
    }
}

/// Per-mode wavenumbers `mu_l` and linear frequencies `theta_l = sqrt(mu_l^2 + mu_l^4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    grid: TorusGrid,
    mu: Vec<f64>,
    theta: Vec<f64>,
}

impl SymbolTable {
    pub fn new(grid: TorusGrid) -> Self {
        let mu: Vec<f64> = (0..grid.modes())
            .map(|k| grid.wavenumber(grid.mode_at(k)))
            .collect();
        // |mu| sqrt(1 + mu^2) keeps theta_0 exactly zero and avoids cancellation
        let theta = mu.iter().map(|m| m.abs() * (1.0 + m * m).sqrt()).collect();
        Self { grid, mu, theta }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn mu(&self, l: i64) -> f64 {
        self.mu[self.grid.slot(l)]
    }

    pub fn theta(&self, l: i64) -> f64 {
        self.theta[self.grid.slot(l)]
    }

    pub(crate) fn mu_slots(&self) -> &[f64] {
        &self.mu
    }

    pub(crate) fn theta_slots(&self) -> &[f64] {
        &self.theta
    }
}

/// Real nodal values `v_j`, `j = 0..M`; `v_M = v_0` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.modes() {
            return Err(Error::Parameter(format!(
                "expected {} nodal values, got {}",
                grid.modes(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(grid: TorusGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.modes()).map(|j| f(grid.node(j))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.modes()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Fourier coefficients `c_l` of a field, indexed by signed mode `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectrumField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.modes()],
        }
    }

    /// Builds a spectrum from `(l, c_l)` pairs; unlisted modes are zero.
    pub fn from_modes(
        grid: TorusGrid,
        modes: impl IntoIterator<Item = (i64, Complex64)>,
    ) -> Result<Self> {
        let mut spectrum = Self::zeros(grid);
        for (l, c) in modes {
            spectrum.set(l, c)?;
        }
        Ok(spectrum)
    }

    pub(crate) fn from_slots(grid: TorusGrid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.modes());
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn check_mode(&self, l: i64) -> Result<usize> {
        if self.grid.mode_range().contains(&l) {
            Ok(self.grid.slot(l))
        } else {
            Err(Error::Parameter(format!(
                "mode {l} outside {:?}",
                self.grid.mode_range()
            )))
        }
    }

    /// Coefficient of mode `l`. Panics if `l` is outside `-M/2..M/2`.
    pub fn get(&self, l: i64) -> Complex64 {
        let slot = self
            .check_mode(l)
            .unwrap_or_else(|e| panic!("SpectrumField::get: {e}"));
        self.coeffs[slot]
    }

    pub fn set(&mut self, l: i64, c: Complex64) -> Result<()> {
        let slot = self.check_mode(l)?;
        self.coeffs[slot] = c;
        Ok(())
    }

    /// `(l, c_l)` in increasing `l`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.grid.mode_range().map(move |l| (l, self.coeffs[self.grid.slot(l)]))
    }

    pub(crate) fn slots(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn slots_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.norm()))
    }

    /// Largest violation of the real-field symmetry `c_{-l} = conj(c_l)`,
    /// including the imaginary parts of `c_0` and the Nyquist coefficient.
    pub fn conjugate_symmetry_residue(&self) -> f64 {
        let half = (self.grid.modes() / 2) as i64;
        let mut residue = self.get(0).im.abs().max(self.get(-half).im.abs());
        for l in 1..half {
            residue = residue.max((self.get(-l) - self.get(l).conj()).norm());
        }
        residue
    }

    pub fn scale(&mut self, factor: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &SpectrumField) -> Result<SpectrumField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(u, v)| u + v * factor)
            .collect();
        Ok(Self::from_slots(self.grid, coeffs))
    }

    /// Zeroes every mode with `|l| > M/3` (2/3-rule de-aliasing).
    pub fn truncate_two_thirds(&mut self) {
        let cutoff = self.grid.modes() as i64 / 3;
        for k in 0..self.coeffs.len() {
            if self.grid.mode_at(k).abs() > cutoff {
                self.coeffs[k] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Cached forward/inverse transform plans for one grid.
///
/// A `Fourier` owns scratch buffers, so each simulation context keeps its own.
#[derive(Clone)]
pub struct Fourier {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.modes());
        let inverse = planner.plan_fft_inverse(grid.modes());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            buffer: vec![Complex64::new(0.0, 0.0); grid.modes()],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn forward(&mut self, field: &NodalField) -> Result<SpectrumField> {
        if field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.grid.modes()];
        self.forward_into(field.values(), &mut coeffs)?;
        Ok(SpectrumField::from_slots(self.grid, coeffs))
    }

    pub fn inverse(&mut self, spectrum: &SpectrumField) -> Result<NodalField> {
        if spectrum.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut values = vec![0.0; self.grid.modes()];
        self.inverse_into(spectrum.slots(), &mut values)?;
        Ok(NodalField {
            grid: self.grid,
            values,
        })
    }

    /// Forward transform of real nodal values into slot-ordered coefficients.
    pub(crate) fn forward_into(&mut self, values: &[f64], out: &mut [Complex64]) -> Result<()> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nodal field"));
        }
        let norm = 1.0 / self.grid.modes() as f64;
        for (o, &v) in out.iter_mut().zip(values) {
            *o = Complex64::new(v, 0.0);
        }
        self.forward.process_with_scratch(out, &mut self.scratch);
        out.iter_mut().for_each(|c| *c *= norm);
        hermitian_projection(out);
        Ok(())
    }

    /// Inverse transform of slot-ordered coefficients, discarding the imaginary
    /// residue after checking it against `REALNESS_TOLERANCE`.
    pub(crate) fn inverse_into(&mut self, coeffs: &[Complex64], out: &mut [f64]) -> Result<()> {
        self.buffer.copy_from_slice(coeffs);
        self.inverse
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let mut residue: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (o, c) in out.iter_mut().zip(&self.buffer) {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite("spectrum"));
            }
            residue = residue.max(c.im.abs());
            scale = scale.max(c.re.abs().max(c.im.abs()));
            *o = c.re;
        }
        let tolerance = REALNESS_TOLERANCE * scale;
        if residue > tolerance {
            return Err(Error::Realness { residue, tolerance });
        }
        Ok(())
    }
}


/// Makes slot-ordered coefficients of real data exactly Hermitian.
///
/// The stepper's weights are real and even in `l`, so an exactly Hermitian
/// input stays exactly Hermitian step after step; FFT round-off would
/// otherwise accumulate in fields much smaller than the nonlinear term.
fn hermitian_projection(coeffs: &mut [Complex64]) {
    let m = coeffs.len();
    for l in 1..m / 2 {
        let mean = 0.5 * (coeffs[l] + coeffs[m - l].conj());
        coeffs[l] = mean;
        coeffs[m - l] = mean.conj();
    }
    coeffs[0].im = 0.0;
    coeffs[m / 2].im = 0.0;
}

/// One-shot forward transform (plans a transform for the call).
pub fn forward_dft(field: &NodalField) -> Result<SpectrumField> {
    Fourier::new(field.grid()).forward(field)
}

/// One-shot inverse transform (plans a transform for the call).
pub fn inverse_dft(spectrum: &SpectrumField) -> Result<NodalField> {
    Fourier::new(spectrum.grid()).inverse(spectrum)
}

/// Evaluates the trigonometric interpolant `sum_l c_l exp(i mu_l (x - a))` at `x`
/// and returns its real part.
pub fn evaluate_interpolant(spectrum: &SpectrumField, x: f64) -> Result<f64> {
    let grid = spectrum.grid();
    if !(x >= grid.a() && x <= grid.b()) {
        return Err(Error::Domain {
            x,
            a: grid.a(),
            b: grid.b(),
        });
    }
    let offset = x - grid.a();
    Ok(spectrum
        .modes()
        .map(|(l, c)| {
            let phase = grid.wavenumber(l) * offset;
            c.re * phase.cos() - c.im * phase.sin()
        })
        .sum())
}
