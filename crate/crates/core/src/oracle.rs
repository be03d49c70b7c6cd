//! Independent reference integrator for the Fourier-mode system
//! `z_l'' = -theta_l^2 z_l - mu_l^2 rho_l`, `rho = f(z)`.
//!
//! The system is integrated directly with the classical fourth-order
//! Runge-Kutta method and tiny fixed steps. Transforms use a naive `O(M^2)`
//! DFT, so nothing here shares code with the FFT path or the exponential
//! stepper. Meant for small grids only.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{SpectrumField, TorusGrid};
use crate::stepper::{Nonlinearity, WaveState};

/// Largest grid the reference integrator accepts.
pub const MAX_REFERENCE_MODES: usize = 128;

/// Per-mode first-order view of the semi-discrete system, with its own
/// wavenumbers and a naive DFT. Vectors are indexed by `l + M/2`.
struct OdeSystemView {
    modes: usize,
    mu2: Vec<f64>,
    theta2: Vec<f64>,
    /// `exp(2 pi i k / M)` for `k = 0..M`.
    roots: Vec<Complex64>,
    f: Nonlinearity,
}

impl OdeSystemView {
    fn new(grid: TorusGrid, f: Nonlinearity) -> Self {
        let modes = grid.modes();
        let half = (modes / 2) as i64;
        let mu2: Vec<f64> = (-half..half)
            .map(|l| {
                let mu = 2.0 * PI * l as f64 / (grid.b() - grid.a());
                mu * mu
            })
            .collect();
        let theta2 = mu2.iter().map(|m2| m2 + m2 * m2).collect();
        let roots = (0..modes)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / modes as f64))
            .collect();
        Self {
            modes,
            mu2,
            theta2,
            roots,
            f,
        }
    }

    fn root(&self, l: i64, j: usize) -> Complex64 {
        let k = (l * j as i64).rem_euclid(self.modes as i64) as usize;
        self.roots[k]
    }

    fn to_nodes(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let half = (self.modes / 2) as i64;
        (0..self.modes)
            .map(|j| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c * self.root(i as i64 - half, j)).re)
                    .sum()
            })
            .collect()
    }

    fn to_coeffs(&self, values: &[f64]) -> Vec<Complex64> {
        let half = (self.modes / 2) as i64;
        let norm = 1.0 / self.modes as f64;
        (0..self.modes)
            .map(|i| {
                let l = i as i64 - half;
                values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| self.root(l, j).conj() * *v)
                    .sum::<Complex64>()
                    * norm
            })
            .collect()
    }

    /// `(dz, dv) = (v, -theta^2 z - mu^2 rho(z))`.
    fn rhs(&self, z: &[Complex64], v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let nodal: Vec<f64> = self.to_nodes(z).into_iter().map(|x| self.f.apply(x)).collect();
        let rho = self.to_coeffs(&nodal);
        let dv = (0..self.modes)
            .map(|i| -z[i] * self.theta2[i] - rho[i] * self.mu2[i])
            .collect();
        (v.to_vec(), dv)
    }
}

fn axpy(y: &[Complex64], a: f64, x: &[Complex64]) -> Vec<Complex64> {
    y.iter().zip(x).map(|(y, x)| y + x * a).collect()
}

fn signed_coeffs(spectrum: &SpectrumField) -> Vec<Complex64> {
    spectrum.modes().map(|(_, c)| c).collect()
}

/// Integrates `initial` to time `initial.t() + t_span` with RK4 steps of `tau_ref`.
pub fn reference_evolve(
    initial: &WaveState,
    tau_ref: f64,
    t_span: f64,
    f: Nonlinearity,
) -> Result<WaveState> {
    let grid = initial.grid();
    if grid.modes() > MAX_REFERENCE_MODES {
        return Err(Error::Parameter(format!(
            "reference integrator is limited to M <= {MAX_REFERENCE_MODES}, got {}",
            grid.modes()
        )));
    }
    if !(tau_ref > 0.0) || !(t_span >= 0.0) {
        return Err(Error::Parameter(format!(
            "need tau_ref > 0 and T >= 0, got tau_ref = {tau_ref}, T = {t_span}"
        )));
    }
    let ratio = t_span / tau_ref;
    let n_steps = ratio.round();
    if (ratio - n_steps).abs() > 1e-6 {
        return Err(Error::Parameter(format!(
            "T = {t_span} is not a multiple of tau_ref = {tau_ref}"
        )));
    }
    let n_steps = n_steps as u64;

    let system = OdeSystemView::new(grid, f);
    let mut z = signed_coeffs(initial.zhat());
    let mut v = signed_coeffs(initial.dzhat());
    let h = tau_ref;
    for n in 0..n_steps {
        let (k1z, k1v) = system.rhs(&z, &v);
        let (k2z, k2v) = system.rhs(&axpy(&z, h / 2.0, &k1z), &axpy(&v, h / 2.0, &k1v));
        let (k3z, k3v) = system.rhs(&axpy(&z, h / 2.0, &k2z), &axpy(&v, h / 2.0, &k2v));
        let (k4z, k4v) = system.rhs(&axpy(&z, h, &k3z), &axpy(&v, h, &k3v));
        for i in 0..z.len() {
            z[i] += (k1z[i] + (k2z[i] + k3z[i]) * 2.0 + k4z[i]) * (h / 6.0);
            v[i] += (k1v[i] + (k2v[i] + k3v[i]) * 2.0 + k4v[i]) * (h / 6.0);
        }
        if z.iter().chain(&v).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::OracleUnstable {
                t: initial.t() + (n + 1) as f64 * h,
            });
        }
    }
    let half = (grid.modes() / 2) as i64;
    let zhat = SpectrumField::from_modes(grid, z.into_iter().enumerate().map(|(i, c)| (i as i64 - half, c)))?;
    let dzhat = SpectrumField::from_modes(grid, v.into_iter().enumerate().map(|(i, c)| (i as i64 - half, c)))?;
    WaveState::new(initial.t() + t_span, zhat, dzhat)
}

/// Writes `l re im` per line, increasing `l`, 17 significant digits.
pub fn write_coefficients(spectrum: &SpectrumField) -> String {
    let mut out = String::new();
    for (l, c) in spectrum.modes() {
        let _ = writeln!(out, "{l} {:.16e} {:.16e}", c.re, c.im);
    }
    out
}

/// Parses the output of [`write_coefficients`] for `grid`.
pub fn read_coefficients(grid: TorusGrid, text: &str) -> Result<SpectrumField> {
    let mut spectrum = SpectrumField::zeros(grid);
    let mut seen = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parameter(format!("coefficient file line {}: `{line}`", lineno + 1));
        let mut parts = line.split_whitespace();
        let l: i64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let re: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let im: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        spectrum.set(l, Complex64::new(re, im))?;
        seen += 1;
    }
    if seen != grid.modes() {
        return Err(Error::Parameter(format!(
            "coefficient file lists {seen} modes, grid has {}",
            grid.modes()
        )));
    }
    Ok(spectrum)
}
