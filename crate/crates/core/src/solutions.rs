//! Closed-form solitons and the initial-data families used by the experiments.
//!
//! The travelling wave of `z_tt - z_xx + z_xxxx - (z^2)_xx = 0` is
//!
//! ```text
//! z(x, t) = -A sech^2( sqrt(A/6) (x - v t - x0) ),   v = +-sqrt(1 - 2A/3)
//! ```

use crate::error::{Error, Result};
use crate::spectral::{NodalField, TorusGrid};

/// Direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// How a soliton's initial velocity is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    /// Velocity from the travelling-wave relation.
    Traveling(Sign),
    /// Zero initial velocity field, whatever the amplitude.
    Static,
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::Parameter(format!(
            "soliton amplitude {amplitude} must be positive"
        )));
    }
    Ok(())
}

/// `sign * sqrt(1 - 2A/3)`.
pub fn soliton_velocity(amplitude: f64, sign: Sign) -> Result<f64> {
    check_amplitude(amplitude)?;
    let radicand = 1.0 - 2.0 * amplitude / 3.0;
    if radicand < 0.0 {
        return Err(Error::ImaginaryVelocity(amplitude));
    }
    Ok(sign.value() * radicand.sqrt())
}

/// Amplitude, initial position and velocity of one soliton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    amplitude: f64,
    x0: f64,
    velocity: f64,
}

impl SolitonParams {
    /// Travelling soliton; the velocity follows from the amplitude.
    pub fn traveling(amplitude: f64, x0: f64, sign: Sign) -> Result<Self> {
        let velocity = soliton_velocity(amplitude, sign)?;
        Ok(Self {
            amplitude,
            x0,
            velocity,
        })
    }

    /// Pulse with the soliton profile and zero velocity.
    pub fn at_rest(amplitude: f64, x0: f64) -> Result<Self> {
        check_amplitude(amplitude)?;
        Ok(Self {
            amplitude,
            x0,
            velocity: 0.0,
        })
    }

    pub fn new(amplitude: f64, x0: f64, motion: Motion) -> Result<Self> {
        match motion {
            Motion::Traveling(sign) => Self::traveling(amplitude, x0, sign),
            Motion::Static => Self::at_rest(amplitude, x0),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// `sqrt(A/6)`, the inverse width of the profile.
    fn steepness(&self) -> f64 {
        (self.amplitude / 6.0).sqrt()
    }

    /// True when the closed form solves the equation (travelling-wave velocity).
    pub fn is_exact(&self) -> bool {
        let radicand = 1.0 - 2.0 * self.amplitude / 3.0;
        radicand >= 0.0 && (self.velocity.abs() - radicand.sqrt()).abs() <= 1e-15
    }
}

fn sech2(x: f64) -> f64 {
    let s = 1.0 / x.cosh();
    s * s
}

/// `-A sech^2(sqrt(A/6) (x - v t - x0))`.
pub fn soliton(x: f64, t: f64, p: &SolitonParams) -> f64 {
    let xi = p.steepness() * (x - p.velocity * t - p.x0);
    -p.amplitude * sech2(xi)
}

/// Time derivative of [`soliton`]: `-A v sqrt(2A/3) sech^2(xi) tanh(xi)`.
pub fn soliton_time_derivative(x: f64, t: f64, p: &SolitonParams) -> f64 {
    let xi = p.steepness() * (x - p.velocity * t - p.x0);
    -p.amplitude * p.velocity * (2.0 * p.amplitude / 3.0).sqrt() * sech2(xi) * xi.tanh()
}

/// Nodal samples of `z(., 0)` and `dz/dt(., 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub z0: NodalField,
    pub z1: NodalField,
    pub label: String,
}

/// One soliton of an initial-data family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonSpec {
    pub amplitude: f64,
    pub center: f64,
    pub motion: Motion,
}

impl SolitonSpec {
    pub fn new(amplitude: f64, center: f64, motion: Motion) -> Self {
        Self {
            amplitude,
            center,
            motion,
        }
    }

    pub fn params(&self) -> Result<SolitonParams> {
        SolitonParams::new(self.amplitude, self.center, self.motion)
    }
}

/// Single soliton (travelling) or soliton-shaped pulse at rest.
pub fn initial_single(
    grid: TorusGrid,
    amplitude: f64,
    x0: f64,
    motion: Motion,
) -> Result<InitialData> {
    let p = SolitonParams::new(amplitude, x0, motion)?;
    let label = match motion {
        Motion::Traveling(sign) => format!("single A={amplitude} x0={x0} v={:+}", sign.value()),
        Motion::Static => format!("single A={amplitude} x0={x0} static"),
    };
    Ok(InitialData {
        z0: NodalField::sample(grid, |x| soliton(x, 0.0, &p)),
        z1: NodalField::sample(grid, |x| soliton_time_derivative(x, 0.0, &p)),
        label,
    })
}

/// Superposition of two single-soliton data sets. A zero amplitude drops
/// that soliton.
pub fn initial_pair(grid: TorusGrid, first: SolitonSpec, second: SolitonSpec) -> Result<InitialData> {
    let mut params = Vec::with_capacity(2);
    for spec in [first, second] {
        if spec.amplitude != 0.0 {
            params.push(spec.params()?);
        }
    }
    let z0 = NodalField::sample(grid, |x| params.iter().map(|p| soliton(x, 0.0, p)).sum());
    let z1 = NodalField::sample(grid, |x| {
        params.iter().map(|p| soliton_time_derivative(x, 0.0, p)).sum()
    });
    Ok(InitialData {
        z0,
        z1,
        label: format!(
            "pair A1={} x1={} A2={} x2={}",
            first.amplitude, first.center, second.amplitude, second.center
        ),
    })
}
