use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("spectrum is not conjugate-symmetric: imaginary residue {residue:.3e} exceeds {tolerance:.3e}")]
    Realness { residue: f64, tolerance: f64 },

    #[error("point {x} lies outside [{a}, {b}]")]
    Domain { x: f64, a: f64, b: f64 },

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("amplitude {0} exceeds 3/2: soliton velocity would be imaginary")]
    ImaginaryVelocity(f64),

    #[error("state diverged at step {step} (t = {t})")]
    Diverged { step: u64, t: f64 },

    #[error("observer failed at step {step} (t = {t}): {message}")]
    Observer { step: u64, t: f64, message: String },

    #[error("reference integrator produced non-finite values at t = {t}; shrink tau_ref")]
    OracleUnstable { t: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
