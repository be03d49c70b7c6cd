//! Fourier pseudospectral exponential integrator for the Good Boussinesq
//! equation `z_tt - z_xx + z_xxxx - (f(z))_xx = 0` on a periodic interval.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: grids, nodal and spectral fields, transforms.
//! * [`stepper`]: the two-stage exponential integrator and its driver.
//! * [`solutions`]: closed-form solitons and initial-data families.
//! * [`diagnostics`]: Sobolev errors, mass, blow-up detection, order fits.
//! * [`oracle`]: an independent reference integrator for small grids.
//! * [`config`]: experiment configuration and presets.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod oracle;
pub mod solutions;
pub mod spectral;
pub mod stepper;

pub use config::{parse_config, preset_case, ConfigError, ExperimentConfig, InitialSpec};
pub use diagnostics::{
    error_pair, error_reports, fit_order, mass, sobolev_norm, BlowupDetector, BlowupPolicy,
    BlowupRecord, ErrorReport, ExactSolution, OrderFit,
};
pub use error::{Error, Result};
pub use solutions::{
    initial_pair, initial_single, soliton, soliton_time_derivative, soliton_velocity, InitialData,
    Motion, Sign, SolitonParams, SolitonSpec,
};
pub use spectral::{Fourier, NodalField, SpectrumField, SymbolTable, TorusGrid};
pub use stepper::{Control, DeiFp, Nonlinearity, Observer, StepperCoefficients, WaveState};
