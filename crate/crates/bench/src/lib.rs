//! Fixtures shared by the benchmarks.

use gbdei_core::{initial_single, DeiFp, Fourier, Motion, Nonlinearity, Sign, TorusGrid, WaveState};

/// Stepper and single-soliton state on `[-L/2, L/2)` with `modes` nodes.
pub fn soliton_setup(length: f64, modes: usize, tau: f64) -> (DeiFp, WaveState, Fourier) {
    let grid = TorusGrid::new(-length / 2.0, length / 2.0, modes).expect("valid grid");
    let data = initial_single(grid, 0.375, 0.0, Motion::Traveling(Sign::Plus)).expect("valid soliton");
    let mut fourier = Fourier::new(grid);
    let state = WaveState::from_nodal(0.0, &data.z0, &data.z1, &mut fourier).expect("finite data");
    let stepper = DeiFp::new(grid, tau, Nonlinearity::quadratic()).expect("valid step");
    (stepper, state, fourier)
}
