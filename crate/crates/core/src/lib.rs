//! Isolated singular solutions of `-Δu + μ|x|⁻²u = u^p` in the punctured
//! unit ball: radial discretization, monotone iteration, extremal amplitude,
//! stability, mountain-pass second solutions and singularity classification.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
mod eigen;
pub mod error;
pub mod extremal;
pub mod grid;
pub mod hardy;
pub mod linear;
pub mod mountain_pass;
pub mod nonlinear;
pub mod stability;
mod tridiag;

pub use error::{HslError, Result};
pub use grid::{apply_l, apply_l_star, build_grid, integrate_dmu, GridFunction, RadialGrid};
pub use hardy::{critical_mu, gamma, measure_weight, phi, spectral_constants, HardyParams, SpectralConstants};
pub use linear::{check_barrier_bounds, integrability_scan, solve_linear, BarrierRegime, LinearProblem, LinearSolver};
pub use nonlinear::{minimal_solution, IterationOptions, IterationReport, IterationStatus};
