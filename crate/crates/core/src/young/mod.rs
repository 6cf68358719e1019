//! Young integration against grid paths and solvers for the additive-noise
//! equation `dY = f_t(Y) dt + u_t sigma dX`.

mod integral;
mod linear;
mod reduced;
mod solver;
mod trajectory;

pub use integral::{sewing_constant, young_integral, young_loeve_defect, LoeveDefect, MatrixPath};
pub use linear::{linear_solution, LinearCoefficients, Offset, Propagator};
pub use reduced::{reduce_trajectory, ReducedCoordinates};
pub use solver::{gradient_drift, solve_additive, solve_additive_observed, solve_additive_streaming, DIVERGENCE_LIMIT};
pub use trajectory::{Trajectory, TrajectoryMeta};
