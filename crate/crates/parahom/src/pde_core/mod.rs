//! Periodic grids, the monotone explicit stepper, slow solvers and decay fits.

mod fit;
mod grid;
pub mod io;
mod slow;
mod slowdiff;
mod stepper;

pub use fit::{decay_fit, linear_fit, oscillation, DecayFit};
pub use grid::{FastField, SlowField, SlowGrid, TorusGrid};
pub use slow::{solve_slow_cauchy, solve_slow_cauchy_with, solve_slow_richardson, SlowProblem};
pub use slowdiff::{bounded_weights, fornberg, periodic_interp, periodic_interp_weights, PeriodicDiff};
pub use stepper::{
    discrete_hessian, monotone_step, slow_hessian, solve_fast_cauchy, step_lattice, FastSource, LatticeOp,
    LinearLattice,
};
