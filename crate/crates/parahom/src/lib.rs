//! Numerical toolkit for higher-order periodic homogenization of fully
//! nonlinear parabolic Cauchy problems with oscillatory initial data.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cell;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod initial_layer;
pub mod interior;
pub mod operator;
pub mod pde_core;
pub mod twoscale;

pub use error::{Error, Result};
