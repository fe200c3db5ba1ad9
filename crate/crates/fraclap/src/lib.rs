//! Numerical toolkit for the fractional Laplacian defined by its
//! principal-value kernel integral: pointwise evaluation, discrete assembly
//! with exterior-zero data, semilinear exterior-Dirichlet solves, the
//! degenerate-extension cross-check, barrier constructions, and the
//! blow-up/rescaling experiment harness.

pub mod barrier;
pub mod blowup;
pub mod domain;
pub mod config;
pub mod error;
pub mod extension;
pub mod field;
pub mod solver;
pub mod grid;
pub mod io;
pub mod operator;
pub mod params;
pub mod runs;
pub mod quad;

pub use error::{FracError, Result};
pub use field::{scaling_pushforward, FieldFn, GrowthClass};
pub use grid::{Grid, GridFunction};
pub use operator::{
    assemble_discrete, eval_point_pv, tail_weight, DiscreteOperator, PointEval, QuadConfig,
};
pub use params::{kappa_constant, normalization_constant, trace_constant, FracParams};
