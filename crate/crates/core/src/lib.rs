//! Radial Keller-Segel model with singular sensitivity: solvers for the
//! transformed, limit and original systems, the logarithmic transform, the
//! vanishing-diffusion boundary-layer analysis and a Gronwall-type lemma checker.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod colehopf;
pub mod error;
pub mod grid;
pub mod gronwall;
pub mod harness;
pub mod io;
pub mod model;
pub mod operators;
pub mod solver;
pub mod trajectory;
pub mod tridiag;

pub use error::{KsError, Result};
pub use grid::{GridKind, GridSpec, RadialGrid, ScalarField};
pub use model::{ModelParams, Preset};
pub use solver::{solve, InitialData, StepControls};
pub use trajectory::{SolveKind, Trajectory};
