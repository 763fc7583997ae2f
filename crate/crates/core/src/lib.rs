//! Operator-tuple toolkit.
//!
//! The central quantity is the distance of a tuple `A = (A_1, .., A_d)` to the
//! scalar tuples `C^d I` in the norm `‖Σ A_j^* A_j‖^{1/2}`. It is bounded below
//! by the largest variance over unit vectors; `verify` checks that bound and
//! its equality cases with certificates from `geometry`.

pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod parallel;
pub mod random;
pub mod solvers;
pub mod tuple;
pub mod verify;

pub use error::{OtkError, Result};
pub use linalg::ComplexMatrix;
