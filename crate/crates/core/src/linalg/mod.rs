//! Dense complex linear algebra and convex-geometry primitives.

pub mod eig;
pub mod hull;
pub mod kron;
pub mod matrix;
pub mod miniball;

pub use eig::{hermitian_eig, EigenDecomposition, TOL_EIG};
pub use hull::{hull_distance, HullDistance};
pub use kron::{kron, DEFAULT_DIM_CAP};
pub use matrix::ComplexMatrix;
pub use miniball::{smallest_enclosing_ball, Ball};
