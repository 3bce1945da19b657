//! Conditional expectations, representing measures for D-characters and
//! Jensen-measure checks on finite-dimensional matrix algebras.

// `!(dev <= tol)` is deliberate throughout: a NaN deviation must fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod expectations;
pub mod hoffman_rossi;
pub mod jensen;
pub mod matrix;
pub mod random;
pub mod states;
pub mod tol;

pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, LinearMap, OperatorSubspace};
