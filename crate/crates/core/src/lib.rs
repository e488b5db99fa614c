//! Online policy iteration with robust redesign for uncertain nonlinear plants.
// `!(a > b)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backstep;
pub mod basis;
pub mod dynsys;
pub mod error;
pub mod experiments;
pub mod harness;
pub mod linear;
pub mod lstsq;
pub mod online_pi;
pub mod pi_oracle;
pub mod robust;
pub mod sampling;

pub use basis::{homogeneous_basis, make_polynomial_basis, Approximant, BasisSet, MultiIndex};
pub use error::{Error, Result};
