//! Minimax (worst-case optimal) state estimation for linear descriptor
//! systems.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuous;
pub mod discrete_dae;
pub mod error;
pub mod filter;
pub mod linalg;
pub mod oracle;
pub mod simulate;
pub mod static_estimation;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use nalgebra;
