//! Rothe-method solvers for the semilinear stochastic heat equation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linear;
pub mod noise;
pub mod quadrature;
pub mod sine;
pub mod spectral;
pub mod tridiag;
pub mod wavelet;

pub use error::{Result, SheqError};
