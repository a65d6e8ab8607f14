//! Information loss of continuous random variables passed through piecewise
//! strictly monotone memoryless maps.
//!
//! Entropies are in bits throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod density;
pub mod error;
pub mod estimators;
pub mod function_model;
pub mod interval;
pub mod loss;
pub mod quadrature;
pub mod roots;
pub mod tight;

pub use error::{Error, Result};
pub use interval::Interval;
