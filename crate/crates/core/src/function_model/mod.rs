//! Piecewise strictly monotone functions: branches, validation, preimages
//! and constructors.

mod branch;
mod catalog;
mod polynomial;
mod pwm;

pub use branch::{Branch, Orientation, RealFn};
pub use catalog::{affine_on, catalog, cosine, cubic, identity, identity_on, magnitude, sqlin, CATALOG_NAMES};
pub use polynomial::{from_pieces, from_polynomial, Polynomial};
pub use pwm::{Check, PreimageSet, PwmFunction, Root, ValidationReport, DEFAULT_VALIDATION_GRID};
