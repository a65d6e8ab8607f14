use thiserror::Error;

/// Errors raised while building functions and densities or running the
/// numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed interval [{lo}, {hi}]: lower end must be below upper end")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown catalog function `{0}`")]
    UnknownFunction(String),

    #[error("unknown density `{0}`")]
    UnknownDensity(String),

    #[error("polynomial has an identically zero derivative; constant pieces are not piecewise strictly monotone")]
    ConstantPolynomial,

    #[error("function failed validation: {0}")]
    Validation(String),

    #[error("density support [{support_lo}, {support_hi}] is not contained in the function domain [{domain_lo}, {domain_hi}]")]
    SupportMismatch { support_lo: f64, support_hi: f64, domain_lo: f64, domain_hi: f64 },

    #[error("output density vanishes at y = {0}; the branch posterior is undefined there")]
    UndefinedConditional(f64),

    #[error("composition is not piecewise strictly monotone: {0}")]
    Composition(String),

    #[error("subdomain masses are not equal: {0}")]
    UnequalMasses(String),

    #[error("density vanishes at x = {0} inside the support")]
    InteriorZeroDensity(f64),

    #[error("Monte Carlo rejected {rejected} of {total} samples (fraction above 1e-6)")]
    TooManyRejections { rejected: u64, total: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
