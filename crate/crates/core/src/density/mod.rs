//! Input densities and their push-forwards through piecewise monotone maps.

mod builtin;
mod pushforward;

use rand::RngCore;
use std::fmt;

use crate::interval::Interval;

pub use builtin::{builtin, normal, uniform, uniform_on, BuiltinDensity, Normal, TableDensity, Uniform};
pub(crate) use pushforward::{output_cdf, DERIVATIVE_FLOOR};
pub use pushforward::{pushforward, PushforwardDensity};

/// Default tail mass dropped by [`truncated_support`].
pub const DEFAULT_MASS_EPS: f64 = 1e-9;

/// A continuous univariate distribution.
///
/// Implementations are immutable; sampling takes the random source
/// explicitly so parallel callers can use independent streams.
pub trait Density: Send + Sync + fmt::Debug {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;
    fn support(&self) -> Interval;

    /// `x` with `P(X > x) = q`. Overridden where `quantile(1 - q)` would
    /// lose the relative precision of a small `q`.
    fn upper_quantile(&self, q: f64) -> f64 {
        self.quantile(1.0 - q)
    }

    /// Points where the pdf is not smooth (kinks, jumps, integrable
    /// singularities). Quadrature splits there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Draws one value; the default inverts the CDF.
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.quantile(open_unit(rng))
    }
}

/// Uniform draw in the open interval `(0, 1)` with 53 random bits.
pub fn open_unit(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `[quantile(eps/2), quantile(1 - eps/2)]`, keeping finite support ends as
/// they are. Compactly supported densities come back unchanged.
pub fn truncated_support(d: &dyn Density, mass_eps: f64) -> Interval {
    let s = d.support();
    if s.is_bounded() {
        return s;
    }
    let lo = if s.lo.is_finite() { s.lo } else { d.quantile(0.5 * mass_eps) };
    let hi = if s.hi.is_finite() { s.hi } else { d.upper_quantile(0.5 * mass_eps) };
    Interval::closed(lo, hi).unwrap_or(s)
}
