use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::roots::{self, X_TOL};

/// Shared scalar map.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Increasing,
    Decreasing,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Increasing => 1.0,
            Orientation::Decreasing => -1.0,
        }
    }

    pub fn compose(self, other: Orientation) -> Orientation {
        if self == other {
            Orientation::Increasing
        } else {
            Orientation::Decreasing
        }
    }
}

/// One strictly monotone piece `g_l: X_l -> Y_l` of a nonlinearity.
#[derive(Clone)]
pub struct Branch {
    domain: Interval,
    orientation: Orientation,
    forward: RealFn,
    derivative: RealFn,
    inverse: Option<RealFn>,
    image: Interval,
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Branch")
            .field("domain", &self.domain)
            .field("image", &self.image)
            .field("orientation", &self.orientation)
            .field("analytic_inverse", &self.inverse.is_some())
            .finish()
    }
}

impl Branch {
    /// Builds a branch whose image is computed from the limits of `forward`
    /// at the domain ends. The inverse is synthesized on demand.
    pub fn new(domain: Interval, orientation: Orientation, forward: RealFn, derivative: RealFn) -> Result<Self> {
        let at_lo = end_limit(&*forward, domain.lo, domain.interior_point());
        let at_hi = end_limit(&*forward, domain.hi, domain.interior_point());
        let image = match orientation {
            Orientation::Increasing => Interval::new(at_lo, at_hi, domain.lo_closed, domain.hi_closed),
            Orientation::Decreasing => Interval::new(at_hi, at_lo, domain.hi_closed, domain.lo_closed),
        }
        .map_err(|_| {
            Error::Validation(format!("branch on {domain} has a degenerate or misoriented image ({at_lo}, {at_hi})"))
        })?;
        Ok(Self { domain, orientation, forward, derivative, inverse: None, image })
    }

    /// Builds a branch with a known image, skipping the limit evaluation.
    pub fn from_parts(
        domain: Interval,
        orientation: Orientation,
        forward: RealFn,
        derivative: RealFn,
        image: Interval,
    ) -> Self {
        Self { domain, orientation, forward, derivative, inverse: None, image }
    }

    /// Attaches a closed-form inverse `g_l^{-1}: Y_l -> X_l`.
    pub fn with_inverse(mut self, inverse: RealFn) -> Self {
        self.inverse = Some(inverse);
        self
    }

    /// Overrides the computed image, e.g. with exact limits.
    pub fn with_image(mut self, image: Interval) -> Self {
        self.image = image;
        self
    }

    pub fn domain(&self) -> &Interval {
        &self.domain
    }

    pub fn image(&self) -> &Interval {
        &self.image
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn has_analytic_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub(crate) fn forward_fn(&self) -> RealFn {
        Arc::clone(&self.forward)
    }

    pub(crate) fn derivative_fn(&self) -> RealFn {
        Arc::clone(&self.derivative)
    }

    /// `g_l^{-1}(y)` for `y` in the closure of the image.
    pub fn inverse(&self, y: f64) -> f64 {
        self.inverse_with_tol(y, X_TOL)
    }

    pub fn inverse_with_tol(&self, y: f64, tol: f64) -> f64 {
        // Image ends map back to domain ends exactly; this matters at
        // extrema where the inverse is ill-conditioned.
        let (end_for_lo, end_for_hi) = match self.orientation {
            Orientation::Increasing => (self.domain.lo, self.domain.hi),
            Orientation::Decreasing => (self.domain.hi, self.domain.lo),
        };
        if y == self.image.lo && end_for_lo.is_finite() {
            return end_for_lo;
        }
        if y == self.image.hi && end_for_hi.is_finite() {
            return end_for_hi;
        }
        match &self.inverse {
            Some(inv) => inv(y),
            None => roots::invert_monotone(
                &*self.forward,
                Some(&*self.derivative),
                y,
                &self.domain,
                self.orientation == Orientation::Increasing,
                tol,
            ),
        }
    }

    /// Copy of this branch restricted to `sub`, which must lie inside the
    /// domain. The image is recomputed from the new ends.
    pub fn restricted(&self, sub: Interval) -> Result<Branch> {
        let mut b = Branch::new(sub, self.orientation, Arc::clone(&self.forward), Arc::clone(&self.derivative))?;
        // Keep exact limits where the restricted end is the original end.
        let (lo_src, hi_src) = match self.orientation {
            Orientation::Increasing => (sub.lo == self.domain.lo, sub.hi == self.domain.hi),
            Orientation::Decreasing => (sub.hi == self.domain.hi, sub.lo == self.domain.lo),
        };
        if lo_src {
            b.image.lo = self.image.lo;
        }
        if hi_src {
            b.image.hi = self.image.hi;
        }
        b.inverse = self.inverse.clone();
        Ok(b)
    }
}

/// Limit of `f` at a domain end. Finite ends are evaluated directly; infinite
/// ends are evaluated at infinity and, if that is undefined, probed along a
/// geometric sequence.
fn end_limit(f: &dyn Fn(f64) -> f64, end: f64, anchor: f64) -> f64 {
    let v = f(end);
    if !v.is_nan() {
        return v;
    }
    let dir = if end.is_finite() { (end - anchor).signum() } else { end.signum() };
    let mut last = f(anchor);
    for k in 1..=300 {
        let x = if end.is_finite() {
            end - dir * (end - anchor).abs() * 10f64.powi(-k)
        } else {
            anchor + dir * 10f64.powi(k)
        };
        let v = f(x);
        if v.is_nan() {
            break;
        }
        last = v;
    }
    if last.abs() > 1e250 {
        last.signum() * f64::INFINITY
    } else {
        last
    }
}
