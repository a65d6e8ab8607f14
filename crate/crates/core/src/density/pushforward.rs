use rand::RngCore;
use std::sync::Arc;

use super::Density;
use crate::error::{Error, Result};
use crate::function_model::{Branch, Orientation, PwmFunction};
use crate::interval::Interval;
use crate::roots::{self, X_TOL};

/// Floor on `|g'|` when dividing, so extremum images stay finite.
pub(crate) const DERIVATIVE_FLOOR: f64 = 1e-300;

/// Density of `Y = g(X)`.
///
/// The CDF is assembled branch by branch from the source CDF evaluated at
/// branch inverses, so it is exact up to inversion tolerance.
#[derive(Debug, Clone)]
pub struct PushforwardDensity {
    source: Arc<dyn Density>,
    func: Arc<PwmFunction>,
    support: Interval,
    breakpoints: Vec<f64>,
}

/// Builds `f_Y` for `Y = f(X)`, `X ~ d`. The support of `d` must lie in the
/// domain of `f`.
pub fn pushforward(f: Arc<PwmFunction>, d: Arc<dyn Density>) -> Result<PushforwardDensity> {
    let s = d.support();
    if !f.domain_covers(&s) || !f.domain_hull().covers(&s) {
        let h = f.domain_hull();
        return Err(Error::SupportMismatch { support_lo: s.lo, support_hi: s.hi, domain_lo: h.lo, domain_hi: h.hi });
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut breakpoints = Vec::new();
    for b in f.branches() {
        let Some(sub) = b.domain().intersect(&s) else { continue };
        let (a, c) = branch_range(b, &sub);
        lo = lo.min(a);
        hi = hi.max(c);
        breakpoints.extend([a, c].into_iter().filter(|v| v.is_finite()));
    }
    for x in d.breakpoints() {
        if let Some(y) = f.eval(x) {
            breakpoints.push(y);
        }
    }
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let support =
        Interval::closed(lo, hi).map_err(|_| Error::Validation("push-forward has a degenerate support".into()))?;
    Ok(PushforwardDensity { source: d, func: f, support, breakpoints })
}

/// Range of `b` over `sub`, a positive-length piece of its domain. Ends that
/// coincide with the domain ends use the exact image limits.
fn branch_range(b: &Branch, sub: &Interval) -> (f64, f64) {
    let dom = b.domain();
    let img = b.image();
    let at = |x: f64, is_lo: bool| {
        let same = if is_lo { x == dom.lo } else { x == dom.hi };
        if same {
            match (b.orientation(), is_lo) {
                (Orientation::Increasing, true) | (Orientation::Decreasing, false) => img.lo,
                _ => img.hi,
            }
        } else {
            b.forward(x)
        }
    };
    let (ya, yb) = (at(sub.lo, true), at(sub.hi, false));
    (ya.min(yb), ya.max(yb))
}

impl PushforwardDensity {
    pub fn source(&self) -> &Arc<dyn Density> {
        &self.source
    }

    pub fn function(&self) -> &Arc<PwmFunction> {
        &self.func
    }
}

/// `P(g(X) <= y, X in branch b)`, exact up to the inversion tolerance.
fn branch_mass_below(b: &Branch, d: &dyn Density, y: f64) -> f64 {
    let dom = b.domain();
    let img = b.image();
    if y <= img.lo {
        return 0.0;
    }
    if y >= img.hi {
        return (d.cdf(dom.hi) - d.cdf(dom.lo)).max(0.0);
    }
    let x = b.inverse_with_tol(y, X_TOL);
    match b.orientation() {
        Orientation::Increasing => (d.cdf(x) - d.cdf(dom.lo)).max(0.0),
        Orientation::Decreasing => (d.cdf(dom.hi) - d.cdf(x)).max(0.0),
    }
}

/// `P(g(X) <= y)`.
pub(crate) fn output_cdf(f: &PwmFunction, d: &dyn Density, y: f64) -> f64 {
    let total: f64 = f.branches().iter().map(|b| branch_mass_below(b, d, y)).sum();
    total.clamp(0.0, 1.0)
}

impl Density for PushforwardDensity {
    fn pdf(&self, y: f64) -> f64 {
        let mut total = 0.0;
        self.func.for_each_root(y, X_TOL, |i, x| {
            let slope = self.func.branches()[i].derivative(x).abs().max(DERIVATIVE_FLOOR);
            total += self.source.pdf(x) / slope;
        });
        total
    }

    fn cdf(&self, y: f64) -> f64 {
        if y < self.support.lo {
            return 0.0;
        }
        if y >= self.support.hi {
            return 1.0;
        }
        output_cdf(&self.func, &*self.source, y)
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.support.lo;
        }
        if p >= 1.0 {
            return self.support.hi;
        }
        let cdf = |y: f64| self.cdf(y);
        roots::invert_monotone(&cdf, None, p, &self.support, true, X_TOL)
    }

    fn support(&self) -> Interval {
        self.support
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let x = self.source.sample(rng);
        match self.func.eval(x) {
            Some(y) => y,
            // Only reachable at an excluded domain end; use the closure.
            None => {
                let i = self.func.branches().partition_point(|b| b.domain().hi < x).min(self.func.branch_count() - 1);
                self.func.branches()[i].forward(x)
            }
        }
    }
}
