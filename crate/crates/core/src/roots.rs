//! Bracketed inversion of strictly monotone scalar maps.
//!
//! The solver keeps a sign-change bracket at all times. When a derivative is
//! available it takes Newton steps that stay inside the bracket and fall back
//! to bisection otherwise, so it never does worse than plain bisection.

use crate::interval::Interval;

/// Iteration cap for every inversion.
pub const MAX_ITER: usize = 200;

/// Default relative x-tolerance.
pub const X_TOL: f64 = 1e-12;

/// Solves `forward(x) = y` for `x` in `domain`, where `forward` is strictly
/// increasing (`increasing = true`) or strictly decreasing on `domain`.
///
/// Iteration stops once the step falls below `x_tol * max(1, |x|)`.
/// `y` must lie in the closure of the image; targets outside it return the
/// nearest end of the (possibly expanded) bracket.
pub fn invert_monotone(
    forward: &dyn Fn(f64) -> f64,
    derivative: Option<&dyn Fn(f64) -> f64>,
    y: f64,
    domain: &Interval,
    increasing: bool,
    x_tol: f64,
) -> f64 {
    let sign = if increasing { 1.0 } else { -1.0 };
    // h is increasing with a root at the solution.
    let h = |x: f64| sign * (forward(x) - y);

    let (mut a, mut b) = bracket(&h, domain);
    let ha = h(a);
    if ha >= 0.0 {
        return a;
    }
    let hb = h(b);
    if hb <= 0.0 {
        return b;
    }

    let mut x = 0.5 * (a + b);
    let mut last_step = b - a;
    for _ in 0..MAX_ITER {
        let hx = h(x);
        if hx == 0.0 {
            return x;
        }
        if hx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let tol = x_tol * x.abs().max(1.0);
        if b - a <= tol {
            return 0.5 * (a + b);
        }

        let newton = derivative.and_then(|d| {
            let dh = sign * d(x);
            let cand = x - hx / dh;
            let step = (cand - x).abs();
            (dh.is_finite() && dh > 0.0 && cand > a && cand < b && step < 0.5 * last_step).then_some(cand)
        });
        let next = newton.unwrap_or(0.5 * (a + b));
        let step = (next - x).abs();
        x = next;
        last_step = step.max(f64::MIN_POSITIVE);
        if step <= tol && newton.is_some() {
            // Newton has converged; one more evaluation pins the side.
            return x;
        }
    }
    x
}

/// Finite `[a, b]` inside the domain closure with `h(a) <= 0 <= h(b)` when
/// the target is attainable. Infinite ends are replaced by geometric search.
fn bracket(h: &dyn Fn(f64) -> f64, domain: &Interval) -> (f64, f64) {
    let anchor = domain.interior_point();
    let lo = if domain.lo.is_finite() {
        domain.lo
    } else {
        let mut step = anchor.abs().max(1.0);
        let mut x = anchor - step;
        while h(x) > 0.0 && step < 1e300 {
            step *= 2.0;
            x = anchor - step;
        }
        x
    };
    let hi = if domain.hi.is_finite() {
        domain.hi
    } else {
        let mut step = anchor.abs().max(1.0);
        let mut x = anchor + step;
        while h(x) < 0.0 && step < 1e300 {
            step *= 2.0;
            x = anchor + step;
        }
        x
    };
    (lo, hi)
}
