//! Built-in nonlinearities with closed-form derivatives and inverses.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::branch::{Branch, Orientation, RealFn};
use super::pwm::PwmFunction;
use crate::error::{Error, Result};
use crate::interval::Interval;

pub const CATALOG_NAMES: [&str; 5] = ["magnitude", "sqlin", "cubic", "cosine", "identity"];

fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> RealFn {
    Arc::new(f)
}

const NEG_INF: f64 = f64::NEG_INFINITY;
const POS_INF: f64 = f64::INFINITY;

/// Looks up a catalog function by name. Unknown parameter keys are rejected.
pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<PwmFunction> {
    let allowed: &[&str] = match name {
        "magnitude" | "sqlin" => &[],
        "cubic" => &["c"],
        "cosine" => &["L"],
        "identity" => &["lo", "hi"],
        other => return Err(Error::UnknownFunction(other.to_string())),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!("`{k}` is not a parameter of `{name}`")));
    }
    match name {
        "magnitude" => Ok(magnitude()),
        "sqlin" => Ok(sqlin()),
        "cubic" => cubic(params.get("c").copied().unwrap_or(100.0)),
        "cosine" => {
            let l = params.get("L").copied().unwrap_or(1.0);
            if l < 1.0 || l.fract() != 0.0 || l > 1e6 {
                return Err(Error::InvalidParameter(format!("cosine needs a positive integer L, got {l}")));
            }
            Ok(cosine(l as usize))
        }
        "identity" => {
            let lo = params.get("lo").copied().unwrap_or(NEG_INF);
            let hi = params.get("hi").copied().unwrap_or(POS_INF);
            identity_on(Interval::closed(lo, hi)?)
        }
        _ => unreachable!(),
    }
}

/// `|x|` on the real line: `-x` on `(-inf, 0)`, `x` on `[0, inf)`.
pub fn magnitude() -> PwmFunction {
    let neg = Branch::from_parts(
        Interval::open(NEG_INF, 0.0).unwrap(),
        Orientation::Decreasing,
        arc(|x| -x),
        arc(|_| -1.0),
        Interval::open(0.0, POS_INF).unwrap(),
    )
    .with_inverse(arc(|y| -y));
    let pos = Branch::from_parts(
        Interval::closed_open(0.0, POS_INF).unwrap(),
        Orientation::Increasing,
        arc(|x| x),
        arc(|_| 1.0),
        Interval::closed_open(0.0, POS_INF).unwrap(),
    )
    .with_inverse(arc(|y| y));
    PwmFunction::new(vec![neg, pos]).unwrap()
}

/// `x^2` for `x < 0`, `x` for `x >= 0`.
pub fn sqlin() -> PwmFunction {
    let neg = Branch::from_parts(
        Interval::open(NEG_INF, 0.0).unwrap(),
        Orientation::Decreasing,
        arc(|x| x * x),
        arc(|x| 2.0 * x),
        Interval::open(0.0, POS_INF).unwrap(),
    )
    .with_inverse(arc(|y: f64| -y.sqrt()));
    let pos = Branch::from_parts(
        Interval::closed_open(0.0, POS_INF).unwrap(),
        Orientation::Increasing,
        arc(|x| x),
        arc(|_| 1.0),
        Interval::closed_open(0.0, POS_INF).unwrap(),
    )
    .with_inverse(arc(|y| y));
    PwmFunction::new(vec![neg, pos]).unwrap()
}

/// `x^3 - c x` with `c > 0`, split at the extrema `±sqrt(c/3)`.
///
/// Inverses use the trigonometric form `x = 2r cos(phi)` inside the
/// three-root band `|y| <= 2 r^3` and the hyperbolic form outside, followed by
/// one Newton correction.
pub fn cubic(c: f64) -> Result<PwmFunction> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("cubic needs c > 0, got {c}")));
    }
    let r = (c / 3.0).sqrt();
    let m = 2.0 * r * r * r;
    let polish = move |x: f64, y: f64| {
        let d = 3.0 * x * x - c;
        let step = (x * x * x - c * x - y) / d;
        if d.abs() > 1e-6 * c && step.is_finite() {
            x - step
        } else {
            x
        }
    };
    let third = 1.0 / 3.0;
    let left = move |y: f64| {
        let x = if y >= -m {
            let phi = (y / m).clamp(-1.0, 1.0).acos() * third;
            2.0 * r * (phi + 2.0 * PI / 3.0).cos()
        } else {
            -2.0 * r * ((-y / m).acosh() * third).cosh()
        };
        polish(x, y).min(-r)
    };
    let middle = move |y: f64| {
        let phi = (y / m).clamp(-1.0, 1.0).acos() * third;
        polish(2.0 * r * (phi - 2.0 * PI / 3.0).cos(), y).clamp(-r, r)
    };
    let right = move |y: f64| {
        let x = if y <= m {
            let phi = (y / m).clamp(-1.0, 1.0).acos() * third;
            2.0 * r * phi.cos()
        } else {
            2.0 * r * ((y / m).acosh() * third).cosh()
        };
        polish(x, y).max(r)
    };
    let fwd = move |x: f64| x * x * x - c * x;
    let der = move |x: f64| 3.0 * x * x - c;
    let b1 = Branch::from_parts(
        Interval::open(NEG_INF, -r)?,
        Orientation::Increasing,
        arc(fwd),
        arc(der),
        Interval::open(NEG_INF, m)?,
    )
    .with_inverse(arc(left));
    let b2 = Branch::from_parts(
        Interval::closed_open(-r, r)?,
        Orientation::Decreasing,
        arc(fwd),
        arc(der),
        Interval::new(-m, m, false, true)?,
    )
    .with_inverse(arc(middle));
    let b3 = Branch::from_parts(
        Interval::closed_open(r, POS_INF)?,
        Orientation::Increasing,
        arc(fwd),
        arc(der),
        Interval::closed_open(-m, POS_INF)?,
    )
    .with_inverse(arc(right));
    PwmFunction::new(vec![b1, b2, b3])
}

/// `cos(x)` on `[0, L pi)`, one branch per half period `[(i-1) pi, i pi)`.
pub fn cosine(periods: usize) -> PwmFunction {
    let branches = (0..periods.max(1))
        .map(|k| {
            let start = k as f64 * PI;
            let end = (k + 1) as f64 * PI;
            let domain = Interval::closed_open(start, end).unwrap();
            if k % 2 == 0 {
                Branch::from_parts(
                    domain,
                    Orientation::Decreasing,
                    arc(f64::cos),
                    arc(|x: f64| -x.sin()),
                    Interval::new(-1.0, 1.0, false, true).unwrap(),
                )
                .with_inverse(arc(move |y: f64| start + y.clamp(-1.0, 1.0).acos()))
            } else {
                Branch::from_parts(
                    domain,
                    Orientation::Increasing,
                    arc(f64::cos),
                    arc(|x: f64| -x.sin()),
                    Interval::new(-1.0, 1.0, true, false).unwrap(),
                )
                .with_inverse(arc(move |y: f64| end - y.clamp(-1.0, 1.0).acos()))
            }
        })
        .collect();
    PwmFunction::new(branches).unwrap()
}

/// Identity on the real line.
pub fn identity() -> PwmFunction {
    identity_on(Interval::real_line()).unwrap()
}

pub fn identity_on(domain: Interval) -> Result<PwmFunction> {
    affine_on(1.0, 0.0, domain)
}

/// `scale * x + shift` on `domain`, a single bijective branch.
pub fn affine_on(scale: f64, shift: f64, domain: Interval) -> Result<PwmFunction> {
    if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
        return Err(Error::InvalidParameter(format!("affine map needs a finite nonzero scale, got {scale}")));
    }
    let orientation = if scale > 0.0 { Orientation::Increasing } else { Orientation::Decreasing };
    let (a, b) = (scale * domain.lo + shift, scale * domain.hi + shift);
    let image = if scale > 0.0 {
        Interval::new(a, b, domain.lo_closed, domain.hi_closed)?
    } else {
        Interval::new(b, a, domain.hi_closed, domain.lo_closed)?
    };
    let branch = Branch::from_parts(domain, orientation, arc(move |x| scale * x + shift), arc(move |_| scale), image)
        .with_inverse(arc(move |y| (y - shift) / scale));
    PwmFunction::new(vec![branch])
}
