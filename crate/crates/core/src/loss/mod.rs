//! Information loss `H(X|Y)` by quadrature, by the branch-posterior route,
//! and the bound chain.

mod tightness;

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::density::{output_cdf, truncated_support, Density, DEFAULT_MASS_EPS, DERIVATIVE_FLOOR};
use crate::error::{Error, Result};
use crate::function_model::{Branch, PwmFunction, DEFAULT_VALIDATION_GRID};
use crate::interval::Interval;
use crate::quadrature::{integrate, QuadOptions, QuadResult};
use crate::roots::X_TOL;

pub use tightness::{tightness_check, TightnessReport, TIGHTNESS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Absolute tolerance in bits.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Tail mass dropped from unbounded supports.
    pub mass_eps: f64,
    /// Width trimmed at every breakpoint, relative to the panel it bounds.
    pub singularity_pad: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-4, rel_tol: 1e-8, max_depth: 50, mass_eps: DEFAULT_MASS_EPS, singularity_pad: 1e-10 }
    }
}

impl QuadratureConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("quadrature: {m}")));
        if !(self.abs_tol > 0.0) {
            return bad("abs_tol must be positive");
        }
        if !(self.rel_tol >= 0.0) {
            return bad("rel_tol must be nonnegative");
        }
        if self.max_depth < 10 {
            return bad("max_depth must be at least 10");
        }
        if !(self.mass_eps > 0.0 && self.mass_eps < 0.5) {
            return bad("mass_eps must lie in (0, 0.5)");
        }
        if !(self.singularity_pad > 0.0 && self.singularity_pad <= 1e-6) {
            return bad("singularity_pad must lie in (0, 1e-6]");
        }
        Ok(())
    }

    fn options(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_depth: self.max_depth,
            edge_pad: self.singularity_pad,
            ..QuadOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    QuadratureX,
    QuadratureW,
    MonteCarlo,
    HistogramOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss_bits: f64,
    pub method: Method,
    pub error_estimate_bits: f64,
    pub bound1_bits: f64,
    pub bound2_bits: f64,
    pub bound3_bits: f64,
    #[serde(rename = "L")]
    pub branch_count: usize,
    pub bijective_mass: f64,
    /// False when the quadrature hit its depth or panel cap.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub bound1: f64,
    pub bound2: f64,
    pub bound3: f64,
}

/// `f_Y(y) = sum_i f_X(x_i) / |g'(x_i)|` over the roots of `g(x) = y`.
pub fn output_density_at(f: &PwmFunction, d: &dyn Density, y: f64) -> f64 {
    let mut total = 0.0;
    f.for_each_root(y, X_TOL, |i, x| total += root_weight(f, d, i, x));
    total
}

#[inline]
fn root_weight(f: &PwmFunction, d: &dyn Density, branch: usize, x: f64) -> f64 {
    d.pdf(x) / f.branches()[branch].derivative(x).abs().max(DERIVATIVE_FLOOR)
}

/// `p(w_i | y)` for every branch whose image contains `y`.
pub fn branch_posterior(f: &PwmFunction, d: &dyn Density, y: f64) -> Result<Vec<(usize, f64)>> {
    let mut weights = Vec::with_capacity(f.branch_count());
    f.for_each_root(y, X_TOL, |i, x| weights.push((i, root_weight(f, d, i, x))));
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::UndefinedConditional(y));
    }
    Ok(weights.into_iter().map(|(i, w)| (i, w / total)).collect())
}

/// `log2 r(x)` with `r(x) = sum_k [f_X(x_k)/|g'(x_k)|] * [|g'(x)|/f_X(x)]`
/// over the roots of `g(x_k) = g(x)`. The root `x` itself contributes
/// exactly one. `None` where `f_X(x) = 0` or `x` is outside the domain.
pub fn log2_ratio(f: &PwmFunction, d: &dyn Density, x: f64) -> Option<f64> {
    let k = f.branch_containing(x)?;
    let fx = d.pdf(x);
    if !(fx > 0.0) {
        return None;
    }
    let own = &f.branches()[k];
    let y = own.forward(x);
    let mut others = 0.0;
    for (i, b) in f.branches().iter().enumerate() {
        if i != k && b.image().contains(y) {
            others += root_weight(f, d, i, b.inverse_with_tol(y, X_TOL));
        }
    }
    if others == 0.0 {
        return Some(0.0);
    }
    let slope = own.derivative(x).abs();
    let excess = slope / fx * others;
    Some(if excess.is_finite() { excess.ln_1p() / LN_2 } else { slope.log2() + others.log2() - fx.log2() })
}

/// Support inside the domain, and the function valid where the mass lives.
/// Returns the truncated support.
pub(crate) fn check_inputs_eps(f: &PwmFunction, d: &dyn Density, mass_eps: f64) -> Result<Interval> {
    let s = d.support();
    if !f.domain_covers(&s) || !f.domain_hull().covers(&s) {
        let h = f.domain_hull();
        return Err(Error::SupportMismatch { support_lo: s.lo, support_hi: s.hi, domain_lo: h.lo, domain_hi: h.hi });
    }
    let t = truncated_support(d, mass_eps);
    f.validate_on(&t, DEFAULT_VALIDATION_GRID).into_result()?;
    Ok(t)
}

pub(crate) fn check_inputs(f: &PwmFunction, d: &dyn Density) -> Result<Interval> {
    check_inputs_eps(f, d, DEFAULT_MASS_EPS)
}

fn prepare(f: &PwmFunction, d: &dyn Density, cfg: &QuadratureConfig) -> Result<Interval> {
    cfg.check()?;
    check_inputs_eps(f, d, cfg.mass_eps)
}

/// Upper estimate of what the dropped tails contribute to the `y` route.
/// Its integrand is at most `f_Y log2 L`.
fn truncation_error(f: &PwmFunction, d: &dyn Density, cfg: &QuadratureConfig) -> f64 {
    if d.support().is_bounded() {
        0.0
    } else {
        cfg.mass_eps * (f.branch_count() as f64).log2()
    }
}

/// Tail mass for the `x` route and the matching error bound. Dropping mass
/// `e` in `x` loses at most `e log2(L/e)` (log-sum inequality), since `r` is
/// unbounded in the tails; `e` is shrunk until that meets the `y` budget.
fn x_tail_mass(f: &PwmFunction, d: &dyn Density, cfg: &QuadratureConfig) -> (f64, f64) {
    if d.support().is_bounded() {
        return (cfg.mass_eps, 0.0);
    }
    let l = f.branch_count() as f64;
    let budget = cfg.mass_eps * l.log2();
    let mut e = cfg.mass_eps;
    for _ in 0..6 {
        e = budget / (l / e).log2();
    }
    (e, e * (l / e).log2())
}

/// Points in `t` where the loss integrand over `x` changes smoothness class:
/// branch ends, density breakpoints, and every preimage of an image end or of
/// the image of a density breakpoint.
fn x_breakpoints(f: &PwmFunction, d: &dyn Density, t: &Interval) -> Vec<f64> {
    let mut pts = vec![t.lo, t.hi];
    let mut ys = f.image_breakpoints();
    for b in f.branches() {
        pts.extend([b.domain().lo, b.domain().hi]);
    }
    for x in d.breakpoints() {
        pts.push(x);
        if let Some(y) = f.eval(x) {
            ys.push(y);
        }
    }
    for y in ys {
        for b in f.branches() {
            if b.image().contains_closure(y) {
                pts.push(b.inverse_with_tol(y, X_TOL));
            }
        }
    }
    clean(pts, t.lo, t.hi)
}

fn clean(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| p.is_finite() && *p >= lo && *p <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Range of `g` over `t`, plus the output breakpoints the `y` integrand
/// needs: image ends, images of density breakpoints and of the ends of `t`.
fn y_breakpoints(f: &PwmFunction, d: &dyn Density, t: &Interval) -> Vec<f64> {
    let mut ys = f.image_breakpoints();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in f.branches() {
        let Some(piece) = b.domain().intersect(t) else { continue };
        let dom = b.domain();
        let img = b.image();
        let value = |x: f64| {
            if x == dom.lo || x == dom.hi {
                let toward_lo = (x == dom.lo) == (b.orientation().sign() > 0.0);
                if toward_lo {
                    img.lo
                } else {
                    img.hi
                }
            } else {
                b.forward(x)
            }
        };
        let (a, c) = (value(piece.lo), value(piece.hi));
        ys.extend([a, c]);
        lo = lo.min(a.min(c));
        hi = hi.max(a.max(c));
    }
    for x in d.breakpoints() {
        if let Some(y) = f.eval(x) {
            ys.push(y);
        }
    }
    clean(ys, lo, hi)
}

fn report(f: &PwmFunction, d: &dyn Density, method: Method, r: QuadResult, truncation: f64) -> LossReport {
    let b = bounds(f, d);
    LossReport {
        loss_bits: r.value,
        method,
        error_estimate_bits: r.error + truncation,
        bound1_bits: b.bound1,
        bound2_bits: b.bound2,
        bound3_bits: b.bound3,
        branch_count: f.branch_count(),
        bijective_mass: bijective_mass(f, d),
        converged: r.converged,
    }
}

/// `H(X|Y) = int f_X(x) log2 r(x) dx` over the truncated support.
pub fn info_loss(f: &PwmFunction, d: &dyn Density, cfg: &QuadratureConfig) -> Result<LossReport> {
    if f.branch_count() == 1 {
        prepare(f, d, cfg)?;
        return Ok(report(f, d, Method::QuadratureX, exact_zero(), 0.0));
    }
    let (eps, truncation) = x_tail_mass(f, d, cfg);
    cfg.check()?;
    let t = check_inputs_eps(f, d, eps)?;
    let pts = x_breakpoints(f, d, &t);
    let integrand = |x: f64| match log2_ratio(f, d, x) {
        Some(l) if l > 0.0 => d.pdf(x) * l,
        _ => 0.0,
    };
    let r = integrate(integrand, &pts, &cfg.options());
    Ok(report(f, d, Method::QuadratureX, r, truncation))
}

/// `H(W|Y) = int sum_i q_i log2(f_Y / q_i) dy` with `q_i = f_X(x_i)/|g'(x_i)|`.
pub fn info_loss_via_w(f: &PwmFunction, d: &dyn Density, cfg: &QuadratureConfig) -> Result<LossReport> {
    let t = prepare(f, d, cfg)?;
    if f.branch_count() == 1 {
        return Ok(report(f, d, Method::QuadratureW, exact_zero(), 0.0));
    }
    let pts = y_breakpoints(f, d, &t);
    let integrand = |y: f64| {
        let mut q = Vec::with_capacity(f.branch_count());
        f.for_each_root(y, X_TOL, |i, x| q.push(root_weight(f, d, i, x)));
        let total: f64 = q.iter().sum();
        if !(total > 0.0) {
            return 0.0;
        }
        q.iter().filter(|&&w| w > 0.0).map(|&w| w * (total / w).log2()).sum()
    };
    let r = integrate(integrand, &pts, &QuadOptions { edge_pad: 0.0, ..cfg.options() });
    Ok(report(f, d, Method::QuadratureW, r, truncation_error(f, d, cfg)))
}

fn exact_zero() -> QuadResult {
    QuadResult { value: 0.0, error: 0.0, converged: true, panels: 0, evaluations: 0 }
}

/// Output intervals on which `|I(y)|` is constant, with that count. They
/// cover the real line.
pub(crate) fn count_regions(f: &PwmFunction) -> Vec<(f64, f64, usize)> {
    let mut ends = vec![f64::NEG_INFINITY];
    ends.extend(f.image_breakpoints());
    ends.push(f64::INFINITY);
    ends.windows(2)
        .map(|w| {
            let mid = Interval::open(w[0], w[1]).map(|iv| iv.interior_point()).unwrap_or(w[0]);
            (w[0], w[1], f.preimage_count(mid))
        })
        .collect()
}

/// `f` restricted to the support of `d`, so branch images cover only outputs
/// the input can reach. Unbounded supports leave `f` unchanged.
pub(crate) fn on_support(f: &PwmFunction, d: &dyn Density) -> PwmFunction {
    let s = d.support();
    let branches: Vec<Branch> = f
        .branches()
        .iter()
        .filter_map(|b| {
            let sub = b.domain().intersect(&s)?;
            if sub == *b.domain() {
                Some(b.clone())
            } else {
                b.restricted(sub).ok()
            }
        })
        .collect();
    PwmFunction::new(branches).unwrap_or_else(|_| f.clone())
}

fn mass_between(f: &PwmFunction, d: &dyn Density, lo: f64, hi: f64) -> f64 {
    (output_cdf(f, d, hi) - output_cdf(f, d, lo)).max(0.0)
}

/// The three upper bounds on the loss, from CDF differences at image ends.
pub fn bounds(f: &PwmFunction, d: &dyn Density) -> Bounds {
    let reach = on_support(f, d);
    let bound1 = count_regions(&reach)
        .into_iter()
        .filter(|r| r.2 > 1)
        .map(|(lo, hi, n)| mass_between(f, d, lo, hi) * (n as f64).log2())
        .sum();
    let covered: f64 = reach.branches().iter().map(|b| mass_between(f, d, b.image().lo, b.image().hi)).sum();
    Bounds { bound1, bound2: covered.max(f64::MIN_POSITIVE).log2(), bound3: (f.branch_count() as f64).log2() }
}

/// `P_b`: probability that `g(X)` has a single preimage.
pub fn bijective_mass(f: &PwmFunction, d: &dyn Density) -> f64 {
    count_regions(&on_support(f, d))
        .into_iter()
        .filter(|r| r.2 == 1)
        .map(|(lo, hi, _)| mass_between(f, d, lo, hi))
        .sum::<f64>()
        .min(1.0)
        + 0.0 // an empty float sum is -0.0
}
