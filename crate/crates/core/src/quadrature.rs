//! Globally adaptive Gauss–Kronrod (7/15) quadrature over a set of
//! breakpoints.
//!
//! The integration range is first cut at every supplied breakpoint. The panel
//! with the largest error estimate is then bisected until the summed error
//! meets the tolerance, a panel hits the depth cap, or the panel budget runs
//! out. Panel ends are never evaluated, so integrable end-point singularities
//! placed at breakpoints are safe.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of bisections applied to any initial panel.
    pub max_depth: u32,
    /// Hard cap on the number of live panels.
    pub max_panels: usize,
    /// Fraction of its width trimmed from both ends of every initial panel.
    pub edge_pad: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_depth: 60, max_panels: 200_000, edge_pad: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub panels: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every
/// interior point. Non-finite and duplicate points are dropped.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: &QuadOptions) -> QuadResult {
    let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut evaluations = 0usize;
    let mut heap = BinaryHeap::new();
    let mut finished: Vec<Panel> = Vec::new();
    let mut pad_error = 0.0;

    for w in pts.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        if opts.edge_pad > 0.0 {
            let pad = opts.edge_pad * (b - a);
            a += pad;
            b -= pad;
            // A sliver next to a log or inverse-square-root singularity
            // integrates to at most twice width times the value at the cut.
            let (fa, fb) = (f(a), f(b));
            evaluations += 2;
            pad_error += 2.0 * pad * (finite_abs(fa) + finite_abs(fb));
        }
        let (value, error) = kronrod(&f, a, b);
        evaluations += 15;
        heap.push(Panel { a, b, value, error, depth: 0 });
    }

    let totals = |heap: &BinaryHeap<Panel>, finished: &[Panel]| {
        heap.iter().chain(finished.iter()).fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };

    let (mut total, mut total_err) = totals(&heap, &finished);
    let mut iter = 0usize;
    while let Some(worst) = heap.peek().copied() {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        // The pad error cannot be refined away; once it dominates, refine
        // only down to half the tolerance.
        let target = if pad_error > 0.5 * tol { 0.5 * tol } else { tol - pad_error };
        if total_err <= target || heap.len() + finished.len() >= opts.max_panels {
            break;
        }
        heap.pop();
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= opts.max_depth || mid <= worst.a || mid >= worst.b {
            finished.push(worst);
            continue;
        }
        let (lv, le) = kronrod(&f, worst.a, mid);
        let (rv, re) = kronrod(&f, mid, worst.b);
        evaluations += 30;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        let depth = worst.depth + 1;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le, depth });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re, depth });
        iter += 1;
        if iter.is_multiple_of(64) {
            (total, total_err) = totals(&heap, &finished);
        }
    }

    // Fixed summation order: by panel position.
    let mut all: Vec<Panel> = heap.into_vec();
    all.extend(finished);
    all.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = pairwise_sum(&all.iter().map(|p| p.value).collect::<Vec<_>>());
    let error = all.iter().map(|p| p.error).sum::<f64>() + pad_error;
    let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
    QuadResult { value, error, converged: error <= tol && value.is_finite(), panels: all.len(), evaluations }
}

fn finite_abs(v: f64) -> f64 {
    if v.is_finite() {
        v.abs()
    } else {
        0.0
    }
}

/// 15-point Kronrod estimate and its error against the embedded 7-point
/// Gauss rule, with the usual QUADPACK scaling.
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        err = f64::INFINITY;
    }
    (value, err)
}

/// Pairwise summation in slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
