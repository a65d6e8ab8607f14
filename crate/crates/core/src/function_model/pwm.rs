use serde::Serialize;

use super::branch::{Branch, Orientation};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::roots::X_TOL;

/// Default number of sampled points per branch during validation.
pub const DEFAULT_VALIDATION_GRID: usize = 1024;

/// Relative residual allowed for `forward(inverse(y)) = y`.
const ROUND_TRIP_TOL: f64 = 1e-9;

/// A piecewise strictly monotone function: ordered branches on disjoint
/// subdomains.
#[derive(Debug, Clone)]
pub struct PwmFunction {
    branches: Vec<Branch>,
}

/// One solution of `g(x) = y`, tagged with its branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub branch: usize,
    pub x: f64,
}

/// The preimage of a point: at most one root per branch, in branch order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PreimageSet {
    pub roots: Vec<Root>,
}

impl PreimageSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub max_inverse_residual: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Converts a failed report into an error.
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let msg = self.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
        Err(Error::Validation(msg))
    }
}

impl PwmFunction {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidParameter("a piecewise monotone function needs at least one branch".into()));
        }
        Ok(Self { branches })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Number of branches `L`.
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Interval hull of the domain.
    pub fn domain_hull(&self) -> Interval {
        let first = self.branches[0].domain();
        let last = self.branches[self.branches.len() - 1].domain();
        Interval { lo: first.lo, hi: last.hi, lo_closed: first.lo_closed, hi_closed: last.hi_closed }
    }

    /// Whether every point of `iv` (up to its ends) lies in some subdomain.
    pub fn domain_covers(&self, iv: &Interval) -> bool {
        let mut cursor = iv.lo;
        for b in &self.branches {
            let d = b.domain();
            if d.hi <= cursor {
                continue;
            }
            if d.lo > cursor {
                return false;
            }
            cursor = d.hi;
            if cursor >= iv.hi {
                return true;
            }
        }
        cursor >= iv.hi
    }

    pub fn branch_containing(&self, x: f64) -> Option<usize> {
        let idx = self.branches.partition_point(|b| b.domain().hi < x);
        (idx.saturating_sub(1)..(idx + 2).min(self.branches.len())).find(|&i| self.branches[i].domain().contains(x))
    }

    /// `g(x)`, or `None` outside the domain.
    pub fn eval(&self, x: f64) -> Option<f64> {
        self.branch_containing(x).map(|i| self.branches[i].forward(x))
    }

    /// Sorted distinct finite image endpoints; `|I(y)|` is constant between
    /// consecutive ones.
    pub fn image_breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> =
            self.branches.iter().flat_map(|b| [b.image().lo, b.image().hi]).filter(|v| v.is_finite()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Interval hull of all branch images.
    pub fn image_hull(&self) -> (f64, f64) {
        self.branches
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b.image().lo), hi.max(b.image().hi)))
    }

    /// Number of branches whose image contains `y`.
    pub fn preimage_count(&self, y: f64) -> usize {
        self.branches.iter().filter(|b| b.image().contains(y)).count()
    }

    /// Calls `visit(branch, x)` for every root of `g(x) = y`.
    #[inline]
    pub fn for_each_root(&self, y: f64, tol: f64, mut visit: impl FnMut(usize, f64)) {
        for (i, b) in self.branches.iter().enumerate() {
            if b.image().contains(y) {
                visit(i, b.inverse_with_tol(y, tol));
            }
        }
    }

    /// All roots of `g(x) = y`. Outside the image the set is empty.
    pub fn preimage(&self, y: f64, tol: f64) -> PreimageSet {
        let mut roots = Vec::with_capacity(self.branches.len());
        self.for_each_root(y, tol, |branch, x| roots.push(Root { branch, x }));
        PreimageSet { roots }
    }

    /// Validates with the default sampling window (infinite ends replaced by
    /// a window of ten times the scale of the finite end).
    pub fn validate(&self, grid_points_per_branch: usize) -> ValidationReport {
        self.validate_on(&Interval::real_line(), grid_points_per_branch)
    }

    /// Validates, sampling only the part of each subdomain inside `window`.
    /// Branches disjoint from the window are checked for ordering only.
    pub fn validate_on(&self, window: &Interval, grid_points_per_branch: usize) -> ValidationReport {
        let n = grid_points_per_branch.max(16);
        let mut checks = Vec::new();

        checks.push(Check {
            name: "branch_count".into(),
            passed: !self.branches.is_empty(),
            detail: format!("L = {}", self.branches.len()),
        });

        let mut order_problems = Vec::new();
        for (i, pair) in self.branches.windows(2).enumerate() {
            let (a, b) = (pair[0].domain(), pair[1].domain());
            let overlap = a.hi > b.lo || (a.hi == b.lo && a.hi_closed && b.lo_closed);
            if overlap {
                order_problems.push(format!("branches {i} ({a}) and {} ({b}) overlap or are unordered", i + 1));
            }
        }
        checks.push(Check {
            name: "ordered_disjoint_domains".into(),
            passed: order_problems.is_empty(),
            detail: if order_problems.is_empty() { "ok".into() } else { order_problems.join(", ") },
        });

        let mut mono_problems = Vec::new();
        let mut deriv_problems = Vec::new();
        let mut max_residual: f64 = 0.0;
        for (i, b) in self.branches.iter().enumerate() {
            let Some(sample_on) = b.domain().intersect(window) else {
                continue;
            };
            let (lo, hi) = sampling_window(&sample_on);
            let sign = b.orientation().sign();
            let mut prev: Option<f64> = None;
            let mut mono_bad = 0usize;
            let mut deriv_bad = 0usize;
            for j in 0..n {
                let t = (j as f64 + 0.5) / n as f64;
                let x = lo + (hi - lo) * t;
                let y = b.forward(x);
                if let Some(p) = prev {
                    if !(sign * (y - p) > 0.0) {
                        mono_bad += 1;
                    }
                }
                prev = Some(y);
                if !(sign * b.derivative(x) > 0.0) {
                    deriv_bad += 1;
                }
                let back = b.inverse(y);
                let resid = (b.forward(back) - y).abs() / y.abs().max(1.0);
                let resid = if back.is_nan() { f64::INFINITY } else { resid };
                max_residual = max_residual.max(resid);
            }
            if mono_bad > 0 {
                mono_problems.push(format!(
                    "branch {i}: {mono_bad} sampled steps not strictly {}",
                    match b.orientation() {
                        Orientation::Increasing => "increasing",
                        Orientation::Decreasing => "decreasing",
                    }
                ));
            }
            if deriv_bad > 0 {
                deriv_problems.push(format!(
                    "branch {i}: derivative has the wrong sign or vanishes at {deriv_bad} interior samples"
                ));
            }
        }
        checks.push(Check {
            name: "monotone_sampling".into(),
            passed: mono_problems.is_empty(),
            detail: if mono_problems.is_empty() { "ok".into() } else { mono_problems.join(", ") },
        });
        checks.push(Check {
            name: "derivative_sign".into(),
            passed: deriv_problems.is_empty(),
            detail: if deriv_problems.is_empty() { "ok".into() } else { deriv_problems.join(", ") },
        });
        checks.push(Check {
            name: "inverse_round_trip".into(),
            passed: max_residual <= ROUND_TRIP_TOL,
            detail: format!("max relative residual {max_residual:.3e}"),
        });

        ValidationReport { checks, max_inverse_residual: max_residual }
    }

    /// Default preimage tolerance.
    pub fn default_tol() -> f64 {
        X_TOL
    }
}

/// Finite sampling range for a (possibly unbounded) subdomain.
fn sampling_window(d: &Interval) -> (f64, f64) {
    match (d.lo.is_finite(), d.hi.is_finite()) {
        (true, true) => (d.lo, d.hi),
        (true, false) => (d.lo, d.lo + 10.0 * d.lo.abs().max(1.0)),
        (false, true) => (d.hi - 10.0 * d.hi.abs().max(1.0), d.hi),
        (false, false) => (-10.0, 10.0),
    }
}
