//! Real polynomials, real-root isolation and the polynomial constructor for
//! piecewise monotone functions.
//!
//! Roots are isolated recursively: the critical points of `p` (roots of
//! `p'`) cut the range into pieces on which `p` is monotone, and each piece
//! holds at most one root, found by bisection on a sign change.

use std::sync::Arc;

use super::branch::{Branch, Orientation};
use super::pwm::PwmFunction;
use crate::error::{Error, Result};
use crate::interval::Interval;

/// Coefficients in ascending order: `c[0] + c[1] x + c[2] x^2 + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: &[f64]) -> Self {
        let mut coeffs = coeffs.to_vec();
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(&[0.0]);
        }
        let d: Vec<f64> = self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect();
        Polynomial::new(&d)
    }

    /// Limit at `+inf` (`dir > 0`) or `-inf` (`dir < 0`).
    pub fn limit(&self, dir: f64) -> f64 {
        let n = self.degree();
        let lead = self.coeffs[n];
        if n == 0 {
            return lead;
        }
        let parity = if n.is_multiple_of(2) { 1.0 } else { dir.signum() };
        lead.signum() * parity * f64::INFINITY
    }

    /// Cauchy bound: every real root lies in `[-R, R]`.
    pub fn root_bound(&self) -> f64 {
        let n = self.degree();
        let lead = self.coeffs[n].abs();
        1.0 + self.coeffs[..n].iter().map(|c| c.abs() / lead).fold(0.0, f64::max)
    }

    /// Roots in the open interval `(lo, hi)` at which `p` changes sign, in
    /// increasing order. Roots of even multiplicity are skipped.
    pub fn sign_change_roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.degree() == 0 {
            return Vec::new();
        }
        let r = self.root_bound();
        let (a, b) = (lo.max(-r - 1.0), hi.min(r + 1.0));
        if a >= b {
            return Vec::new();
        }
        let mut cuts = vec![a];
        if self.degree() >= 2 {
            cuts.extend(self.derivative().stationary_points(a, b));
        }
        cuts.push(b);
        let mut roots = Vec::new();
        for w in cuts.windows(2) {
            let (s, t) = (w[0], w[1]);
            let (ps, pt) = (self.eval(s), self.eval(t));
            if ps == 0.0 && s > lo && s < hi && roots.last() != Some(&s) {
                // Sign change through an exact zero at a cut point.
                let left = self.eval(s - (s.abs().max(1.0)) * 1e-9);
                if left.signum() != pt.signum() && pt != 0.0 {
                    roots.push(s);
                }
                continue;
            }
            if ps * pt < 0.0 {
                roots.push(bisect(|x| self.eval(x), s, t, ps));
            }
        }
        roots
    }

    /// Every real root in `(lo, hi)` of this polynomial, including touching
    /// ones; used as cut points one level up.
    fn stationary_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.degree() == 0 {
            return Vec::new();
        }
        let mut cuts = vec![lo];
        if self.degree() >= 2 {
            cuts.extend(self.derivative().stationary_points(lo, hi));
        }
        cuts.push(hi);
        let mut roots = Vec::new();
        for w in cuts.windows(2) {
            let (s, t) = (w[0], w[1]);
            let (ps, pt) = (self.eval(s), self.eval(t));
            if ps == 0.0 && s > lo {
                roots.push(s);
            } else if ps * pt < 0.0 {
                roots.push(bisect(|x| self.eval(x), s, t, ps));
            } else if s > lo && ps.abs() <= 1e-13 * self.scale_at(s) {
                // Touching root at a cut point.
                roots.push(s);
            }
        }
        roots.dedup();
        roots
    }

    fn scale_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * x.abs().powi(k as i32))
            .sum::<f64>()
            .max(f64::MIN_POSITIVE)
    }
}

/// Bisection to full floating-point resolution (at most 200 halvings).
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Splits a polynomial on `domain` at the sign changes of its derivative.
/// Branches are `[c_k, c_{k+1})` between critical points; the outer ends take
/// the closedness of `domain`. Inverses are synthesized numerically.
pub fn from_polynomial(coeffs: &[f64], domain: Interval) -> Result<PwmFunction> {
    let p = Arc::new(Polynomial::new(coeffs));
    if p.degree() < 1 {
        return Err(Error::ConstantPolynomial);
    }
    let dp = Arc::new(p.derivative());
    let crit = dp.sign_change_roots(domain.lo, domain.hi);

    let mut cuts = vec![domain.lo];
    cuts.extend(crit);
    cuts.push(domain.hi);

    let k = cuts.len() - 1;
    let mut branches = Vec::with_capacity(k);
    for (i, w) in cuts.windows(2).enumerate() {
        let lo_closed = if i == 0 { domain.lo_closed } else { true };
        let hi_closed = if i == k - 1 { domain.hi_closed } else { false };
        let piece = Interval::new(w[0], w[1], lo_closed, hi_closed)?;
        let end_value = |x: f64| {
            if x.is_finite() {
                p.eval(x)
            } else {
                p.limit(x)
            }
        };
        let (a, b) = (end_value(piece.lo), end_value(piece.hi));
        // End values, not p' at a probe: p' may vanish at a touching root.
        let orientation = if b > a { Orientation::Increasing } else { Orientation::Decreasing };
        let image = match orientation {
            Orientation::Increasing => Interval::new(a, b, piece.lo_closed, piece.hi_closed),
            Orientation::Decreasing => Interval::new(b, a, piece.hi_closed, piece.lo_closed),
        }
        .map_err(|_| Error::ConstantPolynomial)?;
        let pf = Arc::clone(&p);
        let pd = Arc::clone(&dp);
        let branch =
            Branch::from_parts(piece, orientation, Arc::new(move |x| pf.eval(x)), Arc::new(move |x| pd.eval(x)), image);
        branches.push(branch);
    }
    PwmFunction::new(branches)
}

/// Concatenates polynomial pieces, each split at its own critical points.
/// Pieces must be listed left to right; overlaps surface in validation.
pub fn from_pieces(pieces: &[(Interval, Vec<f64>)]) -> Result<PwmFunction> {
    let mut branches = Vec::new();
    for (domain, coeffs) in pieces {
        branches.extend(from_polynomial(coeffs, *domain)?.branches().iter().cloned());
    }
    PwmFunction::new(branches)
}
