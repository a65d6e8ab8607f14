use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::Arc;

use super::Density;
use crate::error::{Error, Result};
use crate::interval::Interval;

/// Parameters for the built-in input densities.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinDensity {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sigma: f64,
    },
    /// Linearly interpolated `(x, pdf)` table, renormalized to unit mass.
    CustomPiecewisePdf {
        points: Vec<(f64, f64)>,
    },
}

pub fn builtin(spec: &BuiltinDensity) -> Result<Arc<dyn Density>> {
    Ok(match spec {
        BuiltinDensity::Uniform { lo, hi } => Arc::new(Uniform::new(*lo, *hi)?),
        BuiltinDensity::Normal { mean, sigma } => Arc::new(Normal::new(*mean, *sigma)?),
        BuiltinDensity::CustomPiecewisePdf { points } => Arc::new(TableDensity::new(points)?),
    })
}

/// Uniform on `[-a, a]`.
pub fn uniform(a: f64) -> Result<Arc<dyn Density>> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("uniform half-width must be positive, got {a}")));
    }
    Ok(Arc::new(Uniform::new(-a, a)?))
}

pub fn uniform_on(lo: f64, hi: f64) -> Result<Arc<dyn Density>> {
    Ok(Arc::new(Uniform::new(lo, hi)?))
}

/// Zero-mean normal with standard deviation `sigma`.
pub fn normal(sigma: f64) -> Result<Arc<dyn Density>> {
    Ok(Arc::new(Normal::new(0.0, sigma)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("uniform needs finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }
}

impl Density for Uniform {
    fn pdf(&self, x: f64) -> f64 {
        if x >= self.lo && x <= self.hi {
            1.0 / (self.hi - self.lo)
        } else {
            0.0
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.lo + p.clamp(0.0, 1.0) * (self.hi - self.lo)
    }

    fn support(&self) -> Interval {
        Interval::closed(self.lo, self.hi).expect("validated in constructor")
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.lo, self.hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    mean: f64,
    sigma: f64,
}

impl Normal {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidParameter(format!("normal needs sigma > 0, got {sigma}")));
        }
        Ok(Self { mean, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Density for Normal {
    fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        INV_SQRT_2PI / self.sigma * (-0.5 * z * z).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        0.5 * libm::erfc(-(x - self.mean) / self.sigma * FRAC_1_SQRT_2)
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        if p > 0.5 {
            self.mean - self.sigma * std_lower_quantile(1.0 - p)
        } else {
            self.mean + self.sigma * std_lower_quantile(p)
        }
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        if q >= 1.0 {
            return f64::NEG_INFINITY;
        }
        if q > 0.5 {
            self.mean + self.sigma * std_lower_quantile(1.0 - q)
        } else {
            self.mean - self.sigma * std_lower_quantile(q)
        }
    }

    fn support(&self) -> Interval {
        Interval::real_line()
    }
}

/// Standard normal quantile for `0 < q <= 0.5`. The erfc_inv guess is only
/// good to about 1e-10, so it is polished with Newton steps on erfc.
fn std_lower_quantile(q: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let tail = 0.5 * libm::erfc(-z * FRAC_1_SQRT_2);
        let dens = INV_SQRT_2PI * (-0.5 * z * z).exp();
        if dens > 0.0 {
            z -= (tail - q) / dens;
        }
    }
    z
}

/// Piecewise linear pdf through `(x, p)` nodes, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDensity {
    xs: Vec<f64>,
    ps: Vec<f64>,
    cum: Vec<f64>,
}

impl TableDensity {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("a pdf table needs at least two points".into()));
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidParameter("pdf table x values must be strictly increasing".into()));
            }
        }
        if points.iter().any(|&(x, p)| !x.is_finite() || !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidParameter("pdf table values must be finite and nonnegative".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let raw: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mass: f64 = xs.windows(2).zip(raw.windows(2)).map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1])).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("pdf table has zero total mass".into()));
        }
        let ps: Vec<f64> = raw.iter().map(|p| p / mass).collect();
        let mut cum = Vec::with_capacity(xs.len());
        cum.push(0.0);
        for i in 0..xs.len() - 1 {
            let seg = 0.5 * (xs[i + 1] - xs[i]) * (ps[i] + ps[i + 1]);
            cum.push(cum[i] + seg);
        }
        Ok(Self { xs, ps, cum })
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&v| v <= x);
        i.saturating_sub(1).min(self.xs.len() - 2)
    }
}

impl Density for TableDensity {
    fn pdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ps[i] + t * (self.ps[i + 1] - self.ps[i])
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = x - self.xs[i];
        let slope = (self.ps[i + 1] - self.ps[i]) / h;
        (self.cum[i] + self.ps[i] * t + 0.5 * slope * t * t).min(1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        let n = self.xs.len();
        if p <= 0.0 {
            return self.xs[0];
        }
        if p >= 1.0 {
            return self.xs[n - 1];
        }
        let i = self.cum.partition_point(|&c| c <= p).saturating_sub(1).min(n - 2);
        let h = self.xs[i + 1] - self.xs[i];
        let r = p - self.cum[i];
        let a = 0.5 * (self.ps[i + 1] - self.ps[i]) / h;
        let b = self.ps[i];
        // Stable root of a t^2 + b t - r = 0.
        let disc = (b * b + 4.0 * a * r).max(0.0);
        let t = if b + disc.sqrt() > 0.0 { 2.0 * r / (b + disc.sqrt()) } else { 0.0 };
        self.xs[i] + t.clamp(0.0, h)
    }

    fn support(&self) -> Interval {
        Interval::closed(self.xs[0], self.xs[self.xs.len() - 1]).expect("validated in constructor")
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.xs.clone()
    }
}
