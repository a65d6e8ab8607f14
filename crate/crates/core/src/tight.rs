//! Functions built from the input CDF, `g_l = b_l F_X + c_l` on equal-mass
//! subdomains. With aligned offsets every bound on the loss is attained.

use std::sync::Arc;

use crate::density::{truncated_support, Density, DEFAULT_MASS_EPS};
use crate::error::{Error, Result};
use crate::function_model::{Branch, Orientation, PwmFunction};
use crate::interval::Interval;

/// Allowed deviation of a subdomain's mass from `1/L`.
pub const MASS_TOL: f64 = 1e-9;

const ZERO_SCAN_POINTS: usize = 4096;

/// `g_l = b_l F_X + c_l` with offsets chosen so every branch image is
/// `[0, 1/L)` (or `(0, 1/L]` for decreasing branches).
///
/// `boundaries` are the `L - 1` interior subdomain ends; by default the
/// `k/L` quantiles.
pub fn build_tight(
    d: Arc<dyn Density>,
    l: usize,
    signs: &[Orientation],
    boundaries: Option<&[f64]>,
) -> Result<PwmFunction> {
    check_shape(l, signs)?;
    let offsets: Vec<f64> = signs
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Orientation::Increasing => -(i as f64) / l as f64,
            Orientation::Decreasing => (i + 1) as f64 / l as f64,
        })
        .collect();
    let cuts = match boundaries {
        Some(b) => checked_boundaries(&*d, l, b)?,
        None => quantile_boundaries(&*d, l),
    };
    assemble(d, l, signs, &offsets, &cuts)
}

/// `g_l = b_l F_X + c_l` with caller-chosen offsets on the `k/L` quantile
/// subdomains.
pub fn build_cdf_piecewise(
    d: Arc<dyn Density>,
    l: usize,
    signs: &[Orientation],
    offsets: &[f64],
) -> Result<PwmFunction> {
    check_shape(l, signs)?;
    if offsets.len() != l || offsets.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("expected {l} finite offsets, got {}", offsets.len())));
    }
    let cuts = quantile_boundaries(&*d, l);
    assemble(d, l, signs, offsets, &cuts)
}

fn check_shape(l: usize, signs: &[Orientation]) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    if signs.len() != l {
        return Err(Error::InvalidParameter(format!("expected {l} signs, got {}", signs.len())));
    }
    Ok(())
}

fn quantile_boundaries(d: &dyn Density, l: usize) -> Vec<f64> {
    (1..l).map(|k| d.quantile(k as f64 / l as f64)).collect()
}

fn checked_boundaries(d: &dyn Density, l: usize, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() + 1 != l {
        return Err(Error::InvalidParameter(format!("expected {} boundaries, got {}", l - 1, b.len())));
    }
    let s = d.support();
    let mut ends = vec![s.lo];
    ends.extend_from_slice(b);
    ends.push(s.hi);
    for (k, w) in ends.windows(2).enumerate() {
        let mass = d.cdf(w[1]) - d.cdf(w[0]);
        if !(w[0] < w[1]) || (mass - 1.0 / l as f64).abs() > MASS_TOL {
            return Err(Error::UnequalMasses(format!(
                "subdomain {} = [{}, {}) has mass {mass}, expected 1/{l}",
                k + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(b.to_vec())
}

/// Rejects densities that vanish inside their support.
fn check_no_interior_zero(d: &dyn Density) -> Result<()> {
    let t = truncated_support(d, DEFAULT_MASS_EPS);
    let mut probes: Vec<f64> =
        (0..ZERO_SCAN_POINTS).map(|j| t.lo + (j as f64 + 0.5) / ZERO_SCAN_POINTS as f64 * t.width()).collect();
    probes.extend(d.breakpoints().into_iter().filter(|&x| x > t.lo && x < t.hi));
    match probes.into_iter().find(|&x| !(d.pdf(x) > 0.0)) {
        Some(x) => Err(Error::InteriorZeroDensity(x)),
        None => Ok(()),
    }
}

fn assemble(
    d: Arc<dyn Density>,
    l: usize,
    signs: &[Orientation],
    offsets: &[f64],
    cuts: &[f64],
) -> Result<PwmFunction> {
    check_no_interior_zero(&*d)?;
    let s = d.support();
    let mut ends = vec![s.lo];
    ends.extend_from_slice(cuts);
    ends.push(s.hi);

    let lf = l as f64;
    let mut branches = Vec::with_capacity(l);
    for i in 0..l {
        let domain = Interval::new(
            ends[i],
            ends[i + 1],
            if i == 0 { s.lo_closed } else { true },
            if i + 1 == l { s.hi_closed } else { false },
        )?;
        let (b, c) = (signs[i], offsets[i]);
        let (p_lo, p_hi) = (i as f64 / lf, (i + 1) as f64 / lf);
        let image = match b {
            Orientation::Increasing => Interval::new(p_lo + c, p_hi + c, domain.lo_closed, domain.hi_closed)?,
            Orientation::Decreasing => Interval::new(c - p_hi, c - p_lo, domain.hi_closed, domain.lo_closed)?,
        };
        let sign = b.sign();
        let (df, dd, di) = (Arc::clone(&d), Arc::clone(&d), Arc::clone(&d));
        let (lo, hi) = (domain.lo, domain.hi);
        branches.push(
            Branch::from_parts(
                domain,
                b,
                Arc::new(move |x| sign * df.cdf(x) + c),
                Arc::new(move |x| sign * dd.pdf(x)),
                image,
            )
            .with_inverse(Arc::new(move |y| di.quantile(sign * (y - c)).clamp(lo, hi))),
        );
    }
    PwmFunction::new(branches)
}
