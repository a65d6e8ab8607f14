//! Chains of memoryless stages: composition, per-stage losses and the
//! additivity check `H(X|Z) = H(X|Y) + H(Y|Z)`.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::density::{pushforward, Density};
use crate::error::{Error, Result};
use crate::function_model::{Branch, Orientation, PwmFunction};
use crate::interval::Interval;
use crate::loss::{info_loss, LossReport, QuadratureConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub stage_losses_bits: Vec<f64>,
    pub stage_errors_bits: Vec<f64>,
    pub total_bits: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    pub direct_bits: f64,
    pub first_stage_bits: f64,
    pub second_stage_bits: f64,
    pub gap_bits: f64,
    /// Sum of the three quadrature error estimates.
    pub tolerance_bits: f64,
    pub passed: bool,
}

/// `h o g` as a piecewise monotone function. Each branch of `g` is cut at
/// the preimages of the branch boundaries of `h` inside its image.
pub fn compose(g: &PwmFunction, h: &PwmFunction) -> Result<PwmFunction> {
    let mut cuts: Vec<f64> =
        h.branches().iter().flat_map(|b| [b.domain().lo, b.domain().hi]).filter(|v| v.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut out = Vec::new();
    for (k, gb) in g.branches().iter().enumerate() {
        let img = *gb.image();
        if !h.domain_covers(&img) || !h.domain_hull().covers(&img) {
            return Err(Error::Composition(format!(
                "image {img} of branch {k} is not inside the domain of the next stage"
            )));
        }
        let mut ys = vec![img.lo];
        ys.extend(cuts.iter().copied().filter(|&c| c > img.lo && c < img.hi));
        ys.push(img.hi);
        for w in ys.windows(2) {
            out.push(compose_piece(gb, h, w[0], w[1])?);
        }
    }
    // Restore the left-to-right order of subdomains.
    out.sort_by(|a, b| a.domain().lo.total_cmp(&b.domain().lo));
    PwmFunction::new(out)
}

/// The composite branch of `gb` over the part of its domain mapped into the
/// output interval `(ya, yb)`.
fn compose_piece(gb: &Branch, h: &PwmFunction, ya: f64, yb: f64) -> Result<Branch> {
    let probe = Interval::open(ya, yb)?.interior_point();
    let j = h
        .branch_containing(probe)
        .ok_or_else(|| Error::Composition(format!("no branch of the next stage contains {probe}")))?;
    let hb = h.branches()[j].clone();

    let dom = *gb.domain();
    let img = *gb.image();
    let increasing = gb.orientation() == Orientation::Increasing;
    let x_at = |y: f64| {
        let (for_lo, for_hi) = if increasing { (dom.lo, dom.hi) } else { (dom.hi, dom.lo) };
        if y == img.lo {
            for_lo
        } else if y == img.hi {
            for_hi
        } else {
            gb.inverse(y)
        }
    };
    let (xa, xb) = (x_at(ya), x_at(yb));
    let (lo, hi) = if xa < xb { (xa, xb) } else { (xb, xa) };
    let piece = Interval::new(
        lo,
        hi,
        if lo == dom.lo { dom.lo_closed } else { true },
        if hi == dom.hi { dom.hi_closed } else { false },
    )
    .map_err(|_| Error::Composition(format!("empty piece between outputs {ya} and {yb}")))?;

    let hdom = *hb.domain();
    let himg = *hb.image();
    let h_inc = hb.orientation() == Orientation::Increasing;
    let h_at = |y: f64| {
        if y == hdom.lo {
            if h_inc {
                himg.lo
            } else {
                himg.hi
            }
        } else if y == hdom.hi {
            if h_inc {
                himg.hi
            } else {
                himg.lo
            }
        } else {
            hb.forward(y)
        }
    };
    let orientation = gb.orientation().compose(hb.orientation());
    let (za, zb) = if lo == xa { (h_at(ya), h_at(yb)) } else { (h_at(yb), h_at(ya)) };
    let image = match orientation {
        Orientation::Increasing => Interval::new(za, zb, piece.lo_closed, piece.hi_closed),
        Orientation::Decreasing => Interval::new(zb, za, piece.hi_closed, piece.lo_closed),
    }
    .map_err(|_| Error::Composition(format!("composite is not strictly monotone on {piece}")))?;

    let (gf, gd) = (gb.forward_fn(), gb.derivative_fn());
    let (hf, hd) = (hb.forward_fn(), hb.derivative_fn());
    let gf2 = gf.clone();
    let (g_inv, h_inv) = (gb.clone(), hb);
    Ok(Branch::from_parts(
        piece,
        orientation,
        Arc::new(move |x| hf(gf(x))),
        Arc::new(move |x| hd(gf2(x)) * gd(x)),
        image,
    )
    .with_inverse(Arc::new(move |z| g_inv.inverse(h_inv.inverse(z)))))
}

/// Stage `i` sees the push-forward of `d` through stages `0..i`.
pub fn cascade_loss(stages: &[Arc<PwmFunction>], d: Arc<dyn Density>, cfg: &QuadratureConfig) -> Result<CascadeReport> {
    if stages.is_empty() {
        return Err(Error::InvalidParameter("a cascade needs at least one stage".into()));
    }
    let mut reports: Vec<LossReport> = Vec::with_capacity(stages.len());
    let mut input = d;
    for (i, stage) in stages.iter().enumerate() {
        let mismatch = |e: Error| match e {
            Error::SupportMismatch { .. } if i > 0 => {
                Error::Composition(format!("output of stage {} does not fit the domain of stage {}: {e}", i, i + 1))
            }
            other => other,
        };
        reports.push(info_loss(stage, &*input, cfg).map_err(mismatch)?);
        if i + 1 < stages.len() {
            input = Arc::new(pushforward(Arc::clone(stage), input).map_err(mismatch)?);
        }
    }
    let stage_losses_bits: Vec<f64> = reports.iter().map(|r| r.loss_bits).collect();
    Ok(CascadeReport {
        total_bits: stage_losses_bits.iter().sum(),
        stage_losses_bits,
        stage_errors_bits: reports.iter().map(|r| r.error_estimate_bits).collect(),
        converged: reports.iter().all(|r| r.converged),
    })
}

/// Loss of `h o g` computed directly against the sum of the stage losses.
pub fn verify_additivity(
    g: Arc<PwmFunction>,
    h: Arc<PwmFunction>,
    d: Arc<dyn Density>,
    cfg: &QuadratureConfig,
) -> Result<AdditivityReport> {
    let composite = compose(&g, &h)?;
    let direct = info_loss(&composite, &*d, cfg)?;
    let chain = cascade_loss(&[g, h], d, cfg)?;
    let sum = chain.total_bits;
    let gap_bits = (direct.loss_bits - sum).abs();
    let tolerance_bits = direct.error_estimate_bits + chain.stage_errors_bits.iter().sum::<f64>();
    Ok(AdditivityReport {
        direct_bits: direct.loss_bits,
        first_stage_bits: chain.stage_losses_bits[0],
        second_stage_bits: chain.stage_losses_bits[1],
        gap_bits,
        tolerance_bits,
        passed: gap_bits <= tolerance_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{normal, uniform, uniform_on};
    use crate::function_model::{cosine, from_pieces, from_polynomial, identity, magnitude, sqlin};
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn magnitude_then_identity() {
        let r = cascade_loss(&[Arc::new(magnitude()), Arc::new(identity())], normal(1.0).unwrap(), &cfg()).unwrap();
        assert!((r.stage_losses_bits[0] - 1.0).abs() < 1e-6);
        assert_eq!(r.stage_losses_bits[1], 0.0);
        assert_eq!(r.total_bits, r.stage_losses_bits.iter().sum::<f64>());
    }

    #[test]
    fn magnitude_twice() {
        let r = cascade_loss(&[Arc::new(magnitude()), Arc::new(magnitude())], normal(1.0).unwrap(), &cfg()).unwrap();
        assert!((r.stage_losses_bits[0] - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.stage_losses_bits[1].abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn mismatched_stages_are_rejected() {
        let narrow = crate::function_model::identity_on(Interval::closed(0.0, 1.0).unwrap()).unwrap();
        let e = cascade_loss(&[Arc::new(magnitude()), Arc::new(narrow)], normal(1.0).unwrap(), &cfg()).unwrap_err();
        assert!(matches!(e, Error::Composition(_)), "{e:?}");
    }

    #[test]
    fn composite_structure() {
        let c = compose(&cosine(2), &magnitude()).unwrap();
        assert_eq!(c.branch_count(), 4);
        assert!(c.validate(256).passed());
        for x in [0.3, 1.0, 2.0, 4.0, 5.5] {
            assert!((c.eval(x).unwrap() - x.cos().abs()).abs() < 1e-15);
        }
        let sq = from_polynomial(&[0.0, 0.0, 1.0], Interval::real_line()).unwrap();
        let c = compose(&sq, &magnitude()).unwrap();
        assert_eq!(c.branch_count(), 2);
    }

    #[test]
    fn additivity_examples() {
        let shifted = from_pieces(&[
            (Interval::open(f64::NEG_INFINITY, 0.25).unwrap(), vec![0.25, -1.0]),
            (Interval::closed_open(0.25, f64::INFINITY).unwrap(), vec![-0.25, 1.0]),
        ])
        .unwrap();
        let cases: Vec<(PwmFunction, PwmFunction, Arc<dyn Density>)> = vec![
            (magnitude(), identity(), normal(1.0).unwrap()),
            (sqlin(), shifted, uniform(1.0).unwrap()),
            (cosine(2), magnitude(), uniform_on(0.0, 2.0 * PI).unwrap()),
        ];
        for (g, h, d) in cases {
            let r = verify_additivity(Arc::new(g), Arc::new(h), d, &cfg()).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }
}
