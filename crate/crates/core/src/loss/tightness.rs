use serde::{Deserialize, Serialize};

use super::{count_regions, log2_ratio, on_support};
use crate::density::{truncated_support, Density, DEFAULT_MASS_EPS};
use crate::function_model::PwmFunction;

/// Deviation of `r(x)` below which a bound counts as attained.
pub const TIGHTNESS_TOL: f64 = 1e-6;

/// Sampled shape of `r(x)`, the ratio inside the loss integrand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub grid: usize,
    /// Grid points with positive density that entered the statistics.
    pub evaluated: usize,
    /// Largest `|r - mean|` within a region of constant preimage count.
    pub region_max_deviation: f64,
    pub global_mean: f64,
    pub global_max_deviation: f64,
    pub max_deviation_from_l: f64,
    /// Whether every branch has the same image.
    pub images_coincide: bool,
    pub bound1_tight: bool,
    pub bound2_tight: bool,
    pub bound3_tight: bool,
}

/// Evaluates `r(x)` at `grid` midpoints of the truncated support.
pub fn tightness_check(f: &PwmFunction, d: &dyn Density, grid: usize) -> TightnessReport {
    let grid = grid.max(64);
    let t = truncated_support(d, DEFAULT_MASS_EPS);
    let reach = on_support(f, d);
    let regions = count_regions(&reach);
    let breaks = reach.image_breakpoints();

    // (region index, r)
    let mut samples = Vec::with_capacity(grid);
    for j in 0..grid {
        let x = t.lo + (j as f64 + 0.5) / grid as f64 * t.width();
        let Some(k) = f.branch_containing(x) else { continue };
        let y = f.branches()[k].forward(x);
        if breaks.binary_search_by(|b| b.total_cmp(&y)).is_ok() {
            continue;
        }
        let Some(l) = log2_ratio(f, d, x) else { continue };
        let region = regions.partition_point(|r| r.1 < y);
        samples.push((region, l.exp2()));
    }

    let n = samples.len();
    let mean_of = |it: &mut dyn Iterator<Item = f64>| {
        let (s, c) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    };
    let global_mean = mean_of(&mut samples.iter().map(|s| s.1));
    let global_max_deviation = samples.iter().map(|s| (s.1 - global_mean).abs()).fold(0.0, f64::max);
    let l = f.branch_count() as f64;
    let max_deviation_from_l = samples.iter().map(|s| (s.1 - l).abs()).fold(0.0, f64::max);

    let mut region_max_deviation: f64 = 0.0;
    for idx in 0..regions.len() {
        let m = mean_of(&mut samples.iter().filter(|s| s.0 == idx).map(|s| s.1));
        for s in samples.iter().filter(|s| s.0 == idx) {
            region_max_deviation = region_max_deviation.max((s.1 - m).abs());
        }
    }

    let first = reach.branches()[0].image();
    let close = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    let images_coincide =
        reach.branches().iter().all(|b| close(b.image().lo, first.lo) && close(b.image().hi, first.hi));

    let bound1_tight = n > 0 && region_max_deviation <= TIGHTNESS_TOL;
    let bound2_tight = n > 0 && global_max_deviation <= TIGHTNESS_TOL;
    TightnessReport {
        grid,
        evaluated: n,
        region_max_deviation,
        global_mean,
        global_max_deviation,
        max_deviation_from_l,
        images_coincide,
        bound1_tight,
        bound2_tight,
        bound3_tight: bound2_tight && max_deviation_from_l <= TIGHTNESS_TOL && images_coincide,
    }
}
