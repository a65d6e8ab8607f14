//! Stochastic cross-checks of the loss: a Monte Carlo average of the loss
//! integrand and a plug-in estimate of `H(W|Y)` on quantized outputs.
//!
//! Sample `i` always draws from its own ChaCha stream keyed by
//! `(seed, i)`, and partial sums are merged in block order, so results do not
//! depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::function_model::PwmFunction;
use crate::loss::{check_inputs, log2_ratio};

/// Samples per work unit. Fixed so the merge order never changes.
const BLOCK: usize = 4096;

/// Largest tolerated fraction of samples with a non-finite integrand.
pub const MAX_REJECTION_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub n_workers: usize,
}

fn default_workers() -> usize {
    1
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed, n_workers: 1 }
    }

    pub fn with_workers(mut self, n_workers: usize) -> Self {
        self.n_workers = n_workers;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_samples < 1000 {
            return Err(Error::InvalidParameter(format!(
                "mc: n_samples must be at least 1000, got {}",
                self.n_samples
            )));
        }
        if self.n_workers == 0 {
            return Err(Error::InvalidParameter("mc: n_workers must be at least 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.n_workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("mc: cannot start workers: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub estimate_bits: f64,
    pub stderr_bits: f64,
    pub n_samples: usize,
    pub rejected: usize,
}

impl McResult {
    pub fn rejection_fraction(&self) -> f64 {
        self.rejected as f64 / self.n_samples as f64
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
    rejected: usize,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        let n = self.n + other.n;
        if n == 0 {
            return Moments { rejected: self.rejected + other.rejected, ..Moments::default() };
        }
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
            rejected: self.rejected + other.rejected,
        }
    }
}

/// Generator for sample `index`; the base generator is seeded once.
fn stream(base: &ChaCha8Rng, index: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(index as u64);
    rng
}

/// Monte Carlo estimate of `E[log2 r(X)]`, which equals `H(X|Y)`.
pub fn mc_loss(f: &PwmFunction, d: &dyn Density, cfg: &McConfig) -> Result<McResult> {
    cfg.check()?;
    check_inputs(f, d)?;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_samples;
    let blocks = n.div_ceil(BLOCK);

    let run_block = |b: usize| {
        let mut m = Moments::default();
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            let mut rng = stream(&base, i);
            let x = d.sample(&mut rng);
            match log2_ratio(f, d, x) {
                Some(t) if t.is_finite() => m.push(t),
                _ => m.rejected += 1,
            }
        }
        m
    };
    let parts: Vec<Moments> = cfg.pool()?.install(|| (0..blocks).into_par_iter().map(run_block).collect());
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);

    let result = McResult {
        estimate_bits: total.mean,
        stderr_bits: if total.n > 1 {
            (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt()
        } else {
            f64::INFINITY
        },
        n_samples: n,
        rejected: total.rejected,
    };
    if total.n == 0 || result.rejection_fraction() >= MAX_REJECTION_FRACTION {
        return Err(Error::TooManyRejections { rejected: total.rejected as u64, total: n as u64 });
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    /// Bins at level 0; each further level doubles them.
    pub y_bins: usize,
    pub refinement_levels: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { y_bins: 8, refinement_levels: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramLevel {
    pub level: usize,
    pub bins: usize,
    pub estimate_bits: f64,
}

/// Plug-in `H(W|Y_hat)` where `Y_hat` quantizes `Y = g(X)` into equal-count
/// bins, one estimate per refinement level.
///
/// Bin edges sit between sample ranks, so no bin is ever empty; when a level
/// asks for more bins than samples it is capped at one sample per bin.
pub fn histogram_oracle(
    f: &PwmFunction,
    d: &dyn Density,
    cfg: &HistogramConfig,
    mc: &McConfig,
) -> Result<Vec<HistogramLevel>> {
    mc.check()?;
    if cfg.y_bins < 8 {
        return Err(Error::InvalidParameter(format!("histogram: y_bins must be at least 8, got {}", cfg.y_bins)));
    }
    if cfg.refinement_levels == 0 || cfg.refinement_levels > 40 {
        return Err(Error::InvalidParameter("histogram: refinement_levels must be in 1..=40".into()));
    }
    check_inputs(f, d)?;
    let base = ChaCha8Rng::seed_from_u64(mc.seed);
    let n = mc.n_samples;

    let mut samples = vec![(0.0f64, 0u32); n];
    mc.pool()?.install(|| {
        samples.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
            for (j, slot) in chunk.iter_mut().enumerate() {
                let mut rng = stream(&base, b * BLOCK + j);
                let x = d.sample(&mut rng);
                let k = f
                    .branch_containing(x)
                    .unwrap_or_else(|| f.branches().partition_point(|br| br.domain().hi < x).min(f.branch_count() - 1));
                *slot = (f.branches()[k].forward(x), k as u32);
            }
        });
        samples.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    });

    let l = f.branch_count();
    let mut counts = vec![0usize; l];
    let levels = (0..cfg.refinement_levels)
        .map(|level| {
            let bins = cfg.y_bins.saturating_mul(1 << level).min(n);
            let mut h = 0.0;
            for j in 0..bins {
                let (lo, hi) = (j * n / bins, (j + 1) * n / bins);
                counts.iter_mut().for_each(|c| *c = 0);
                for s in &samples[lo..hi] {
                    counts[s.1 as usize] += 1;
                }
                let size = (hi - lo) as f64;
                h += counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 * (size / c as f64).log2()).sum::<f64>();
            }
            HistogramLevel { level, bins, estimate_bits: h / n as f64 }
        })
        .collect();
    Ok(levels)
}
