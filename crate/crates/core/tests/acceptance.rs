//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{LOG2_E, PI};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use infoloss::cascade::verify_additivity;
use infoloss::density::{normal, uniform, uniform_on, Density};
use infoloss::estimators::{histogram_oracle, mc_loss, HistogramConfig, McConfig};
use infoloss::function_model::{
    cosine, cubic, from_pieces, from_polynomial, identity, magnitude, sqlin, Orientation, PwmFunction,
};
use infoloss::loss::{bounds, info_loss, info_loss_via_w, tightness_check, QuadratureConfig};
use infoloss::tight::{build_cdf_piecewise, build_tight};
use infoloss::{Interval, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Failures collected while checking many points of one criterion.
#[derive(Default)]
struct Failures(Vec<String>);

impl Failures {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn outcome(self, checked: usize, summary: String) -> Outcome {
        if self.0.is_empty() {
            Outcome::new(true, format!("{checked} checks; {summary}"))
        } else {
            let shown: Vec<_> = self.0.iter().take(4).cloned().collect();
            Outcome::new(false, format!("{} of {checked} checks failed: {}", self.0.len(), shown.join("; ")))
        }
    }
}

// Independent normal-tail oracle: Taylor series for erf near zero, a
// continued fraction for erfc in the tail.
fn erfc_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_oracle(-x);
    }
    if x < 2.5 {
        let (mut sum, mut term, mut n) = (0.0, x, 0.0f64);
        // term = (-1)^n x^(2n+1) / n!
        loop {
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
            n += 1.0;
            term *= -x * x / n;
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        let mut t = x;
        for k in (1..=300).rev() {
            t = x + (k as f64 / 2.0) / t;
        }
        (-x * x).exp() / (PI.sqrt() * t)
    }
}

fn q_function(z: f64) -> f64 {
    0.5 * erfc_oracle(z / 2f64.sqrt())
}

fn sqlin_closed_form(a: f64) -> f64 {
    let s = a.sqrt();
    (4.0 * a + 4.0 * s + 1.0) / (8.0 * a) * (2.0 * s + 1.0).log2() - (2.0 * s).log2() / 2.0 - LOG2_E / (4.0 * s)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn ac1() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = QuadratureConfig::default();
    let f = magnitude();
    let mut fails = Failures::default();
    let mut checked = 0;
    for (name, d) in [("normal(0,1)", normal(1.0)?), ("uniform[-1,1]", uniform(1.0)?)] {
        for r in [info_loss(&f, &*d, &cfg)?, info_loss_via_w(&f, &*d, &cfg)?] {
            checked += 4;
            fails.check((r.loss_bits - 1.0).abs() <= 1e-3, || format!("{name} {:?}: loss {}", r.method, r.loss_bits));
            for (k, b) in [r.bound1_bits, r.bound2_bits, r.bound3_bits].into_iter().enumerate() {
                fails.check((b - 1.0).abs() <= 1e-3, || format!("{name}: bound{} = {b}", k + 1));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    checked += 1;
    fails.check(secs < 1.0, || format!("runtime {secs:.3} s"));
    Ok(fails.outcome(checked, format!("runtime {secs:.3} s")))
}

fn ac2() -> Result<Outcome> {
    let cfg = QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() };
    let f = sqlin();
    let mut fails = Failures::default();
    let mut checked = 0;
    let d1 = uniform(1.0)?;
    let at_one = info_loss(&f, &*d1, &cfg)?;
    checked += 1;
    fails.check((at_one.loss_bits - 0.922).abs() <= 1e-3, || format!("a=1 loss {}", at_one.loss_bits));
    for a in [1.0, 2.0, 4.0] {
        let d = uniform(a)?;
        let want = sqlin_closed_form(a);
        for r in [info_loss(&f, &*d, &cfg)?, info_loss_via_w(&f, &*d, &cfg)?] {
            checked += 1;
            fails.check((r.loss_bits - want).abs() <= 1e-4, || {
                format!("a={a} {:?}: {} vs closed form {want}", r.method, r.loss_bits)
            });
        }
        let b = bounds(&f, &*d);
        let s = a.sqrt();
        checked += 2;
        fails.check((b.bound1 - (1.0 + s) / (2.0 * s)).abs() <= 1e-6, || format!("a={a} bound1 {}", b.bound1));
        fails.check((b.bound2 - ((3.0 * s + 1.0) / (2.0 * s)).log2()).abs() <= 1e-6, || {
            format!("a={a} bound2 {}", b.bound2)
        });
    }
    let b = bounds(&f, &*d1);
    for (k, v) in [b.bound1, b.bound2, b.bound3].into_iter().enumerate() {
        checked += 1;
        fails.check((v - 1.0).abs() <= 1e-6, || format!("a=1 bound{} = {v}", k + 1));
    }
    Ok(fails.outcome(checked, format!("a=1 loss {:.6} bits", at_one.loss_bits)))
}

fn ac3() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = QuadratureConfig { abs_tol: 1e-7, ..QuadratureConfig::default() };
    let f = cubic(100.0)?;
    let mut fails = Failures::default();
    let mut checked = 0;
    let mut worst_z: f64 = 0.0;
    for (i, sigma) in log_grid(1.0, 100.0, 25).into_iter().enumerate() {
        let d = normal(sigma)?;
        let r = info_loss(&f, &*d, &cfg)?;
        let want = (1.0 - 2.0 * q_function(20.0 / (3f64.sqrt() * sigma))) * 3f64.log2();
        checked += 3;
        fails.check((r.bound1_bits - want).abs() <= 1e-6, || {
            format!("sigma={sigma:.4}: bound1 {} vs {want}", r.bound1_bits)
        });
        fails.check(r.loss_bits <= r.bound1_bits, || {
            format!("sigma={sigma:.4}: loss {} above bound1 {}", r.loss_bits, r.bound1_bits)
        });
        let mc = mc_loss(&f, &*d, &McConfig::new(1_000_000, 20_000 + i as u64))?;
        let gap = (mc.estimate_bits - r.loss_bits).abs();
        if mc.stderr_bits > 0.0 {
            worst_z = worst_z.max(gap / mc.stderr_bits);
        }
        fails.check(gap <= 4.0 * mc.stderr_bits, || {
            format!("sigma={sigma:.4}: mc {} +- {} vs {}", mc.estimate_bits, mc.stderr_bits, r.loss_bits)
        });
    }
    let secs = start.elapsed().as_secs_f64();
    checked += 1;
    fails.check(secs < 60.0, || format!("runtime {secs:.1} s"));
    Ok(fails.outcome(checked, format!("max |mc - quad| = {worst_z:.2} stderr, runtime {secs:.1} s")))
}

type Pair = (String, PwmFunction, Arc<dyn Density>);

fn catalog_pairs() -> Result<Vec<Pair>> {
    let mut pairs: Vec<Pair> = vec![
        ("magnitude/uniform".into(), magnitude(), uniform(1.0)?),
        ("magnitude/normal".into(), magnitude(), normal(1.0)?),
        ("sqlin/uniform".into(), sqlin(), uniform(1.0)?),
        ("sqlin/normal".into(), sqlin(), normal(1.0)?),
        ("cubic/uniform".into(), cubic(100.0)?, uniform(15.0)?),
        ("cubic/normal".into(), cubic(100.0)?, normal(10.0)?),
        ("identity/uniform".into(), identity(), uniform(1.0)?),
        ("identity/normal".into(), identity(), normal(1.0)?),
        ("cosine2/uniform".into(), cosine(2), uniform_on(0.0, 2.0 * PI)?),
        ("cosine3/uniform".into(), cosine(3), uniform_on(0.0, 3.0 * PI)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for k in 0..3 {
        let l = rng.random_range(2..=5usize);
        let signs: Vec<Orientation> = (0..l)
            .map(|_| if rng.random_bool(0.5) { Orientation::Increasing } else { Orientation::Decreasing })
            .collect();
        let offsets: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = if k % 2 == 0 { uniform(1.0)? } else { normal(1.0)? };
        pairs.push((format!("random-cdf{k}/L={l}"), build_cdf_piecewise(d.clone(), l, &signs, &offsets)?, d));
    }
    Ok(pairs)
}

fn ac4() -> Result<Outcome> {
    let cfg = QuadratureConfig::default();
    let pairs = catalog_pairs()?;
    let mut fails = Failures::default();
    let mut worst: f64 = 0.0;
    for (name, f, d) in &pairs {
        let x = info_loss(f, &**d, &cfg)?;
        let w = info_loss_via_w(f, &**d, &cfg)?;
        let gap = (x.loss_bits - w.loss_bits).abs();
        let tol = x.error_estimate_bits + w.error_estimate_bits;
        worst = worst.max(gap);
        fails.check(gap <= tol, || format!("{name}: |{} - {}| > {tol:e}", x.loss_bits, w.loss_bits));
    }
    Ok(fails.outcome(pairs.len(), format!("largest route gap {worst:.2e} bits")))
}

fn ac5() -> Result<Outcome> {
    let cfg = QuadratureConfig::default();
    let pairs = catalog_pairs()?;
    let mut fails = Failures::default();
    // Slack for the bounds, which are exact up to root-finding precision.
    let bound_slack = 1e-9;
    for (name, f, d) in &pairs {
        let r = info_loss(f, &**d, &cfg)?;
        let log_l = (f.branch_count() as f64).log2();
        let ok = r.loss_bits <= r.bound1_bits + r.error_estimate_bits
            && r.bound1_bits <= r.bound2_bits + bound_slack
            && r.bound2_bits <= log_l + bound_slack
            && (r.bound3_bits - log_l).abs() <= bound_slack;
        fails.check(ok, || {
            format!("{name}: {} <= {} <= {} <= {log_l} violated", r.loss_bits, r.bound1_bits, r.bound2_bits)
        });
    }
    Ok(fails.outcome(pairs.len(), "loss <= bound1 <= bound2 <= log2 L".into()))
}

fn ac6() -> Result<Outcome> {
    let cfg = QuadratureConfig::default();
    let shifted = from_pieces(&[
        (Interval::open(f64::NEG_INFINITY, 0.25)?, vec![0.25, -1.0]),
        (Interval::closed_open(0.25, f64::INFINITY)?, vec![-0.25, 1.0]),
    ])?;
    let square_minus = from_polynomial(&[0.0, -1.0, 1.0], Interval::closed_open(0.0, f64::INFINITY)?)?;
    let cases: Vec<(&str, PwmFunction, PwmFunction, Arc<dyn Density>)> = vec![
        ("magnitude then identity", magnitude(), identity(), normal(1.0)?),
        ("magnitude twice", magnitude(), magnitude(), normal(1.0)?),
        ("sqlin then shifted magnitude", sqlin(), shifted, uniform(1.0)?),
        ("cosine then magnitude", cosine(2), magnitude(), uniform_on(0.0, 2.0 * PI)?),
        ("magnitude then y^2 - y", magnitude(), square_minus, normal(1.0)?),
        ("cubic then magnitude", cubic(100.0)?, magnitude(), normal(10.0)?),
    ];
    let mut fails = Failures::default();
    let mut worst: f64 = 0.0;
    let n = cases.len();
    for (name, g, h, d) in cases {
        let r = verify_additivity(Arc::new(g), Arc::new(h), d, &cfg)?;
        worst = worst.max(r.gap_bits);
        fails.check(r.passed, || format!("{name}: gap {:e} > {:e}", r.gap_bits, r.tolerance_bits));
    }
    Ok(fails.outcome(n, format!("largest gap {worst:.2e} bits")))
}

fn ac7() -> Result<Outcome> {
    let cfg = QuadratureConfig::default();
    let mut fails = Failures::default();
    let mut checked = 0;
    let mut worst_r: f64 = 0.0;
    for (name, d) in [("uniform", uniform(1.0)?), ("normal", normal(1.0)?)] {
        for l in 1..=8usize {
            let f = build_tight(d.clone(), l, &vec![Orientation::Increasing; l], None)?;
            let r = info_loss(&f, &*d, &cfg)?;
            let t = tightness_check(&f, &*d, 4096);
            let want = (l as f64).log2();
            worst_r = worst_r.max(t.max_deviation_from_l);
            checked += 2;
            fails.check((r.loss_bits - want).abs() <= 1e-3, || format!("{name} L={l}: loss {}", r.loss_bits));
            fails.check(t.max_deviation_from_l <= 1e-6, || {
                format!("{name} L={l}: r deviates by {:e}", t.max_deviation_from_l)
            });
        }
    }
    Ok(fails.outcome(checked, format!("max |r - L| = {worst_r:.2e}")))
}

fn ac8() -> Result<Outcome> {
    let f = cosine(3);
    let d = uniform_on(0.0, 3.0 * PI)?;
    let want = 3f64.log2();
    let r = info_loss(&f, &*d, &QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() })?;
    let levels = histogram_oracle(
        &f,
        &*d,
        &HistogramConfig { y_bins: 8, refinement_levels: 10 },
        &McConfig::new(10_000_000, 8),
    )?;
    let finest = levels.last().expect("at least one level");
    let mut fails = Failures::default();
    fails.check((r.loss_bits - want).abs() <= 1e-4, || format!("quadrature {}", r.loss_bits));
    fails.check(finest.bins == 1 << 12, || format!("finest level has {} bins", finest.bins));
    fails.check((finest.estimate_bits - r.loss_bits).abs() <= 5e-3, || {
        format!("histogram {} vs quadrature {}", finest.estimate_bits, r.loss_bits)
    });
    Ok(fails.outcome(
        3,
        format!("quadrature {:.8}, histogram {:.6} at {} bins", r.loss_bits, finest.estimate_bits, finest.bins),
    ))
}

fn ac9() -> Result<Outcome> {
    let cases: Vec<(&str, PwmFunction, Arc<dyn Density>)> =
        vec![("sqlin/uniform", sqlin(), uniform(1.0)?), ("cubic/normal", cubic(100.0)?, normal(10.0)?)];
    let mut fails = Failures::default();
    for (name, f, d) in &cases {
        let runs = [1, 2, 8]
            .into_iter()
            .map(|w| mc_loss(f, &**d, &McConfig::new(200_000, 99).with_workers(w)))
            .collect::<Result<Vec<_>>>()?;
        let same = runs.iter().all(|r| {
            r.estimate_bits.to_bits() == runs[0].estimate_bits.to_bits()
                && r.stderr_bits.to_bits() == runs[0].stderr_bits.to_bits()
        });
        fails.check(same, || format!("{name}: estimates differ across worker counts"));
    }
    Ok(fails.outcome(cases.len(), "1, 2 and 8 workers agree bit for bit".into()))
}

type Criterion = (&'static str, &'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("AC1", "magnitude loses one bit", ac1),
        ("AC2", "square/linear map against closed form", ac2),
        ("AC3", "cubic sweep: bound formula, ordering, Monte Carlo", ac3),
        ("AC4", "x-route and posterior route agree", ac4),
        ("AC5", "bound chain ordering", ac5),
        ("AC6", "cascade additivity", ac6),
        ("AC7", "tight functions reach log2 L", ac7),
        ("AC8", "cosine against histogram oracle", ac8),
        ("AC9", "Monte Carlo independent of worker count", ac9),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{id} {verdict} {title} ({}; {:.2} s)", outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
