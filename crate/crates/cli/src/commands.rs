use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use infoloss::cascade::{cascade_loss, compose, CascadeReport};
use infoloss::density::{truncated_support, DEFAULT_MASS_EPS};
use infoloss::estimators::{histogram_oracle, mc_loss, HistogramLevel, McResult};
use infoloss::function_model::PwmFunction;
use infoloss::loss::{info_loss, info_loss_via_w, tightness_check, LossReport, TightnessReport};

use crate::config::{set_path, Config};
use crate::error::CliError;
use crate::output::{num, save_json, Table};

const TIGHTNESS_GRID: usize = 4096;

/// How a command finished; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Failed => 3,
            Status::NotConverged => 4,
        }
    }

    fn from_converged(c: bool) -> Self {
        if c {
            Status::Ok
        } else {
            Status::NotConverged
        }
    }
}

pub struct Outputs {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Outputs {
    fn json<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        match &self.json {
            Some(p) => save_json(p, value),
            None => Ok(()),
        }
    }

    fn csv(&self, table: &Table) -> Result<(), CliError> {
        match &self.csv {
            Some(p) => table.save(p),
            None => Ok(()),
        }
    }

    /// Writes a table that is the command's main result: to the CSV path if
    /// given, else to stdout. The text summary goes wherever the table does
    /// not.
    fn primary(&self, table: &Table) -> Result<Box<dyn Write>, CliError> {
        match &self.csv {
            Some(p) => {
                table.save(p)?;
                Ok(Box::new(io::stdout()))
            }
            None => {
                table.write_csv(io::stdout().lock())?;
                Ok(Box::new(io::stderr()))
            }
        }
    }
}

fn out_err(e: io::Error) -> CliError {
    CliError::Output(e.to_string())
}

fn loss_line(w: &mut dyn Write, label: &str, r: &LossReport) -> io::Result<()> {
    writeln!(
        w,
        "{label:<22} {} bits  (error estimate {}{})",
        num(r.loss_bits),
        num(r.error_estimate_bits),
        if r.converged { "" } else { ", NOT CONVERGED" }
    )
}

fn bounds_lines(w: &mut dyn Write, r: &LossReport) -> io::Result<()> {
    writeln!(w, "{:<22} {} bits", "bound1 (counts)", num(r.bound1_bits))?;
    writeln!(w, "{:<22} {} bits", "bound2 (image masses)", num(r.bound2_bits))?;
    writeln!(w, "{:<22} {} bits", "bound3 (log2 L)", num(r.bound3_bits))?;
    writeln!(w, "{:<22} {}", "branches L", r.branch_count)?;
    writeln!(w, "{:<22} {}", "bijective mass P_b", num(r.bijective_mass))
}

fn tightness_line(w: &mut dyn Write, t: &TightnessReport) -> io::Result<()> {
    let tight: Vec<&str> = [(t.bound1_tight, "bound1"), (t.bound2_tight, "bound2"), (t.bound3_tight, "bound3")]
        .into_iter()
        .filter_map(|(ok, n)| ok.then_some(n))
        .collect();
    writeln!(
        w,
        "{:<22} max |r - L| {}, within regions {}; attained: {}",
        "tightness",
        num(t.max_deviation_from_l),
        num(t.region_max_deviation),
        if tight.is_empty() { "none".to_string() } else { tight.join(", ") }
    )
}

fn report_row(r: &LossReport) -> Vec<String> {
    vec![
        serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        num(r.loss_bits),
        num(r.error_estimate_bits),
        num(r.bound1_bits),
        num(r.bound2_bits),
        num(r.bound3_bits),
        r.branch_count.to_string(),
        num(r.bijective_mass),
        r.converged.to_string(),
    ]
}

const REPORT_HEADER: [&str; 9] =
    ["method", "loss_bits", "error_estimate_bits", "bound1", "bound2", "bound3", "L", "bijective_mass", "converged"];

#[derive(Serialize)]
struct LossOutput {
    x_route: LossReport,
    w_route: LossReport,
    tightness: TightnessReport,
}

pub fn loss(cfg: &Config, out: &Outputs) -> Result<Status, CliError> {
    let f = cfg.function()?;
    let d = cfg.density()?;
    let x = info_loss(&f, &*d, &cfg.quadrature)?;
    let w = info_loss_via_w(&f, &*d, &cfg.quadrature)?;
    let t = tightness_check(&f, &*d, TIGHTNESS_GRID);

    let mut o = io::stdout().lock();
    loss_line(&mut o, "loss (x route)", &x).map_err(out_err)?;
    loss_line(&mut o, "loss (posterior route)", &w).map_err(out_err)?;
    bounds_lines(&mut o, &x).map_err(out_err)?;
    tightness_line(&mut o, &t).map_err(out_err)?;

    let mut table = Table::new(&REPORT_HEADER);
    table.push(report_row(&x));
    table.push(report_row(&w));
    out.csv(&table)?;
    out.json(&LossOutput { x_route: x.clone(), w_route: w.clone(), tightness: t })?;
    Ok(Status::from_converged(x.converged && w.converged))
}

const SWEEP_HEADER: [&str; 8] =
    ["param", "loss_quadrature", "loss_mc", "mc_stderr", "bound1", "bound2", "bound3", "status"];

struct SweepPoint {
    loss: LossReport,
    mc: Option<McResult>,
}

fn sweep_point(raw: &Value, base: &Path, param: &str, v: f64) -> Result<SweepPoint, CliError> {
    let mut raw = raw.clone();
    set_path(&mut raw, param, v)?;
    let cfg = Config::from_value(raw, base)?;
    let f = cfg.function()?;
    let d = cfg.density()?;
    let loss = info_loss(&f, &*d, &cfg.quadrature)?;
    let mc = match cfg.mc {
        Some(_) => Some(mc_loss(&f, &*d, &cfg.mc()?)?),
        None => None,
    };
    Ok(SweepPoint { loss, mc })
}

/// Every grid point reuses the configured seed.
pub fn sweep(cfg: &Config, raw: &Value, base: &Path, out: &Outputs) -> Result<Status, CliError> {
    let (param, values) = cfg.sweep_values()?;
    if cfg.mc.is_some() {
        cfg.mc()?;
    }
    let mut table = Table::new(&SWEEP_HEADER);
    let mut status = Status::Ok;
    let mut json_rows = Vec::new();
    for &v in &values {
        let row = match sweep_point(raw, base, &param, v) {
            Ok(p) => {
                let flag = if p.loss.converged { "ok" } else { "not_converged" };
                if !p.loss.converged && status == Status::Ok {
                    status = Status::NotConverged;
                }
                let (m, s) = p.mc.map_or((f64::NAN, f64::NAN), |m| (m.estimate_bits, m.stderr_bits));
                json_rows.push(serde_json::json!({ "param": v, "loss": p.loss, "mc": p.mc, "status": flag }));
                vec![
                    num(v),
                    num(p.loss.loss_bits),
                    num(m),
                    num(s),
                    num(p.loss.bound1_bits),
                    num(p.loss.bound2_bits),
                    num(p.loss.bound3_bits),
                    flag.to_string(),
                ]
            }
            Err(e) => {
                status = Status::Failed;
                let flag = format!("failed: {e}");
                json_rows.push(serde_json::json!({ "param": v, "status": flag }));
                let nan = num(f64::NAN);
                vec![num(v), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan, flag]
            }
        };
        table.push(row);
    }
    let mut w = out.primary(&table)?;
    writeln!(w, "sweep over {param}: {} points, status {status:?}", values.len()).map_err(out_err)?;
    out.json(&serde_json::json!({ "param": param, "points": json_rows }))?;
    Ok(status)
}

pub fn mc(cfg: &Config, out: &Outputs) -> Result<Status, CliError> {
    let f = cfg.function()?;
    let d = cfg.density()?;
    let mc = cfg.mc()?;
    let r = mc_loss(&f, &*d, &mc)?;
    println!(
        "mc estimate {} bits, stderr {} ({} samples, seed {}, {} rejected)",
        num(r.estimate_bits),
        num(r.stderr_bits),
        r.n_samples,
        mc.seed,
        r.rejected
    );
    let mut table = Table::new(&["estimate_bits", "stderr_bits", "n_samples", "rejected", "seed"]);
    table.push(vec![
        num(r.estimate_bits),
        num(r.stderr_bits),
        r.n_samples.to_string(),
        r.rejected.to_string(),
        mc.seed.to_string(),
    ]);
    out.csv(&table)?;
    out.json(&r)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct CascadeOutput {
    stages: CascadeReport,
    direct: Option<LossReport>,
}

pub fn cascade(cfg: &Config, out: &Outputs) -> Result<Status, CliError> {
    let spec = cfg.cascade.as_ref().ok_or_else(|| CliError::config("this command needs a `cascade` section"))?;
    if spec.stages.is_empty() {
        return Err(CliError::config("cascade needs at least one stage"));
    }
    let stages = spec.stages.iter().map(|s| s.build().map(Arc::new)).collect::<Result<Vec<Arc<PwmFunction>>, _>>()?;
    let d = cfg.density()?;
    let report = cascade_loss(&stages, Arc::clone(&d), &cfg.quadrature)?;

    // The whole chain as one function, when it composes.
    let mut composite: infoloss::Result<PwmFunction> = Ok((*stages[0]).clone());
    for s in &stages[1..] {
        composite = composite.and_then(|c| compose(&c, s));
    }
    let direct = match composite {
        Ok(c) => Some(info_loss(&c, &*d, &cfg.quadrature)?),
        Err(_) => None,
    };

    let mut o = io::stdout().lock();
    let mut table = Table::new(&["stage", "loss_bits", "error_estimate_bits"]);
    for (i, (l, e)) in report.stage_losses_bits.iter().zip(&report.stage_errors_bits).enumerate() {
        writeln!(o, "stage {:<3} {} bits  (error estimate {})", i + 1, num(*l), num(*e)).map_err(out_err)?;
        table.push(vec![(i + 1).to_string(), num(*l), num(*e)]);
    }
    writeln!(o, "total     {} bits", num(report.total_bits)).map_err(out_err)?;
    let mut converged = report.converged;
    match &direct {
        Some(r) => {
            converged &= r.converged;
            writeln!(o, "direct    {} bits  (gap {})", num(r.loss_bits), num((r.loss_bits - report.total_bits).abs()))
                .map_err(out_err)?;
        }
        None => writeln!(o, "direct    n/a (stages do not compose into one function)").map_err(out_err)?,
    }
    out.csv(&table)?;
    out.json(&CascadeOutput { stages: report, direct })?;
    Ok(Status::from_converged(converged))
}

#[derive(Serialize)]
struct OracleOutput {
    quadrature: LossReport,
    levels: Vec<HistogramLevel>,
}

pub fn oracle(cfg: &Config, out: &Outputs) -> Result<Status, CliError> {
    let f = cfg.function()?;
    let d = cfg.density()?;
    let mc = cfg.mc()?;
    let levels = histogram_oracle(&f, &*d, &cfg.histogram.unwrap_or_default(), &mc)?;
    let q = info_loss(&f, &*d, &cfg.quadrature)?;
    let mut table = Table::new(&["level", "bins", "estimate_bits"]);
    for l in &levels {
        table.push(vec![l.level.to_string(), l.bins.to_string(), num(l.estimate_bits)]);
    }
    let mut w = out.primary(&table)?;
    let last = levels.last().expect("at least one level");
    writeln!(
        w,
        "histogram {} bits at {} bins; quadrature {} bits",
        num(last.estimate_bits),
        last.bins,
        num(q.loss_bits)
    )
    .map_err(out_err)?;
    out.json(&OracleOutput { quadrature: q.clone(), levels })?;
    Ok(Status::from_converged(q.converged))
}

#[derive(Serialize)]
struct TightOutput {
    loss: LossReport,
    tightness: TightnessReport,
}

pub fn build_tight(cfg: &Config, out: &Outputs) -> Result<Status, CliError> {
    let d = cfg.density()?;
    let f = cfg.tight_function(Arc::clone(&d))?;
    let points = cfg.tight.as_ref().map_or(257, |t| t.table_points).max(2);
    let loss = info_loss(&f, &*d, &cfg.quadrature)?;
    let t = tightness_check(&f, &*d, TIGHTNESS_GRID);

    let s = truncated_support(&*d, DEFAULT_MASS_EPS);
    let mut table = Table::new(&["x", "y", "branch"]);
    for j in 0..points {
        let x = s.lo + (j as f64 + 0.5) / points as f64 * s.width();
        if let Some(k) = f.branch_containing(x) {
            table.push(vec![num(x), num(f.branches()[k].forward(x)), (k + 1).to_string()]);
        }
    }
    let mut w = out.primary(&table)?;
    loss_line(&mut w, "loss (x route)", &loss).map_err(out_err)?;
    writeln!(w, "{:<22} {} bits", "log2 L", num((f.branch_count() as f64).log2())).map_err(out_err)?;
    bounds_lines(&mut w, &loss).map_err(out_err)?;
    tightness_line(&mut w, &t).map_err(out_err)?;
    out.json(&TightOutput { loss: loss.clone(), tightness: t })?;
    Ok(Status::from_converged(loss.converged))
}
