mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::commands::{Outputs, Status};
use crate::config::{read_value, section, Config};
use crate::error::CliError;

/// Information loss of piecewise monotone memoryless systems.
#[derive(Parser)]
#[command(name = "infoloss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Loss by both quadrature routes, bounds and tightness.
    Loss(Args),
    /// Loss, Monte Carlo and bounds over a parameter grid (CSV).
    Sweep(Args),
    /// Monte Carlo estimate of the loss.
    Mc(Args),
    /// Per-stage losses of a chain of functions.
    Cascade(Args),
    /// Histogram estimate of H(W|Y) at increasing output resolution.
    Oracle(Args),
    /// Build a function from the input CDF and report its loss.
    BuildTight(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON experiment config.
    config: PathBuf,
    /// Write a machine-readable report here.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write the result table here.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Seed for randomized commands; overrides `mc.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Absolute quadrature tolerance; overrides `quadrature.abs_tol`.
    #[arg(long, value_name = "BITS")]
    tol: Option<f64>,
    /// Write the resolved config (defaults and overrides applied) here.
    #[arg(long, value_name = "PATH")]
    dump_config: Option<PathBuf>,
}

fn load(args: &Args) -> Result<(Value, Config), CliError> {
    let mut raw = read_value(&args.config)?;
    if let Some(seed) = args.seed {
        if raw.get("mc").is_some() {
            section(&mut raw, "mc")?.insert("seed".into(), seed.into());
        }
    }
    if let Some(tol) = args.tol {
        let n = serde_json::Number::from_f64(tol).ok_or_else(|| CliError::config("--tol must be finite"))?;
        section(&mut raw, "quadrature")?.insert("abs_tol".into(), Value::Number(n));
    }
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let cfg = Config::from_value(raw.clone(), &base)?;
    if let Some(p) = &args.dump_config {
        output::save_json(p, &cfg)?;
    }
    // Point configs of a sweep are rebuilt from the resolved document.
    let resolved = serde_json::to_value(&cfg).map_err(|e| CliError::Output(e.to_string()))?;
    Ok((resolved, cfg))
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let (name, args) = match &cli.command {
        Command::Loss(a) => ("loss", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Mc(a) => ("mc", a),
        Command::Cascade(a) => ("cascade", a),
        Command::Oracle(a) => ("oracle", a),
        Command::BuildTight(a) => ("build-tight", a),
    };
    let (raw, cfg) = load(args)?;
    let out = Outputs { json: args.json.clone(), csv: args.csv.clone() };
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    match name {
        "loss" => commands::loss(&cfg, &out),
        "sweep" => commands::sweep(&cfg, &raw, &base, &out),
        "mc" => commands::mc(&cfg, &out),
        "cascade" => commands::cascade(&cfg, &out),
        "oracle" => commands::oracle(&cfg, &out),
        _ => commands::build_tight(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => {
            if status == Status::NotConverged {
                eprintln!("warning: quadrature did not reach the requested tolerance");
            }
            ExitCode::from(status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
