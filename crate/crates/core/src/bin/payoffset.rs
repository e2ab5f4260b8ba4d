use clap::{Parser, Subcommand};
use payoffset::experiments::{
    run_bounds, run_convergence, run_coverage, run_estimate, run_verify_lb, Command, ExperimentConfig, ExperimentError, ExperimentReport,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

#[derive(Parser)]
#[command(name = "payoffset", version, about = "Estimate payoff sets consistent with observed equilibrium play")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, clap::Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Base seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory that receives the run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample once and report the recommended sets.
    Estimate(Common),
    /// Distance and bound medians over a grid of sample sizes.
    Convergence(Common),
    /// Violation frequencies of the concentration bounds.
    Coverage(Common),
    /// LP check of the lower-bound separations.
    VerifyLb(Common),
    /// Table of sample sizes and lower bounds.
    Bounds(Common),
}

fn emit<R: Serialize, S: Serialize>(r: &ExperimentReport<R, S>, out: &Path, extra: &[(&str, serde_json::Value)], start: Instant) -> Result<(), ExperimentError> {
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let dir = r.write(out, extra, start.elapsed().as_secs_f64())?;
    println!("{}", serde_json::to_string_pretty(&r.summary)?);
    println!("wrote {}", dir.display());
    Ok(())
}

fn run(cmd: Command, args: &Common) -> Result<bool, ExperimentError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ExperimentError::Config { field: "config", reason: format!("{}: {e}", args.config.display()) })?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let start = Instant::now();
    match cmd {
        Command::Estimate => {
            let r = run_estimate(&cfg)?;
            emit(&r, &args.out, &[("systems.json", serde_json::to_value(&r.summary.systems)?)], start)?;
            Ok(true)
        }
        Command::Convergence => {
            let r = run_convergence(&cfg)?;
            emit(&r, &args.out, &[], start)?;
            Ok(true)
        }
        Command::Coverage => {
            let r = run_coverage(&cfg)?;
            emit(&r, &args.out, &[], start)?;
            Ok(r.summary.passed)
        }
        Command::VerifyLb => {
            let r = run_verify_lb(&cfg)?;
            emit(&r, &args.out, &[], start)?;
            Ok(r.summary.passed)
        }
        Command::Bounds => {
            let r = run_bounds(&cfg)?;
            emit(&r, &args.out, &[], start)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Estimate(a) => (Command::Estimate, a),
        Cmd::Convergence(a) => (Command::Convergence, a),
        Cmd::Coverage(a) => (Command::Coverage, a),
        Cmd::VerifyLb(a) => (Command::VerifyLb, a),
        Cmd::Bounds(a) => (Command::Bounds, a),
    };
    match run(cmd, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: {} checks failed", cmd.name());
            ExitCode::from(EXIT_ASSERTION)
        }
        Err(e @ ExperimentError::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
