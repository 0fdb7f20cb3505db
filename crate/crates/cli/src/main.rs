//! `sfrac <config.json> [--force] [--threads N] [--out DIR]`

mod config;
mod output;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sfrac_core::Error;

use crate::config::{ConfigError, Problem, RunConfig};
use crate::tasks::VerifyFailed;

#[derive(Debug, Parser)]
#[command(name = "sfrac", version, about = "Fractional powers of quaternionic vector operators via S-resolvent quadrature")]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// Run palpha, evolve and verify even when the coefficient conditions fail.
    #[arg(long)]
    force: bool,
    /// Worker threads for the quadrature nodes.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn run(args: &Args) -> anyhow::Result<()> {
    let cfg = RunConfig::from_path(&args.config)?;
    let problem = Problem::from_config(&cfg)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| PathBuf::from(&o.dir)))
        .unwrap_or_else(|| PathBuf::from("sfrac-out"));
    tasks::run(&problem, &out, args.force)
}

fn core_exit(e: &Error) -> u8 {
    match e {
        Error::ConditionsFailed => 2,
        Error::SolverDiverged { .. } | Error::NotDissipative { .. } | Error::JLeak { .. } => 3,
        Error::NodeFailed { source, .. } => core_exit(source),
        _ => 1,
    }
}

/// 0 success, 1 configuration, 2 conditions, 3 solver, 4 verification.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 1;
        }
        if cause.downcast_ref::<VerifyFailed>().is_some() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_exit(e);
        }
    }
    1
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("sfrac: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
