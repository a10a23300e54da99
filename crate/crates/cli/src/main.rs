//! `effc`: command-line driver for the fast fragmentation-coalescence toolkit.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::RunConfig;
use effc_core::{Error, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "effc",
    version,
    about = "Simulation and exact analytics for the fast fragmentation-coalescence process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with run options; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the CSV artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form tables: stationary law, hitting times, holding times.
    Analytic(Common),
    /// Simulate one block-count path and emit it as `t,state` CSV.
    Simulate(Common),
    /// Segment a simulated path into excursions from the ceiling.
    Excursions(Common),
    /// Box-counting dimension of the time spent at the ceiling.
    Dimension(Common),
    /// Monte Carlo hitting time of `k` blocks from the ceiling.
    Hitting(Common),
    /// Exact computations on the truncated chain.
    Oracle(Common),
    /// Run the acceptance suite.
    Validate(Common),
}

fn fail(code: u8, err: &Error) -> ExitCode {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": err.kind(), "message": err.to_string() },
    });
    eprintln!("{doc}");
    ExitCode::from(code)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Numerical { .. } | Error::FitDegenerate(_) => 2,
        _ => 1,
    }
}

fn threads_from_env() -> Result<(), Error> {
    if let Ok(v) = std::env::var("EFFC_THREADS") {
        let n: usize =
            v.parse().map_err(|_| Error::Parse(format!("EFFC_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Parse("EFFC_THREADS must be >= 1".into()));
        }
        effc_core::par::configure_threads(n);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<commands::Outcome, Error> {
    threads_from_env()?;
    let (Command::Analytic(common)
    | Command::Simulate(common)
    | Command::Excursions(common)
    | Command::Dimension(common)
    | Command::Hitting(common)
    | Command::Oracle(common)
    | Command::Validate(common)) = &cli.command;
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?.merged(&common.run),
        None => common.run.clone(),
    };
    cfg.validate()?;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Analytic(_) => commands::analytic(&cfg, out),
        Command::Simulate(_) => commands::simulate(&cfg, out),
        Command::Excursions(_) => commands::excursions(&cfg, out),
        Command::Dimension(_) => commands::dimension(&cfg, out),
        Command::Hitting(_) => commands::hitting(&cfg),
        Command::Oracle(_) => commands::oracle(&cfg, out),
        Command::Validate(_) => commands::validate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let msg = msg.trim().trim_start_matches("error: ");
            return fail(1, &Error::Parse(msg.to_string()));
        }
    };
    match run(cli) {
        Ok(outcome) => {
            if let Some(doc) = outcome.json {
                let text = serde_json::to_string_pretty(&doc).expect("serializable");
                // A closed reader (`effc ... | head`) is not an error worth reporting.
                let _ = writeln!(std::io::stdout().lock(), "{text}");
            }
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => fail(exit_code_for(&e), &e),
    }
}
