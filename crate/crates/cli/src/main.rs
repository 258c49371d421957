mod commands;
mod config;
mod failure;
mod report;

use airga::model::{ModelFamily, ModelSpec};
use clap::{Parser, Subcommand};
use config::{parse_tolerances, RunArgs};
use failure::{Failure, EXIT_USAGE};
use std::path::PathBuf;
use std::process::ExitCode;

/// Krylov model reduction of proportionally damped second-order systems with
/// inexact linear solves and backward-stability diagnostics.
#[derive(Debug, Parser)]
#[command(name = "airga", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a test model as Matrix Market files plus meta.txt.
    Generate {
        /// beam1d or spd-synthetic.
        #[arg(long, default_value = "beam1d")]
        family: ModelFamily,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a model and write the reduced matrices and report.json.
    Reduce(RunArgs),
    /// Replay the exact trajectory at several solver tolerances; writes trends.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated solver tolerances, loosest first.
        #[arg(long)]
        tolerances: Option<String>,
    },
    /// Print a stored report and check the stability conditions.
    Diagnose { run_dir: PathBuf },
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Generate {
            family,
            n,
            seed,
            alpha,
            beta,
            out,
        } => {
            let mut spec = match family {
                ModelFamily::Beam1d => ModelSpec::beam(n),
                ModelFamily::SpdSynthetic => ModelSpec::synthetic(n, seed),
            };
            spec.alpha = alpha.unwrap_or(spec.alpha);
            spec.beta = beta.unwrap_or(spec.beta);
            commands::generate_cmd(&spec, &out)
        }
        Command::Reduce(args) => commands::reduce_cmd(&args.resolve(None)?),
        Command::Sweep { run, tolerances } => {
            let tols = tolerances.as_deref().map(parse_tolerances).transpose()?;
            commands::sweep_cmd(&run.resolve(tols.as_deref())?)
        }
        Command::Diagnose { run_dir } => commands::diagnose_cmd(&run_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
