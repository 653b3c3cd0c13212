use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ratiohedge::config::RunConfig;
use ratiohedge::pipeline::{self, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "ratiohedge", version, about = "Success-ratio hedging of equity-linked claims")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, build the hedge, verify, and write the report and tables.
    Run {
        config: PathBuf,
        /// Output directory (overrides `outputs.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the oracle and Monte Carlo checks.
        #[arg(long)]
        no_verify: bool,
    },
    /// Check a configuration without solving.
    Validate { config: PathBuf },
}

fn base_dir(config: &Path) -> PathBuf {
    config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn run(config: PathBuf, out: Option<PathBuf>, no_verify: bool) -> Result<(), RunError> {
    let cfg = RunConfig::from_file(&config)?;
    let opts = RunOptions {
        out_dir: out,
        no_verify,
        base_dir: base_dir(&config),
        timestamp: None,
    };
    let (report, dir) = pipeline::run(&cfg, &opts)?;
    println!("success_ratio         = {}", report.success_ratio);
    println!("v0_used               = {}", report.v0_used);
    println!("budget                = {}", report.budget);
    println!("superhedge_price_of_d = {}", report.superhedge_price_of_d);
    println!("k                     = {}", report.k);
    if let Some(o) = report.oracle_ratio {
        println!("oracle_ratio          = {o}");
    }
    if let Some(mc) = &report.monte_carlo {
        println!("mc_estimate           = {} ± {}", mc.estimate, mc.standard_error);
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            no_verify,
        } => match run(config, out, no_verify) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let diagnostics = pipeline::validate_source(&text, &base_dir(&config));
            if diagnostics.is_empty() {
                println!("ok");
                return ExitCode::SUCCESS;
            }
            for d in &diagnostics {
                println!("{d}");
            }
            let parse = diagnostics
                .iter()
                .any(|d| d.kind == pipeline::DiagnosticKind::Parse);
            ExitCode::from(if parse { 2 } else { 1 })
        }
    }
}
