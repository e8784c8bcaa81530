use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proxflow_cli::config::{HarnessError, RunConfig};
use proxflow_cli::corpus;
use proxflow_cli::runner::{run, Overrides};

/// Integrates forward-backward flow problems and verifies their trajectory
/// diagnostics.
#[derive(Parser)]
#[command(name = "proxflow", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct CommonFlags {
    /// Output directory for run artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the integration horizon
    #[arg(long)]
    t_max: Option<f64>,
    /// Override the residual stopping threshold
    #[arg(long)]
    stop_residual: Option<f64>,
    /// Seed for the randomized checks
    #[arg(long)]
    seed: Option<u64>,
    /// Also run the discrete forward-backward baseline and compare limits
    #[arg(long)]
    compare_discrete: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single problem configuration (TOML)
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run every problem in the built-in corpus
    Corpus {
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn overrides(flags: &CommonFlags) -> Overrides {
    Overrides {
        t_max: flags.t_max,
        stop_residual: flags.stop_residual,
        seed: flags.seed,
        compare_discrete: flags.compare_discrete,
    }
}

fn exit_code_for(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Parse(_) | HarnessError::Invalid(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, flags } => {
            let cfg = match RunConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e));
                }
            };
            match run(&cfg, &flags.out, &overrides(&flags)) {
                Ok(outcome) => {
                    println!(
                        "{}: {} (artifacts in {})",
                        outcome.name,
                        if outcome.passed { "PASS" } else { "FAIL" },
                        outcome.outdir.display()
                    );
                    if outcome.passed {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("failed checks: {}", outcome.failed.join(", "));
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        Cmd::Corpus { flags } => {
            let configs = match corpus::corpus() {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e));
                }
            };
            let mut all_passed = true;
            for cfg in &configs {
                let outdir = flags.out.join(&cfg.name);
                match run(cfg, &outdir, &overrides(&flags)) {
                    Ok(outcome) => {
                        println!(
                            "{}: {}",
                            outcome.name,
                            if outcome.passed { "PASS" } else { "FAIL" }
                        );
                        if !outcome.passed {
                            eprintln!("  failed checks: {}", outcome.failed.join(", "));
                            all_passed = false;
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: error: {e}", cfg.name);
                        return ExitCode::from(exit_code_for(&e));
                    }
                }
            }
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
