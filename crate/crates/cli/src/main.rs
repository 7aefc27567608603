use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epilab_cli::acceptance::{default_verify_dir, verify_all, VerifyOptions};
use epilab_cli::config::ExperimentConfig;
use epilab_cli::runner::{exit_code, list_scenarios, resolve_out_dir, run_config, RunnerError};

/// Numerical laboratory for set convergence on grids: runs packaged
/// experiment configs and the verification suite.
#[derive(Parser)]
#[command(name = "epilab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write report.json, series.csv, and
    /// summary.txt. Exit code: 0 pass, 1 fail, 2 hypothesis not met,
    /// 3 config error.
    Run {
        /// Path to the TOML experiment config.
        config: PathBuf,
        /// Output directory (overrides the config and EPILAB_OUT_DIR).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// List the built-in scenarios with their parameters and oracles.
    List,
    /// Run the packaged verification suite; one pass/fail line per
    /// criterion. Exit code 0 only if every criterion passes.
    VerifyAll {
        /// Override the packaged seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the per-criterion artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Swap a broken scenario into the suite; for exercising the
        /// failure path.
        #[arg(long, hide = true)]
        self_test_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out_dir } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(3);
                }
            };
            let dir = resolve_out_dir(&cfg, out_dir.as_deref());
            match run_config(&cfg, &dir) {
                Ok(outcome) => {
                    print!("{}", outcome.report.summary_text());
                    println!("report: {}", outcome.report_path.display());
                    ExitCode::from(exit_code(outcome.report.verdict) as u8)
                }
                Err(RunnerError::Config(e)) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(3)
                }
                Err(RunnerError::Tester(e)) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(3)
                }
                Err(RunnerError::Io(e)) => {
                    eprintln!("io error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::List => {
            print!("{}", list_scenarios());
            ExitCode::SUCCESS
        }
        Command::VerifyAll {
            seed,
            out_dir,
            self_test_fault,
        } => {
            let opts = VerifyOptions {
                seed,
                inject_fault: self_test_fault,
            };
            let out = out_dir.unwrap_or_else(default_verify_dir);
            match verify_all(&opts, &out) {
                Ok(outcomes) => {
                    let mut all = true;
                    for o in &outcomes {
                        println!("{}", o.line());
                        all &= o.pass;
                    }
                    println!(
                        "verify-all: {}/{} criteria passed; artifacts under {}",
                        outcomes.iter().filter(|o| o.pass).count(),
                        outcomes.len(),
                        out.display()
                    );
                    if all {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("verify-all failed to run: {e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
