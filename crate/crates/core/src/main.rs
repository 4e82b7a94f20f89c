use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gail_lin::cli::{parse_config, render_plot, run_experiment, Overrides};
use gail_lin::suites::{run_suites, SUITES};
use gail_lin::Error;

#[derive(Parser)]
#[command(name = "gail-lin", version, about = "Adversarial imitation learning in linear kernel MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the configured seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diagnostics: bool,
    },
    /// Run invariant suites and print a pass/fail table.
    Invariants {
        /// Restrict to one suite; repeatable.
        #[arg(long)]
        suite: Vec<String>,
    },
    /// Render an `x,y,series` CSV as a log-log SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Config { .. } | Error::Format { .. } | Error::Io { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_ABORT),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            diagnostics,
        } => {
            let overrides = Overrides {
                seed,
                output: out,
                diagnostics,
            };
            let config = match parse_config(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            match run_experiment(&config) {
                Ok(summary) => {
                    for o in &summary.outcomes {
                        println!("{}", o.line());
                    }
                    println!("{} run(s) written to {}", summary.runs, config.output.display());
                    if summary.invariant_failures() > 0 {
                        ExitCode::from(EXIT_INVARIANT)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
        Command::Invariants { suite } => {
            if let Some(bad) = suite.iter().find(|n| !SUITES.iter().any(|s| s.name == n.as_str())) {
                return exit_for(&Error::Config {
                    field: "--suite".into(),
                    message: format!("unknown suite `{bad}`"),
                });
            }
            let names: Vec<&str> = suite.iter().map(String::as_str).collect();
            match run_suites(&names) {
                Ok(outcomes) => {
                    for o in &outcomes {
                        println!("{}", o.line());
                    }
                    let failed = outcomes.iter().filter(|o| !o.passed).count();
                    println!("{} passed, {failed} failed", outcomes.len() - failed);
                    if failed > 0 {
                        ExitCode::from(EXIT_INVARIANT)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => exit_for(&e),
            }
        }
        Command::Plot { input, out } => match render_plot(&input, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e),
        },
    }
}
