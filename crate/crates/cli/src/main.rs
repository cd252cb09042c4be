use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gridbo_cli::{execute_plan, load_plan, summarize, ExecuteOptions, BUILTIN_PLANS};

#[derive(Parser)]
#[command(name = "gridbo", version, about = "Bayesian optimization with inexact acquisition solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a plan file or built-in plan.
    Run {
        /// Path to a plan file, or the name of a built-in plan.
        plan: String,
        #[arg(long, env = "BO_WORKERS")]
        workers: Option<usize>,
        /// Output directory; defaults to the plan's `output` or results/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed, overriding the plan's.
        #[arg(long, env = "BO_SEED")]
        seed: Option<u64>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Write summary tables and plots for a results directory.
    Summarize { dir: PathBuf },
    /// List the built-in plans.
    ListPlans {
        /// Print the full text of this plan.
        #[arg(long)]
        show: Option<String>,
    },
    /// Parse and validate a plan without running it.
    Validate { plan: String },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            plan,
            workers,
            out,
            seed,
            quiet,
        } => {
            let mut plan = load_plan(&plan)?;
            if let Some(s) = seed {
                plan.seed = s;
            }
            let out = out
                .or_else(|| plan.output.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&plan.name));
            let mut opts = ExecuteOptions {
                verbose: !quiet,
                ..ExecuteOptions::default()
            };
            if let Some(w) = workers {
                opts.workers = w.max(1);
            }
            let report = execute_plan(&plan, &out, &opts)?;
            let m = &report.manifest;
            println!(
                "{}: {} runs completed ({} computed, {} reused), {} failed -> {}",
                plan.name,
                m.completed,
                report.computed,
                report.reused,
                m.failed,
                out.display()
            );
            Ok(if report.all_failed() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Summarize { dir } => {
            let s = summarize(&dir).with_context(|| format!("summarizing {}", dir.display()))?;
            print!("{}", gridbo_cli::summary::summary_markdown(&s));
            Ok(ExitCode::SUCCESS)
        }
        Command::ListPlans { show } => {
            if let Some(name) = show {
                let plan = gridbo_cli::builtin_plan(&name)
                    .with_context(|| format!("no built-in plan named '{name}'"))?;
                print!("{}", plan.serialize());
            } else {
                for (name, about) in BUILTIN_PLANS {
                    println!("{name:<22} {about}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { plan } => {
            let p = load_plan(&plan)?;
            println!(
                "{}: {} experiments, {} runs, seed {}",
                p.name,
                p.experiments.len(),
                p.total_runs(),
                p.seed
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
