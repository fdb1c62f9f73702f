use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use he_core::harness::{self, Experiment, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "he", version, about = "Run delta-state geometry experiments from JSON configs")]
struct Cli {
    /// Seed for every random draw; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, env = "HE_OUT_DIR")]
    out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Run diffusion trials in parallel (results are unchanged).
    #[arg(long, global = true)]
    parallel_trials: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment(s) in a config and write report.json and CSV tables.
    Run { config: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// List experiments and the criteria they check.
    List,
}

fn fail(err: he_core::Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(harness::exit_code(&err))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in Experiment::SINGLE.into_iter().chain([Experiment::All]) {
                let ids: Vec<String> = e.criteria().iter().map(|i| i.to_string()).collect();
                println!("{:<12} criteria {:<10} {}", e.name(), ids.join(","), e.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::from_path(&config) {
            Ok(c) => {
                if !cli.quiet {
                    println!("{}: valid {} config, criteria {:?}", config.display(), c.experiment.name(), c.experiment.criteria());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config } => {
            let c = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let opts = RunOptions {
                seed: cli.seed,
                out_dir: cli.out,
                parallel_trials: cli.parallel_trials,
            };
            let quiet = cli.quiet;
            match harness::run(&c, &opts, |o| {
                if !quiet {
                    println!("{}", o.summary_line());
                    for ch in o.failed_checks() {
                        let value = ch.value.map_or("non-finite".to_string(), |v| format!("{v:e}"));
                        println!("    failed: {} = {value} ({:?} {:e})", ch.name, ch.relation, ch.bound);
                    }
                }
            }) {
                Ok(out) => {
                    if !quiet {
                        println!("report: {}", out.dir.join("report.json").display());
                    }
                    if out.report.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
