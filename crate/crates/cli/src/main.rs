//! `sh2opt`: run stochastic H2 optimization experiments from config files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sh2opt::verify::Suite;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "sh2opt", version, about = "Stochastic H2 optimization of parametrized LTI systems")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SH2OPT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the SGD trials of a config and write trajectories and a summary.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Magnitude table of G(μ; iω) over a frequency grid, as CSV.
    Bode {
        #[arg(long)]
        config: PathBuf,
        /// Parameter vector (comma separated); defaults to the run's μ0.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        /// Explicit frequencies (comma separated); overrides the log grid.
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-2)]
        lo: f64,
        #[arg(long, default_value_t = 1e4)]
        hi: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Output file (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a statistical property suite, or all of them.
    Verify {
        #[arg(value_parser = parse_suite)]
        suite: Option<Suite>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Oracle H2 norm of a config's system at μ.
    H2norm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
    },
    /// Mean of repeated gradient estimates against the oracle gradient.
    GradCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 200)]
        repetitions: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: sh2opt::Error| e.to_string())
}

fn load(path: &PathBuf) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Optimize {
            config,
            seed,
            trials,
            out,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e:#}");
                return Ok(ExitCode::from(2));
            }
            let outcome = commands::optimize(&cfg)?;
            println!(
                "{} of {} trials completed; artifacts in {}",
                outcome.completed,
                outcome.trials,
                cfg.output.display()
            );
            Ok(if outcome.completed == outcome.trials {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Bode {
            config,
            mu,
            omega,
            lo,
            hi,
            points,
            out,
        } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let grid = match omega {
                Some(w) => w,
                None => commands::log_grid(lo, hi, points)?,
            };
            let flagged = match out {
                Some(path) => {
                    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                        commands::ensure_dir(dir)?;
                    }
                    commands::bode(&cfg, mu, &grid, std::fs::File::create(&path)?)?
                }
                None => commands::bode(&cfg, mu, &grid, std::io::stdout().lock())?,
            };
            if flagged > 0 {
                eprintln!("{flagged} of {} frequencies flagged", grid.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, seed } => {
            let reports = commands::run_verify(suite, seed)?;
            for r in &reports {
                println!("{r}");
            }
            Ok(if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::H2norm { config, mu } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let report = commands::h2norm(&cfg, mu)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::GradCheck {
            config,
            mu,
            samples,
            repetitions,
            seed,
        } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let seed = seed.unwrap_or(cfg.seed);
            let report = commands::grad_check(&cfg, mu, samples, repetitions, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
