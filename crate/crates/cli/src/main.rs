//! `scalesim`: reproducible experiments on diffusions given by a scale function and a
//! speed measure.
//!
//! Exit codes: 0 success, 1 a test failed, 2 configuration error, 3 runtime error.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod describe;
mod output;
mod run;
mod specs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{what}: {m}")),
        }
    }
}

#[derive(Parser)]
#[command(name = "scalesim", about = "Simulate and verify diffusions given by a scale function and speed measure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct, validate, simulate and verify; write records and plot data.
    Run(RunArgs),
    /// Print the analytic facts of the configured spec without simulating.
    Describe(ConfigArgs),
    /// Print the tool and config format versions.
    Version,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// `KEY=VALUE` with a dotted key, e.g. `simulation.paths=500`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Paths per member for the QV and drift tests.
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SCALESIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SCALESIM_THREADS = `{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Version => {
            println!("{} (config format_version {})", output::TOOL, config::FORMAT_VERSION);
            Ok(0)
        }
        Command::Describe(args) => {
            let cfg = config::load(&args.config, &args.overrides)?;
            print!("{}", describe::describe(&cfg)?);
            Ok(0)
        }
        Command::Run(args) => {
            init_threads()?;
            let mut overrides = args.config.overrides.clone();
            if let Some(seed) = args.seed {
                overrides.push(format!("seed={seed}"));
            }
            if let Some(paths) = args.paths {
                overrides.push(format!("simulation.paths={paths}"));
            }
            let mut cfg = config::load(&args.config.config, &overrides)?;
            if let Some(out) = &args.out {
                cfg.output.dir = out.to_string_lossy().into_owned();
            }
            let started = Instant::now();
            let dir = PathBuf::from(&cfg.output.dir);
            let outcome = run::run(&cfg, &dir)?;
            eprintln!("wrote {} in {:.1}s", dir.display(), started.elapsed().as_secs_f64());
            match outcome {
                run::Outcome::Refused(failures) => {
                    for f in failures {
                        eprintln!("required {f}");
                    }
                    Ok(1)
                }
                run::Outcome::Finished { reports, pass } => {
                    print!("{}", scalesim_core::verify::render_table(&reports));
                    Ok(if pass { 0 } else { 1 })
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
