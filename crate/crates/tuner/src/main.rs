use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pareto_tuner::commands::{self, CliError, ImportanceOptions, RunOverrides};
use pareto_tuner::config::{ExperimentConfig, BACKEND_ENV};
use pareto_tuner_core::importance::Target;
use pareto_tuner_core::RefPoint;

#[derive(Parser)]
#[command(name = "pareto-tuner", version, about = "Multi-objective tuning of text-to-image generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated optimizations and write one archive per run plus a manifest.
    Run {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override the number of runs.
        #[arg(long)]
        repeats: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two directories of archives.
    Compare {
        /// Archive directory of the first side.
        #[arg(long)]
        a: PathBuf,
        /// Archive directory of the second side.
        #[arg(long)]
        b: PathBuf,
        /// Hypervolume reference quality loss; overrides the archives' own point.
        #[arg(long, requires = "ref_time")]
        ref_quality: Option<f64>,
        /// Hypervolume reference time in milliseconds.
        #[arg(long, requires = "ref_quality")]
        ref_time: Option<f64>,
        /// Directory for the report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter importance of a directory of archives.
    Importance {
        /// Archive directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        target: TargetArg,
        /// Forest fits with different seeds.
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Forest configurations tried per repeat.
        #[arg(long, default_value_t = 10)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search-space files.
    Space {
        #[command(subcommand)]
        command: SpaceCommand,
    },
    /// Serve the surrogate over the evaluator protocol on stdin/stdout.
    ServeSurrogate {
        /// Take the space and surrogate settings from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Print the search space (the default one, or the one a config selects).
    Dump {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Time,
    Quality,
}

fn optional_config(path: Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(&p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    let io = |e: std::io::Error| CliError::Io(format!("stdout: {e}"));
    match cli.command {
        Command::Run { config, repeats, seed, out } => {
            let overrides = RunOverrides { repeats, seed, out, backend: std::env::var(BACKEND_ENV).ok() };
            let cfg = commands::load_config(&config, &overrides)?;
            let manifest = commands::run_experiment(&cfg, &mut std::io::stderr())?;
            writeln!(stdout, "wrote {} archives to {}", manifest.runs.len(), cfg.out_dir.display()).map_err(io)?;
            if !manifest.all_complete() {
                let failed = manifest.runs.iter().filter(|r| !r.complete).count();
                return Err(CliError::Evaluator(format!("{failed} run(s) did not complete; see the manifest")));
            }
        }
        Command::Compare { a, b, ref_quality, ref_time, out } => {
            let reference = ref_quality.zip(ref_time).map(|(q, t)| RefPoint::new(q, t));
            let text = commands::compare(&a, &b, reference, out.as_deref())?;
            stdout.write_all(text.as_bytes()).map_err(io)?;
        }
        Command::Importance { input, target, repeats, budget, seed, out } => {
            let target = match target {
                TargetArg::Time => Target::Time,
                TargetArg::Quality => Target::Quality,
            };
            let opts = ImportanceOptions { target, repeats, budget, seed };
            let chart = commands::importance(&input, &opts, out.as_deref())?;
            stdout.write_all(chart.as_bytes()).map_err(io)?;
        }
        Command::Space { command: SpaceCommand::Dump { config } } => {
            let cfg = config.map(|p| ExperimentConfig::load(&p)).transpose()?;
            stdout.write_all(commands::space_dump(cfg.as_ref())?.as_bytes()).map_err(io)?;
        }
        Command::ServeSurrogate { config } => {
            let cfg = optional_config(config)?;
            drop(stdout);
            commands::serve_surrogate(&cfg, std::io::stdin().lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
