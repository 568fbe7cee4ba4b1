//! `relicomp`: fit component reliability models, compose them along
//! execution paths and emit the resulting curves.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "relicomp", version, about = "Component-based software reliability from fitted growth models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format. Curves default to CSV, models to JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone, Debug)]
pub struct GridArgs {
    /// Number of grid points, both ends included.
    #[arg(long, default_value_t = 512)]
    grid: usize,

    /// Last grid point. Defaults to the largest component end of test.
    #[arg(long, value_name = "T")]
    tau_max: Option<f64>,
}

#[derive(Args, Clone, Debug)]
pub struct BaselineArgs {
    /// Baseline expected total failures; requires --baseline-b.
    #[arg(long, requires = "baseline_b", conflicts_with = "baseline_data")]
    baseline_v0: Option<f64>,

    /// Baseline detection rate; requires --baseline-v0.
    #[arg(long, requires = "baseline_v0")]
    baseline_b: Option<f64>,

    /// Fit the baseline from a whole-system failure dataset.
    #[arg(long, value_name = "CSV")]
    baseline_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a Goel–Okumoto model to each failure dataset.
    Fit {
        #[arg(required = true, value_name = "DATASET")]
        datasets: Vec<PathBuf>,
    },
    /// Resolve a system configuration into a saved system model.
    Compose {
        #[arg(value_name = "CONFIG")]
        config: PathBuf,
    },
    /// Conditional reliability of the system after its last failure.
    Predict {
        /// System configuration or saved system model.
        #[arg(value_name = "INPUT")]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Composed, single-model and additive curves side by side.
    Compare {
        #[arg(value_name = "INPUT")]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        baseline: BaselineArgs,
    },
    /// Generate a synthetic failure dataset.
    Simulate {
        #[arg(value_name = "SPEC")]
        spec: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replace one component of a saved system model.
    Evolve {
        #[arg(value_name = "SYSTEM")]
        system: PathBuf,
        #[arg(value_name = "ID")]
        component: String,
        /// Replacement model as JSON.
        #[arg(long, value_name = "JSON", required_unless_present = "dataset", conflicts_with = "dataset")]
        model: Option<PathBuf>,
        /// Failure dataset to fit the replacement from.
        #[arg(long, value_name = "CSV")]
        dataset: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let sink = output::Sink::new(cli.out, cli.format);
    let result = match cli.command {
        Command::Fit { datasets } => commands::fit(&datasets, &sink),
        Command::Compose { config } => commands::compose(&config, &sink),
        Command::Predict { input, grid } => commands::predict(&input, &grid, &sink),
        Command::Compare { input, grid, baseline } => commands::compare(&input, &grid, &baseline, &sink),
        Command::Simulate { spec, seed } => commands::simulate(&spec, seed, &sink),
        Command::Evolve {
            system,
            component,
            model,
            dataset,
        } => commands::evolve(&system, &component, model.as_deref(), dataset.as_deref(), &sink),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
