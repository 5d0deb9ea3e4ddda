//! `collinearity`: batch front-end for the collinearity engine.

mod bands;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ChannelMode, Ctx, ExperimentName};

/// Exit status when an experiment misses one of its property bands.
const EXIT_BANDS: u8 = 3;

#[derive(Parser)]
#[command(name = "collinearity", version, about = "Collinearity enhancement of oriented edges")]
struct Cli {
    /// TOML configuration file; every field has a default.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set dynamics.w_col=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory; overrides `io.output_dir`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gabor, pooled, collinearity, and difference maps.
    Run {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Wafer fault response and thresholded fault detector.
    Wafer {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Saliency map and regions of interest.
    Sem {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Drive saliency from the pooled Gabor stack instead.
        #[arg(long)]
        baseline: bool,
    },
    /// Preprocessed images for a downstream classifier.
    ExportChannels {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: ChannelMode,
    },
    /// Synthetic stimulus sweeps with property-band checks.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
    },
    /// Dump Gabor and collinearity kernels as CSV.
    Kernels,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COLLINEARITY_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_BANDS),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    let loaded = config::load(cli.config.as_deref(), &cli.set)?;
    loaded.config.validate()?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&loaded.config.io.output_dir));
    let ctx = Ctx {
        config_sha256: commands::sha256_hex(&loaded.source_bytes),
        explicit_orientations: loaded.explicit_orientations,
        config: loaded.config,
        out,
    };
    match cli.command {
        Command::Run { inputs } => commands::run(&ctx, &inputs)?,
        Command::Wafer { inputs } => commands::wafer(&ctx, &inputs)?,
        Command::Sem { inputs, baseline } => commands::sem(&ctx, &inputs, baseline)?,
        Command::ExportChannels { inputs, mode } => commands::export_channels(&ctx, &inputs, mode)?,
        Command::Experiment { name } => return commands::experiment(&ctx, name),
        Command::Kernels => commands::kernels(&ctx)?,
    }
    Ok(true)
}
