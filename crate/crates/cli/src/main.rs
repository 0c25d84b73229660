use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Voxel-based 3D molecule generation: voxelize, train, sample, extract and evaluate.
#[derive(Parser, Debug)]
#[command(name = "molvox", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn XYZ files (or directories of them) into grid files.
    Voxelize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Train a denoiser on a directory of XYZ files.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Draw grids with walk-jump sampling from a checkpoint or a mixture oracle.
    Sample {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Recover atoms from grid files (or directories of them).
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compare generated molecules with a reference set.
    Eval { generated: PathBuf, reference: PathBuf },
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = Some(seed);
    }
    let out = cli.common.out;
    match cli.command {
        Command::Voxelize { inputs, length, resolution } => {
            if let Some(v) = length {
                cfg.grid.length = v;
            }
            if let Some(v) = resolution {
                cfg.grid.resolution = v;
            }
            commands::voxelize(&cfg, &inputs, &out)
        }
        Command::Train { dataset, sigma, steps } => {
            if let Some(v) = sigma {
                cfg.train.sigma = v;
            }
            if let Some(v) = steps {
                cfg.train.hyper.steps = v;
            }
            commands::train(&cfg, &dataset, &out)
        }
        Command::Sample { checkpoint, n_samples, delta } => {
            if checkpoint.is_some() {
                cfg.sample.checkpoint = checkpoint;
            }
            if let Some(v) = n_samples {
                cfg.sample.n_samples = v;
            }
            if let Some(v) = delta {
                cfg.sample.params.delta = v;
            }
            commands::sample(&cfg, &out)
        }
        Command::Extract { inputs, threshold } => {
            if let Some(v) = threshold {
                cfg.extract.threshold = v;
            }
            commands::extract(&cfg, &inputs, &out)
        }
        Command::Eval { generated, reference } => commands::eval(&cfg, &generated, &reference, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("molvox: {} error: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
