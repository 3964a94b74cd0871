mod commands;
mod plot;
mod results;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit status for bad usage, bad config, missing or invalid inputs.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for non-finite values during training or evaluation.
pub const EXIT_NUMERIC: u8 = 3;

/// A failure plus the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: error.into() }
    }
}

impl From<clnr_core::Error> for Failure {
    fn from(e: clnr_core::Error) -> Self {
        let code = if e.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE };
        Failure { code, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e)
    }
}

pub type CliResult<T = ()> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "clnr", version, about = "Contrastive node representations on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain an encoder and write checkpoint, embeddings and history.
    Train {
        config: PathBuf,
        /// Override a config key, e.g. `--set seed=3`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score a trained run or a raw embedding matrix and append to results.csv.
    Eval {
        /// Run directory written by `train`.
        #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
        run: Option<PathBuf>,
        /// Embedding matrix in features.bin layout; needs --bundle.
        #[arg(long, requires = "bundle")]
        embeddings: Option<PathBuf>,
        /// Graph bundle; defaults to the run's dataset.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Skip the linear probe; the accuracy column stays empty.
        #[arg(long)]
        no_probe: bool,
        /// Probe the postprocessed embeddings instead of the sphere-projected ones.
        #[arg(long)]
        pre_projection: bool,
        /// Train the probe without weight decay.
        #[arg(long)]
        no_wd: bool,
        /// Method label for --embeddings rows.
        #[arg(long, default_value = "embeddings")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Results table; defaults to results.csv in the run directory or next to the embeddings.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Retrain over a grid of embedding dims or edge-perturbation rates.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<String>,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Results table; defaults to out_dir/results.csv.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Render a scatter plot of two results.csv columns as SVG.
    Plot {
        results: PathBuf,
        #[arg(long, default_value = "align")]
        x: String,
        #[arg(long, default_value = "unif")]
        y: String,
        #[arg(long, default_value = "accuracy")]
        color: String,
        #[arg(short, long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Write a stochastic-block-model graph bundle.
    GenSbm {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated block sizes.
        #[arg(long, value_delimiter = ',', default_value = "100,100,100")]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        p_in: f64,
        #[arg(long, default_value_t = 0.005)]
        p_out: f64,
        /// Feature width; 0 means one coordinate per block.
        #[arg(long, default_value_t = 0)]
        feature_dim: usize,
        /// Class-mean offset on the block's own feature coordinate.
        #[arg(long, default_value_t = 1.0)]
        shift: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Check a graph bundle and print its statistics.
    Validate { bundle: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Dims,
    Perturb,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Tsv,
    Bin,
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train { config, overrides } => commands::train(&config, &overrides),
        Command::Eval { run, embeddings, bundle, no_probe, pre_projection, no_wd, method, seed, results } => {
            let opts = commands::EvalFlags { probe: !no_probe, pre_projection, no_wd };
            match (run, embeddings) {
                (Some(run), _) => commands::eval_run(&run, bundle.as_deref(), opts, results.as_deref()),
                (None, Some(emb)) => {
                    let bundle = bundle.expect("clap enforces --bundle");
                    commands::eval_embeddings(&emb, &bundle, &method, seed, opts, results.as_deref())
                }
                (None, None) => unreachable!("clap enforces --run or --embeddings"),
            }
        }
        Command::Sweep { config, mode, grid, seeds, overrides, results } => {
            commands::sweep(&config, mode, &grid, &seeds, &overrides, results.as_deref())
        }
        Command::Plot { results, x, y, color, out } => plot::plot(&results, &x, &y, &color, &out),
        Command::GenSbm { out, blocks, p_in, p_out, feature_dim, shift, noise, seed, format } => {
            let cfg = clnr_core::graph::SbmConfig {
                block_sizes: blocks,
                p_in,
                p_out,
                class_mean_shift: shift,
                noise_std: noise,
                feature_dim,
                seed,
            };
            let format = match format {
                Format::Tsv => clnr_core::graph::FeatureFormat::Tsv,
                Format::Bin => clnr_core::graph::FeatureFormat::Bin,
            };
            commands::gen_sbm(&cfg, &out, format)
        }
        Command::Validate { bundle } => commands::validate(&bundle),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
