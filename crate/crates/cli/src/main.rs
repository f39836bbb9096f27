//! `graphconv`: build neighbor tables, train and evaluate graph convolution
//! networks, and inspect tables.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numerical failure.

mod commands;
mod inputs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphconv::{Error, ErrorKind};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "graphconv",
    version,
    about = "Random-walk graph convolution toolkit"
)]
struct Cli {
    /// Worker threads for data-parallel kernels (default: all cores).
    #[arg(long, global = true, env = "GRAPHCONV_WORKERS")]
    workers: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a neighbor table from a dataset's feature correlations or a grid.
    BuildGraph(BuildGraphArgs),
    /// Train a network and write a checkpoint plus a JSON-lines epoch log.
    Train(TrainArgs),
    /// Report test metrics for a checkpoint or a freshly initialized network.
    Evaluate(EvaluateArgs),
    /// Print the neighbors of one node.
    Inspect(InspectArgs),
}

/// Dataset sources. MNIST directories hold the four standard IDX files.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Directory with train-images-idx3-ubyte, train-labels-idx1-ubyte,
    /// t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte.
    #[arg(long, conflicts_with = "csv")]
    pub mnist_dir: Option<PathBuf>,
    /// Training CSV with a header row.
    #[arg(long, requires = "target")]
    pub csv: Option<PathBuf>,
    /// Held-out CSV with the same columns.
    #[arg(long, requires = "csv")]
    pub test_csv: Option<PathBuf>,
    /// Name of the target column in the CSV files.
    #[arg(long)]
    pub target: Option<String>,
    /// Use only the first N training rows.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first N test rows.
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildGraphArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Regular 8-connected grid graph, e.g. 28x28.
    #[arg(long, value_parser = parse_grid, conflicts_with_all = ["mnist_dir", "csv", "min_active", "keep_constant"])]
    pub grid: Option<(usize, usize)>,
    /// Import an existing table (binary .gnbt or its JSON export) instead of building one.
    #[arg(long, conflicts_with_all = ["grid", "mnist_dir", "csv", "min_active", "keep_constant", "k", "p", "variant", "tie_break", "diagnostic"])]
    pub table: Option<PathBuf>,
    /// Walk length of the expected-visit matrix.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Neighbors per node.
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    /// conv1 (plain gather) or conv2 (gather scaled by signed visit counts).
    #[arg(long, default_value = "conv1", value_parser = ["conv1", "conv2"])]
    pub variant: String,
    /// deterministic, or seeded:<u64> for a seeded random order within ties.
    #[arg(long, default_value = "deterministic")]
    pub tie_break: String,
    /// Drop features with fewer nonzero training values.
    #[arg(long, default_value_t = 0)]
    pub min_active: usize,
    /// Keep features that are constant on the training rows.
    #[arg(long)]
    pub keep_constant: bool,
    /// Also compute the stationary-distribution diagnostic.
    #[arg(long)]
    pub diagnostic: bool,
    /// Also write the table as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory of build-graph.
    #[arg(long)]
    pub graph: PathBuf,
    /// Hidden layers, e.g. C20, C20-FC512, FC512-FC512; empty for a linear model.
    #[arg(long, default_value = "")]
    pub arch: String,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory of build-graph.
    #[arg(long)]
    pub graph: PathBuf,
    /// Checkpoint written by train.
    #[arg(long, required_unless_present = "arch", conflicts_with = "arch")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate a freshly initialized network with this architecture instead.
    #[arg(long)]
    pub arch: Option<String>,
    /// Initialization seed with --arch.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write metrics.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InspectArgs {
    /// Table file (table.gnbt) or a build-graph output directory.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub node: usize,
    /// Print slots with multipliers and padding flags as JSON.
    #[arg(long)]
    pub json: bool,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h = h.parse().map_err(|_| format!("bad grid height {h:?}"))?;
    let w = w.parse().map_err(|_| format!("bad grid width {w:?}"))?;
    Ok((h, w))
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: worker count must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let workers = rayon::current_num_threads();

    let result = match &cli.command {
        Command::BuildGraph(a) => commands::build_graph(a, workers),
        Command::Train(a) => commands::train(a, workers),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
