mod commands;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Sketch recognition pipeline: augment corpora, train the CNN, extract
/// features, train the SVM, run the evaluation ladder, render heat-maps.
#[derive(Debug, Parser)]
#[command(name = "sketchrec", version, arg_required_else_help = true)]
struct Cli {
    /// Worker threads for parallel stages; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dilate every sketch of a corpus and write one file per plan variant.
    Augment(AugmentArgs),
    /// Train a network on MNIST IDX files or a sketch corpus.
    TrainCnn(TrainCnnArgs),
    /// Tap a layer for every sketch of a corpus and write a feature file.
    Extract(ExtractArgs),
    /// Train a one-vs-rest linear SVM on a feature file.
    TrainSvm(TrainSvmArgs),
    /// Run the shuffled train/test ladder and write a report.
    Evaluate(EvaluateArgs),
    /// Render the activation heat-map of a spatial layer for one sketch.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Network preset (lenet-modified, imagenet-shape) or descriptor JSON.
    #[arg(long, default_value = "lenet-modified")]
    net: String,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Corpus root with one directory of PGM files per category.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// `paper30` or a JSON plan file.
    #[arg(long, default_value = "paper30")]
    plan: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainCnnArgs {
    /// Directory with MNIST IDX files, or a sketch corpus root.
    #[arg(long)]
    input: PathBuf,
    /// Weight file to write.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    net: NetArgs,
    /// Also train on plan variants of each corpus sketch.
    #[arg(long)]
    plan: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    iters: u64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value = "ip1")]
    layer: String,
    /// Also extract plan variants of every dilated sketch.
    #[arg(long)]
    plan: Option<String>,
}

#[derive(Debug, Args)]
struct TrainSvmArgs {
    /// Feature file.
    #[arg(long)]
    input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Experiment configuration JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV path; the JSON twin and timings land beside it.
    #[arg(long)]
    report: PathBuf,
    /// Corpus root.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    plan: Option<String>,
    #[arg(long)]
    net: Option<String>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    layer: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    /// Sketch PGM file.
    #[arg(long)]
    input: PathBuf,
    /// PGM (gray) or PPM (color) output.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    weights: PathBuf,
    /// Spatial layer; defaults to the last convolution.
    #[arg(long)]
    layer: Option<String>,
    #[arg(long, default_value = "color", value_parser = ["gray", "color"])]
    mode: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("sketchrec: cannot start worker pool: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Augment(a) => commands::augment(a, cli.threads),
        Command::TrainCnn(a) => commands::train_cnn(a, cli.threads),
        Command::Extract(a) => commands::extract(a, cli.threads),
        Command::TrainSvm(a) => commands::train_svm(a, cli.threads),
        Command::Evaluate(a) => commands::evaluate(a, cli.threads),
        Command::Heatmap(a) => commands::heatmap(a, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sketchrec: error: {e}");
            ExitCode::from(2)
        }
    }
}
