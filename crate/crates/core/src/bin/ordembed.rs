//! Command-line harness: dataset/triplet generation, single embeddings,
//! standalone evaluation, and the experiment runner.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when an
//! experiment finished with at least one failed cell.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ordembed::data_io::{self, GeneratorKind};
use ordembed::eval::{self, KnnSplit};
use ordembed::oenn::{self, OennConfig};
use ordembed::optim;
use ordembed::runner::{self, DataSource, ExperimentKind, ExperimentSpec};
use ordembed::triplets;
use ordembed::{AlgoConfig, Algorithm};

/// Environment variable holding the default experiment output directory.
const OUT_DIR_ENV: &str = "ORDEMBED_OUT_DIR";

#[derive(Parser)]
#[command(name = "ordembed", version, about = "Ordinal embedding toolkit and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Triplet utilities.
    Triplets {
        #[command(subcommand)]
        command: TripletsCommand,
    },
    /// Train one algorithm on a triplet file and write the embedding.
    Embed(EmbedArgs),
    /// Evaluate an embedding against ground truth and triplets.
    Eval(EvalArgs),
    /// Experiment grids.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate a synthetic dataset and write it as CSV.
    Gen {
        /// Generator kind: uniform | gmm2.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Project the generated data onto this many principal components.
        #[arg(long)]
        pca: Option<usize>,
    },
}

#[derive(Subcommand)]
enum TripletsCommand {
    /// Sample ground-truth-consistent triplets from a dataset CSV.
    Gen {
        #[arg(long)]
        dataset: PathBuf,
        /// Explicit triplet count; default is the budget formula.
        #[arg(long)]
        count: Option<usize>,
        /// Budget multiplier for `multiplier * n * d * ln n`.
        #[arg(long, default_value_t = 2.0)]
        multiplier: f64,
        /// Embedding dimension used by the budget formula.
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EmbedArgs {
    /// Algorithm: soe | ste | tste | ckl | cklx | gnmds | forte | oenn.
    #[arg(long)]
    algorithm: String,
    /// Triplet file to train on.
    #[arg(long)]
    triplets: PathBuf,
    /// Embedding dimension.
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output embedding CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trace_reg: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    /// OENN hidden width (default max(120, ceil(2 d ln n))).
    #[arg(long)]
    width: Option<usize>,
    /// OENN input code length (default ceil(log2 n)).
    #[arg(long)]
    encoding_length: Option<usize>,
    /// Write trained OENN parameters here for later extension.
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Embedding CSV to score.
    #[arg(long)]
    embedding: PathBuf,
    /// Ground-truth dataset CSV.
    #[arg(long)]
    dataset: PathBuf,
    /// Training triplet file (for the train triplet error).
    #[arg(long)]
    triplets: PathBuf,
    /// Seed for test-triplet sampling and the kNN split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run a grid of (algorithm, sweep value, seed) cells.
    Run(RunArgs),
    /// Flatten a finished run into plot-ready CSV tables.
    Plotdata {
        /// Run directory (containing manifest.json).
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// general | convergence | triplet-sweep | dim-sweep | scale-sweep.
    #[arg(long)]
    experiment: String,
    /// Comma-separated algorithms.
    #[arg(long, default_value = "soe,ste,tste,ckl,cklx,gnmds,forte,oenn")]
    algorithms: String,
    /// Synthetic source: uniform | gmm2 (mutually exclusive with --data).
    #[arg(long, conflicts_with = "data")]
    generator: Option<String>,
    /// Dataset CSV source.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Item count for generator sources.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Input dimension for generator sources.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated sweep values (defaults depend on the experiment).
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Triplet budget multiplier for non-sweep experiments.
    #[arg(long, default_value_t = 2.0)]
    multiplier: f64,
    /// Output directory (default: $ORDEMBED_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cells to run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|_| format!("invalid {what} '{v}'")))
        .collect()
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::try_parse().map_err(|e| e.to_string())?;
    match cli.command {
        Command::Dataset { command } => match command {
            DatasetCommand::Gen { kind, n, dim, seed, out, pca } => {
                let kind = match kind.to_ascii_lowercase().as_str() {
                    "uniform" => GeneratorKind::Uniform,
                    "gmm2" => GeneratorKind::Gmm2,
                    other => return Err(format!("unknown generator '{other}'")),
                };
                let mut ds = data_io::GeneratorSpec { kind, n, dim, seed }
                    .generate()
                    .map_err(|e| e.to_string())?;
                if let Some(target) = pca {
                    ds = data_io::pca_project(&ds, target).map_err(|e| e.to_string())?;
                }
                data_io::write_dataset(&out, &ds).map_err(|e| e.to_string())?;
                println!("wrote {} points to {}", ds.n(), out.display());
            }
        },
        Command::Triplets { command } => match command {
            TripletsCommand::Gen { dataset, count, multiplier, d, seed, out } => {
                let ds = data_io::read_dataset(&dataset).map_err(|e| e.to_string())?;
                let count =
                    count.unwrap_or_else(|| triplets::default_triplet_count(ds.n(), d, multiplier));
                let ts = triplets::generate_triplets(&ds, count, seed).map_err(|e| e.to_string())?;
                data_io::write_triplets(&out, &ts).map_err(|e| e.to_string())?;
                println!("wrote {count} triplets to {}", out.display());
            }
        },
        Command::Embed(args) => {
            let algorithm = Algorithm::parse(&args.algorithm).map_err(|e| e.to_string())?;
            let ts = data_io::read_triplets(&args.triplets).map_err(|e| e.to_string())?;
            let result = if algorithm == Algorithm::Oenn {
                let mut cfg = OennConfig::new(ts.n(), args.d, args.seed);
                if let Some(v) = args.learning_rate {
                    cfg.learning_rate = v;
                }
                if let Some(v) = args.batch_size {
                    cfg.batch_size = v;
                }
                if let Some(v) = args.max_epochs {
                    cfg.max_epochs = v;
                }
                if let Some(v) = args.width {
                    cfg.width = v;
                }
                if let Some(v) = args.encoding_length {
                    cfg.encoding_length = v;
                }
                let (result, params) = oenn::oenn_train(&ts, &cfg).map_err(|e| e.to_string())?;
                if let Some(path) = &args.params_out {
                    oenn::write_embnet_params(path, &params).map_err(|e| e.to_string())?;
                }
                result
            } else {
                let mut cfg = AlgoConfig::for_algorithm(algorithm, args.seed);
                if let Some(v) = args.learning_rate {
                    cfg.learning_rate = v;
                }
                if let Some(v) = args.batch_size {
                    cfg.batch_size = v;
                }
                if let Some(v) = args.max_epochs {
                    cfg.max_epochs = v;
                }
                if let Some(v) = args.margin {
                    cfg.margin = v;
                }
                if let Some(v) = args.mu {
                    cfg.mu = v;
                }
                if args.alpha.is_some() {
                    cfg.alpha = args.alpha;
                }
                if let Some(v) = args.trace_reg {
                    cfg.trace_reg = v;
                }
                if let Some(v) = args.rho {
                    cfg.rho = v;
                }
                if let Some(v) = args.c1 {
                    cfg.c1 = v;
                }
                optim::train(&ts, &cfg, args.d).map_err(|e| e.to_string())?
            };
            data_io::write_embedding(&args.out, &result.embedding).map_err(|e| e.to_string())?;
            println!(
                "trained {algorithm} for {} epochs ({:.2}s); embedding written to {}",
                result.epochs_run,
                result.wall_time_seconds,
                args.out.display()
            );
        }
        Command::Eval(args) => {
            let emb = data_io::read_embedding(&args.embedding).map_err(|e| e.to_string())?;
            let ds = data_io::read_dataset(&args.dataset).map_err(|e| e.to_string())?;
            let train_set = data_io::read_triplets(&args.triplets).map_err(|e| e.to_string())?;
            let test_set = triplets::sample_test_triplets(&ds, args.seed);
            let train_err = eval::triplet_error(&emb, &train_set).map_err(|e| e.to_string())?;
            let test_err = eval::triplet_error(&emb, &test_set).map_err(|e| e.to_string())?;
            let procrustes =
                eval::procrustes_disparity(&emb, ds.points()).map_err(|e| e.to_string())?;
            let knn = match ds.labels() {
                Some(labels) => Some(
                    eval::knn_error(&emb, labels, &KnnSplit::for_n(ds.n(), args.seed))
                        .map_err(|e| e.to_string())?,
                ),
                None => None,
            };
            let report = eval::assemble_report(train_err, test_err, procrustes, knn, 0.0, 0, vec![])
                .map_err(|e| e.to_string())?;
            data_io::write_report(&args.out, &report).map_err(|e| e.to_string())?;
            println!(
                "train {train_err:.4}  test {test_err:.4}  procrustes {procrustes:.6}  knn {}",
                knn.map_or("n/a".into(), |k| format!("{k:.4}"))
            );
        }
        Command::Experiment { command } => match command {
            ExperimentCommand::Run(args) => {
                let experiment = ExperimentKind::parse(&args.experiment).map_err(|e| e.to_string())?;
                let algorithms: Vec<Algorithm> = args
                    .algorithms
                    .split(',')
                    .map(|s| Algorithm::parse(s.trim()).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                let source = match (&args.generator, &args.data) {
                    (_, Some(path)) => DataSource::File { path: path.clone() },
                    (Some(g), None) => {
                        let kind = match g.to_ascii_lowercase().as_str() {
                            "uniform" => GeneratorKind::Uniform,
                            "gmm2" => GeneratorKind::Gmm2,
                            other => return Err(format!("unknown generator '{other}'")),
                        };
                        DataSource::Generator { kind, n: args.n, dim: args.dim }
                    }
                    (None, None) => DataSource::Generator {
                        kind: GeneratorKind::Uniform,
                        n: args.n,
                        dim: args.dim,
                    },
                };
                let output_dir = match args.out {
                    Some(p) => p,
                    None => std::env::var_os(OUT_DIR_ENV)
                        .map(PathBuf::from)
                        .ok_or_else(|| {
                            format!("--out not given and {OUT_DIR_ENV} is not set")
                        })?,
                };
                let spec = ExperimentSpec {
                    experiment,
                    source,
                    algorithms,
                    sweep: match &args.sweep {
                        Some(s) => parse_list(s, "sweep value")?,
                        None => vec![],
                    },
                    seeds: parse_list(&args.seeds, "seed")?,
                    embedding_dim: args.d,
                    multiplier: args.multiplier,
                    output_dir,
                    jobs: args.jobs,
                };
                let summary = runner::run_experiment(&spec).map_err(|e| e.to_string())?;
                println!(
                    "{} ok, {} failed; manifest at {}",
                    summary.cells_ok,
                    summary.cells_failed,
                    summary.manifest_path.display()
                );
                if summary.cells_failed > 0 {
                    return Ok(ExitCode::from(2));
                }
            }
            ExperimentCommand::Plotdata { dir } => {
                let summary = runner::emit_plot_data(&dir).map_err(|e| e.to_string())?;
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                println!("wrote {} tables under {}", summary.tables.len(), dir.join("plots").display());
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
    }
}
