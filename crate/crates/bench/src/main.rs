use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use featmem_bench::config::{DatasetSource, ExperimentConfig, ReportFormat};
use featmem_bench::experiment::{build_memory, corrupted_query, load_items};
use featmem_bench::report::{read_json_report, write_report};
use featmem_bench::{run_mean_sweep, run_retrieval_experiment, run_timing, BenchError, Result};
use featmem_core::corrupt::{corrupt, AugmentationPipeline, CorruptionSpec};
use featmem_core::format::{save_dataset, save_model};
use featmem_core::memory::MemoryStore;
use featmem_core::nn::{
    train_autoencoder, train_contrastive, Activation, AutoencoderOptions, Denominator, Optimizer,
    TrainConfig, DEFAULT_AUTOENCODER_DIMS,
};
use featmem_core::{FeatureMap, GenerativeMap};

#[derive(Parser)]
#[command(name = "featmem", version, about = "Associative-memory retrieval benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialise a dataset as an AMEM file.
    Store {
        #[arg(long)]
        dataset: DatasetSource,
        #[arg(long)]
        subset: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve one corrupted stored item and print the result.
    Retrieve {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Index of the stored item to corrupt and query.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Write the retrieved vector as a one-item AMEM file.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Corrupt every item of a dataset and write an AMEM file.
    Corrupt {
        #[arg(long)]
        dataset: DatasetSource,
        /// Corruption spec, e.g. `gaussian:mean=0.2,variance=0.1,seed=4`.
        #[arg(long)]
        corruption: CorruptionSpec,
        #[arg(long)]
        subset: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an MSE autoencoder and save its encoder, decoder, and full model.
    TrainAe {
        #[command(flatten)]
        train: TrainArgs,
        /// Activation of the bottleneck layer.
        #[arg(long, default_value = "relu", value_parser = parse_activation)]
        bottleneck: Activation,
    },
    /// Train an encoder with the NT-Xent contrastive loss.
    TrainContrastive {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        /// Exclude the positive pair from the loss denominator.
        #[arg(long)]
        negatives_only: bool,
    },
    /// Run the (corruption × similarity) retrieval grid.
    Bench {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Sweep the mean of Gaussian noise.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Time query encoding, scoring, and retrieval.
    Timing {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Convert a JSON retrieval report to CSV or JSON.
    ExportReport {
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `synthetic:N[:seed]`, `mnist:DIR[:split]`, or an AMEM path.
    #[arg(long)]
    dataset: Option<String>,
    /// `uhn`, `semantic`, or `fully_semantic`.
    #[arg(long)]
    mode: Option<String>,
    /// `identity`, `model:PATH`, or `table:STORED[,QUERIES]`.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    decoder: Option<String>,
    /// Comma-separated similarity names.
    #[arg(long)]
    similarity: Option<String>,
    #[arg(long)]
    separation: Option<String>,
    /// Shorthand for a softmax separation with this β.
    #[arg(long)]
    beta: Option<String>,
    /// Semicolon-separated corruption kinds.
    #[arg(long)]
    corruption: Option<String>,
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    means: Option<String>,
    #[arg(long)]
    variance: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// L2-normalise stored embeddings (semantic mode).
    #[arg(long)]
    normalize: bool,
    /// Run queries on one thread.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("dataset", &self.dataset),
            ("mode", &self.mode),
            ("features", &self.features),
            ("decoder", &self.decoder),
            ("similarity", &self.similarity),
            ("separation", &self.separation),
            ("beta", &self.beta),
            ("corruption", &self.corruption),
            ("subset", &self.subset),
            ("seed", &self.seed),
            ("means", &self.means),
            ("variance", &self.variance),
            ("reps", &self.reps),
            ("format", &self.format),
            ("output", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if self.normalize {
            config.normalize = true;
        }
        if self.serial {
            config.parallel = false;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: DatasetSource,
    #[arg(long)]
    subset: Option<usize>,
    /// Comma-separated layer widths, input first.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// `sgd` or `adam`.
    #[arg(long)]
    optimizer: Option<Optimizer>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; files get `.encoder.amdl`-style suffixes.
    #[arg(long)]
    out: PathBuf,
}

impl TrainArgs {
    fn config(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            optimizer: self.optimizer.unwrap_or(base.optimizer),
            weight_decay: self.weight_decay.unwrap_or(base.weight_decay),
            seed: self.seed,
            ..base
        }
    }
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    match s {
        "linear" => Ok(Activation::Linear),
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        other => Err(format!("unknown activation `{other}`")),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn print_history(history: &[f64]) {
    for (epoch, loss) in history.iter().enumerate() {
        eprintln!("epoch {:>4}  loss {loss:.6}", epoch + 1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Store { dataset, subset, out } => {
            let items = load_items(&dataset, subset)?;
            save_dataset(&items, &out)?;
            eprintln!("stored {} items of dimension {}", items.len(), items.dim());
        }
        Command::Retrieve { exp, index, save } => {
            let config = exp.resolve()?;
            config.validate()?;
            let items = load_items(&config.dataset, config.subset)?;
            if index >= items.len() {
                return Err(BenchError::InvalidValue {
                    key: "index".into(),
                    message: format!("{index} is out of range for {} items", items.len()),
                });
            }
            let memory = build_memory(&config, &items)?;
            let query = corrupted_query(&items, index, &config.corruptions[0], config.seed)?;
            for &kind in &config.similarities {
                let r = memory.as_memory().retrieve(&query, kind, &config.separation)?;
                let weight = r.weights[r.top_index];
                let status = if r.top_index == index { "hit" } else { "miss" };
                println!("{kind}: top {} (weight {weight:.4}) {status}", r.top_index);
                if let Some(path) = &save {
                    let mut out = MemoryStore::from_flat(r.vector.len(), 1, r.vector.values().to_vec())?;
                    if let Some(shape) = r.vector.shape() {
                        out = out.with_shape(shape)?;
                    }
                    save_dataset(&out, path)?;
                }
            }
        }
        Command::Corrupt {
            dataset,
            corruption,
            subset,
            out,
        } => {
            let items = load_items(&dataset, subset)?;
            let seeds = featmem_core::derive_seed;
            let columns = (0..items.len())
                .map(|i| {
                    let spec = corruption.kind.with_seed(seeds(corruption.seed, i as u64));
                    Ok(corrupt(&items.item(i), &spec)?.values().to_vec())
                })
                .collect::<Result<Vec<_>>>()?;
            let mut store = MemoryStore::from_columns(columns)?;
            if let Some(shape) = items.shape() {
                store = store.with_shape(shape)?;
            }
            save_dataset(&store, &out)?;
            eprintln!("wrote {} corrupted items ({corruption})", store.len());
        }
        Command::TrainAe { train, bottleneck } => {
            let items = load_items(&train.dataset, train.subset)?;
            let dims = train.dims.clone().unwrap_or(DEFAULT_AUTOENCODER_DIMS.to_vec());
            let config = train.config(TrainConfig::autoencoder());
            let opts = AutoencoderOptions {
                bottleneck,
                ..AutoencoderOptions::default()
            };
            let out = train_autoencoder(&items, &dims, &config, opts)?;
            print_history(&out.history);
            save_model(&out.model, with_suffix(&train.out, ".amdl"))?;
            if let FeatureMap::MlpEncoder(m) = &out.encoder {
                save_model(m, with_suffix(&train.out, ".encoder.amdl"))?;
            }
            if let GenerativeMap::MlpDecoder(m) = &out.decoder {
                save_model(m, with_suffix(&train.out, ".decoder.amdl"))?;
            }
        }
        Command::TrainContrastive {
            train,
            temperature,
            negatives_only,
        } => {
            let items = load_items(&train.dataset, train.subset)?;
            let dims = train.dims.clone().unwrap_or(vec![items.dim(), 256, 64]);
            let config = TrainConfig {
                temperature,
                denominator: if negatives_only {
                    Denominator::NegativesOnly
                } else {
                    Denominator::AllOthers
                },
                ..train.config(TrainConfig::contrastive())
            };
            let out = train_contrastive(&items, &AugmentationPipeline::standard(), &dims, &config)?;
            print_history(&out.history);
            save_model(&out.model, with_suffix(&train.out, ".encoder.amdl"))?;
        }
        Command::Bench { exp } => {
            let config = exp.resolve()?;
            let report = run_retrieval_experiment(&config)?;
            write_report(&report, config.format, config.output.as_deref())?;
        }
        Command::Sweep { exp } => {
            let config = exp.resolve()?;
            let report = run_mean_sweep(&config)?;
            write_report(&report, config.format, config.output.as_deref())?;
        }
        Command::Timing { exp } => {
            let mut config = exp.resolve()?;
            config.parallel = false;
            let report = run_timing(&config)?;
            write_report(&report, config.format, config.output.as_deref())?;
        }
        Command::ExportReport { input, format, out } => {
            let report = read_json_report(&input)?;
            write_report(&report, format, out.as_deref())?;
        }
    }
    Ok(())
}

fn init_threads() {
    if let Some(n) = std::env::var("FEATMEM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    init_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
