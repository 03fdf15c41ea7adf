use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use deeptd::cnn::CnnNetwork;
use deeptd::decompose::{rank1_decompose, rank1_residual, AlsOptions};
use deeptd::harness::{
    run_experiment, trial_network, trial_seed, write_outputs, ExperimentConfig, TrainingSet,
};
use deeptd::{DenseTensor, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "deeptd", version, about = "Learn deep non-overlapping CNN kernels by rank-one tensor decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic experiment and write summary.json and trials.csv.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for running trials (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rank-one decomposition of a tensor stored as JSON `{"shape": [..], "entries": [..]}`.
    Decompose {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, default_value_t = AlsOptions::default().restarts)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump the planted network and training set of one trial as JSON.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Config(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
            Failure::Runtime(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_path(path).map_err(Failure::Config)
}

fn experiment(config: &Path, out: &Path, threads: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Config(Error::Argument(format!("thread pool: {e}"))))?;
    let report = pool.install(|| run_experiment(&cfg)).map_err(Failure::Runtime)?;
    write_outputs(&report, out).map_err(Failure::Runtime)?;
    let agg = &report.aggregate;
    println!(
        "{} trials completed, {} failed; outputs in {}",
        agg.trials_completed,
        agg.trials_failed,
        out.display()
    );
    if let Some(f) = agg.sign_correct_fraction {
        println!("correct signs: {f:.3}");
    }
    if let (Some(g), Some(o)) = (agg.greedy_test_mse, agg.oracle_test_mse) {
        println!("test MSE: greedy {:.4}, oracle {:.4}", g.mean, o.mean);
    }
    for (l, s) in agg.layer_correlation.iter().enumerate() {
        if let Some(s) = s {
            println!("layer {:>2}: mean correlation {:.4}", l + 1, s.mean);
        }
    }
    Ok(())
}

fn decompose(path: &Path, restarts: usize, seed: u64) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        Failure::Config(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    let tensor: DenseTensor = serde_json::from_str(&text).map_err(|source| {
        Failure::Config(Error::Json {
            path: path.to_path_buf(),
            source,
        })
    })?;
    let opts = AlsOptions {
        restarts,
        seed,
        ..AlsOptions::default()
    };
    let result = rank1_decompose(&tensor, &opts).map_err(Failure::Runtime)?;
    let residual = rank1_residual(&tensor, &result).map_err(Failure::Runtime)?;
    println!("lambda: {}", result.lambda);
    for (l, f) in result.factors.iter().enumerate() {
        let entries: Vec<String> = f.iter().map(|v| v.to_string()).collect();
        println!("factor {}: [{}]", l + 1, entries.join(", "));
    }
    println!("residual: {residual}");
    println!("converged: {}", result.converged);
    Ok(())
}

#[derive(Serialize)]
struct GeneratedTrial<'a> {
    trial: usize,
    seed: u64,
    rejections: usize,
    network: &'a CnnNetwork,
    data: &'a TrainingSet,
}

fn generate(config: &Path, out: &Path, trial: usize) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let seed = trial_seed(cfg.master_seed, trial);
    let op = trial_network(&cfg, trial).map_err(Failure::Runtime)?;
    let dump = GeneratedTrial {
        trial,
        seed,
        rejections: op.rejections(),
        network: &op.net,
        data: &op.data,
    };
    let json = serde_json::to_string(&dump).map_err(|source| {
        Failure::Runtime(Error::Json {
            path: out.to_path_buf(),
            source,
        })
    })?;
    std::fs::write(out, json).map_err(|source| {
        Failure::Runtime(Error::Io {
            path: out.to_path_buf(),
            source,
        })
    })?;
    println!("wrote {} samples to {}", op.data.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Experiment {
            config,
            out,
            threads,
        } => experiment(config, out, *threads),
        Command::Decompose {
            tensor,
            restarts,
            seed,
        } => decompose(tensor, *restarts, *seed),
        Command::Generate { config, out, trial } => generate(config, out, *trial),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
