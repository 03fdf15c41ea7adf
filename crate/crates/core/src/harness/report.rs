use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::trial::{run_trial, trial_seed, TrialResult};

pub const TRIALS_CSV_HEADER: &str =
    "trial,seed,layer,correlation,sign_correct,test_mse,gamma,alpha_cnn,diffuseness,rejections";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Some(Stats {
            mean,
            median,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials_completed: usize,
    pub trials_failed: usize,
    /// Fraction of completed trials whose greedy signs matched the oracle.
    pub sign_correct_fraction: Option<f64>,
    /// Correlation statistics for layers `1..=D`.
    pub layer_correlation: Vec<Option<Stats>>,
    pub test_mse: Option<Stats>,
    pub greedy_test_mse: Option<Stats>,
    pub oracle_test_mse: Option<Stats>,
    pub gamma: Option<Stats>,
    pub alpha_cnn: Option<Stats>,
    pub diffuseness: Option<Stats>,
    pub rejections: Option<Stats>,
    /// Per layer, fraction of trials whose true kernel met `1ᵀk ≥ 4‖k‖`.
    pub gain_condition_fraction: Vec<Option<f64>>,
}

impl Aggregate {
    pub fn from_trials(depth: usize, trials: &[TrialResult], failed: usize) -> Self {
        let col = |f: fn(&TrialResult) -> f64| Stats::of(&trials.iter().map(f).collect::<Vec<_>>());
        let n = trials.len() as f64;
        let frac = |count: usize| (!trials.is_empty()).then(|| count as f64 / n);
        Aggregate {
            trials_completed: trials.len(),
            trials_failed: failed,
            sign_correct_fraction: frac(trials.iter().filter(|t| t.sign_correct).count()),
            layer_correlation: (0..depth)
                .map(|l| Stats::of(&trials.iter().map(|t| t.correlations[l]).collect::<Vec<_>>()))
                .collect(),
            test_mse: col(|t| t.test_mse),
            greedy_test_mse: col(|t| t.greedy_test_mse),
            oracle_test_mse: col(|t| t.oracle_test_mse),
            gamma: col(|t| t.gamma),
            alpha_cnn: col(|t| t.alpha_cnn),
            diffuseness: col(|t| t.diffuseness),
            rejections: col(|t| t.rejections as f64),
            gain_condition_fraction: (0..depth)
                .map(|l| frac(trials.iter().filter(|t| t.gain_condition[l]).count()))
                .collect(),
        }
    }

    /// Mean correlation at layer `layer` (1-based), if any trial completed.
    pub fn mean_correlation(&self, layer: usize) -> Option<f64> {
        self.layer_correlation.get(layer - 1).copied().flatten().map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub aggregate: Aggregate,
    pub failures: Vec<TrialFailure>,
    /// Completed trials ordered by index.
    pub trials: Vec<TrialResult>,
}

/// Runs every trial (in parallel on the current rayon pool) and folds the
/// results in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let outcomes: Vec<(usize, Result<TrialResult>)> = (0..config.trials)
        .into_par_iter()
        .map(|i| (i, run_trial(config, i)))
        .collect();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => failures.push(TrialFailure {
                trial: i,
                seed: trial_seed(config.master_seed, i),
                error: e.to_string(),
            }),
        }
    }
    let aggregate = Aggregate::from_trials(config.depth, &trials, failures.len());
    Ok(ExperimentReport {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        aggregate,
        failures,
        trials,
    })
}

/// One row per trial × layer, trial-level fields repeated.
pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut out = String::new();
    out.push_str(TRIALS_CSV_HEADER);
    out.push('\n');
    for t in trials {
        for (l, c) in t.correlations.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                t.trial,
                t.seed,
                l + 1,
                c,
                u8::from(t.sign_correct),
                t.test_mse,
                t.gamma,
                t.alpha_cnn,
                t.diffuseness,
                t.rejections
            )
            .expect("writing to a String");
        }
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    artifact_version: &'a str,
    config: &'a ExperimentConfig,
    aggregate: &'a Aggregate,
    failures: &'a [TrialFailure],
}

/// Writes `summary.json` and `trials.csv` into `dir`, creating it if needed.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let summary = Summary {
        artifact_version: &report.artifact_version,
        config: &report.config,
        aggregate: &report.aggregate,
        failures: &report.failures,
    };
    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|source| Error::Json {
        path: summary_path.clone(),
        source,
    })?;
    fs::write(&summary_path, json + "\n").map_err(io(&summary_path))?;
    let csv_path = dir.join("trials.csv");
    fs::write(&csv_path, trials_csv(&report.trials)).map_err(io(&csv_path))?;
    Ok(())
}
