//! Synthetic experiments: planted networks, Gaussian data, estimation, sign
//! resolution, metrics and on-disk reports.
//!
//! Each trial draws its randomness from `trial_seed(master_seed, index)`, a
//! SplitMix64 mix of the master seed and the trial index, and splits it into
//! independent streams for the network/training data, the test sample and
//! the solver initialization. Reports are folded in trial order, so outputs
//! do not depend on how trials are scheduled.

pub mod config;
pub mod data;
pub mod metrics;
pub mod report;
pub mod trial;

pub use config::{AlsSettings, Estimator, ExperimentConfig, KernelDistribution, SignResolution, Widths};
pub use data::{
    gaussian_vector, generate_operational_network, sample_dataset, sample_kernels,
    OperationalNetwork, TrainingSet, MAX_NETWORK_ATTEMPTS,
};
pub use metrics::{correlation_metric, evaluate_on_fresh_sample, test_mse, FreshEvaluation};
pub use report::{
    run_experiment, trials_csv, write_outputs, Aggregate, ExperimentReport, Stats, TrialFailure,
    TRIALS_CSV_HEADER,
};
pub use trial::{mix64, run_trial, stream_seed, trial_network, trial_seed, TrialResult};
