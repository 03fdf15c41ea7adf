use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::{diffuseness, gain_condition_holds};
use crate::decompose::deeptd_estimate;
use crate::error::Result;
use crate::harness::config::{Estimator, ExperimentConfig, SignResolution};
use crate::harness::data::{generate_operational_network, OperationalNetwork};
use crate::harness::metrics::{correlation_metric, evaluate_on_fresh_sample};
use crate::ssa::{equivalent_signs, fit_with_signs, greedy_sign_resolve, oracle_sign_resolve};

const STREAM_NETWORK: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_ALS: u64 = 3;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `mix64(master + 0x9e3779b97f4a7c15 · (index + 1))`.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    mix64(master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)))
}

/// Seed of an independent random stream inside one trial.
pub fn stream_seed(trial_seed: u64, stream: u64) -> u64 {
    mix64(trial_seed ^ mix64(stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// `|⟨k̂^(ℓ), k^(ℓ)⟩|` per layer.
    pub correlations: Vec<f64>,
    /// The greedy signs agree with the oracle signs on every layer, up to flips
    /// that leave the predictor unchanged.
    pub sign_correct: bool,
    /// Test error under the configured sign resolution.
    pub test_mse: f64,
    /// Scale under the configured sign resolution.
    pub gamma: f64,
    pub greedy_test_mse: f64,
    pub oracle_test_mse: f64,
    pub alpha_cnn: f64,
    pub diffuseness: f64,
    pub rejections: usize,
    pub lambda: f64,
    pub greedy_sweeps: usize,
    /// Layers whose true kernel satisfies `1ᵀk ≥ 4‖k‖`.
    pub gain_condition: Vec<bool>,
}

/// The operational network and training set that trial `trial_index` uses.
pub fn trial_network(config: &ExperimentConfig, trial_index: usize) -> Result<OperationalNetwork> {
    let seed = trial_seed(config.master_seed, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_NETWORK));
    generate_operational_network(config, &mut rng)
}

/// One realization: draw an operational network and its training set,
/// estimate the kernels, resolve signs both greedily and with the oracle, and
/// score everything on a fresh test sample.
pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialResult> {
    config.validate()?;
    let seed = trial_seed(config.master_seed, trial_index);
    let op = trial_network(config, trial_index)?;
    let truth = &op.net;
    let data = &op.data;

    let als = config.als.options(stream_seed(seed, STREAM_ALS));
    let centered = config.estimator == Estimator::Deeptd;
    let decomposition = deeptd_estimate(&data.xs, &data.ys, &truth.tensor_shape(), &als, centered)?;

    let correlations = decomposition
        .factors
        .iter()
        .zip(truth.kernels())
        .map(|(f, k)| correlation_metric(f, k.weights()))
        .collect::<Result<Vec<_>>>()?;

    let activations = truth.activations();
    let greedy = greedy_sign_resolve(&data.xs, &data.ys, &decomposition.factors, activations)?;
    let oracle_signs = oracle_sign_resolve(&decomposition.factors, truth.kernels())?;
    let oracle = fit_with_signs(&data.xs, &data.ys, &decomposition.factors, &oracle_signs, activations)?;

    let mut test_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_TEST));
    let eval = evaluate_on_fresh_sample(&[&greedy, &oracle], truth, config.test_size, &mut test_rng)?;
    let (greedy_test_mse, oracle_test_mse) = (eval.test_mse[0], eval.test_mse[1]);

    let (test_mse, gamma) = match config.sign_resolution {
        SignResolution::Greedy => (greedy_test_mse, greedy.gamma),
        SignResolution::Oracle => (oracle_test_mse, oracle.gamma),
    };

    Ok(TrialResult {
        trial: trial_index,
        seed,
        correlations,
        sign_correct: equivalent_signs(&greedy.signs, activations)
            == equivalent_signs(&oracle_signs, activations),
        test_mse,
        gamma,
        greedy_test_mse,
        oracle_test_mse,
        alpha_cnn: eval.alpha_cnn,
        diffuseness: diffuseness(truth.kernels())?,
        rejections: op.rejections(),
        lambda: decomposition.lambda,
        greedy_sweeps: greedy.diagnostics.sweeps,
        gain_condition: truth.kernels().iter().map(gain_condition_holds).collect(),
    })
}
