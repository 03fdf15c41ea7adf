use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnn::ActivationKind;
use crate::decompose::AlsOptions;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelDistribution {
    /// i.i.d. standard normal entries, normalized to unit norm.
    Gaussian,
    /// i.i.d. `±1/√d` entries.
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Centered empirical tensor.
    Deeptd,
    /// Uncentered empirical tensor.
    Naivetd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignResolution {
    Greedy,
    Oracle,
}

/// Kernel lengths: one value shared by every layer, or one per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Widths {
    Uniform(usize),
    PerLayer(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlsSettings {
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for AlsSettings {
    fn default() -> Self {
        let d = AlsOptions::default();
        Self {
            restarts: d.restarts,
            max_iters: d.max_iters,
            rel_tol: d.rel_tol,
        }
    }
}

impl AlsSettings {
    pub fn options(&self, seed: u64) -> AlsOptions {
        AlsOptions {
            restarts: self.restarts,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            seed,
        }
    }
}

fn default_hidden() -> ActivationKind {
    ActivationKind::Relu
}
fn default_final() -> ActivationKind {
    ActivationKind::Identity
}
fn default_distribution() -> KernelDistribution {
    KernelDistribution::Gaussian
}
fn default_test_size() -> usize {
    10_000
}
fn default_threshold() -> f64 {
    0.5
}
fn default_estimator() -> Estimator {
    Estimator::Deeptd
}
fn default_sign_resolution() -> SignResolution {
    SignResolution::Greedy
}

/// Declarative description of one synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub depth: usize,
    pub widths: Widths,
    #[serde(default = "default_hidden")]
    pub hidden_activation: ActivationKind,
    #[serde(default = "default_final")]
    pub final_activation: ActivationKind,
    #[serde(default = "default_distribution")]
    pub kernel_distribution: KernelDistribution,
    /// `N`; the training set has `n = N · Σ d_ℓ` samples.
    pub oversampling: usize,
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// Minimum fraction of nonzero training labels for a network to be kept.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub master_seed: u64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    #[serde(default = "default_sign_resolution")]
    pub sign_resolution: SignResolution,
    #[serde(default)]
    pub als: AlsSettings,
}

impl ExperimentConfig {
    /// ReLU hidden layers, identity output, Gaussian kernels, DeepTD with
    /// greedy signs and default solver settings.
    pub fn new(depth: usize, width: usize, oversampling: usize, trials: usize, master_seed: u64) -> Self {
        Self {
            depth,
            widths: Widths::Uniform(width),
            hidden_activation: default_hidden(),
            final_activation: default_final(),
            kernel_distribution: default_distribution(),
            oversampling,
            trials,
            test_size: default_test_size(),
            threshold: default_threshold(),
            master_seed,
            estimator: default_estimator(),
            sign_resolution: default_sign_resolution(),
            als: AlsSettings::default(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::config("depth must be at least 1"));
        }
        let dims = self.kernel_dims()?;
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::config("kernel widths must be positive"));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::config("input dimension overflows"))?;
        if self.oversampling == 0 {
            return Err(Error::config("oversampling factor must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(Error::config("test_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        self.hidden_activation
            .validate()
            .and_then(|_| self.final_activation.validate())
            .map_err(|e| Error::config(e.to_string()))?;
        self.als
            .options(0)
            .validate()
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    pub fn kernel_dims(&self) -> Result<Vec<usize>> {
        match &self.widths {
            Widths::Uniform(d) => Ok(vec![*d; self.depth]),
            Widths::PerLayer(ds) if ds.len() == self.depth => Ok(ds.clone()),
            Widths::PerLayer(ds) => Err(Error::config(format!(
                "{} kernel widths given for depth {}",
                ds.len(),
                self.depth
            ))),
        }
    }

    pub fn activations(&self) -> Vec<ActivationKind> {
        let mut acts = vec![self.hidden_activation; self.depth];
        acts[self.depth - 1] = self.final_activation;
        acts
    }

    /// `n = N · Σ d_ℓ`.
    pub fn sample_size(&self) -> Result<usize> {
        Ok(self.oversampling * self.kernel_dims()?.iter().sum::<usize>())
    }
}
