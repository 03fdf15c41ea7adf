use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cnn::{CnnNetwork, Kernel};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, KernelDistribution};
use crate::tensor::norm2;

/// Upper bound on network draws before an operational network is declared unreachable.
pub const MAX_NETWORK_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSet {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn nonzero_label_fraction(&self) -> f64 {
        if self.ys.is_empty() {
            return 0.0;
        }
        self.ys.iter().filter(|&&y| y != 0.0).count() as f64 / self.ys.len() as f64
    }
}

pub fn gaussian_vector<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    (0..p).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn sample_kernels<R: Rng + ?Sized>(
    dims: &[usize],
    distribution: KernelDistribution,
    rng: &mut R,
) -> Result<Vec<Kernel>> {
    dims.iter()
        .map(|&d| {
            if d == 0 {
                return Err(Error::arg("kernel width must be positive"));
            }
            let weights = match distribution {
                KernelDistribution::Gaussian => loop {
                    let v = gaussian_vector(d, rng);
                    let n = norm2(&v);
                    if n > 0.0 {
                        break v.into_iter().map(|x| x / n).collect();
                    }
                },
                KernelDistribution::Rademacher => {
                    let s = 1.0 / (d as f64).sqrt();
                    (0..d).map(|_| if rng.gen::<bool>() { s } else { -s }).collect()
                }
            };
            Kernel::new(weights)
        })
        .collect()
}

/// `n` i.i.d. `N(0, I_p)` inputs labelled by the network.
pub fn sample_dataset<R: Rng + ?Sized>(net: &CnnNetwork, n: usize, rng: &mut R) -> Result<TrainingSet> {
    if n == 0 {
        return Err(Error::arg("dataset size must be at least 1"));
    }
    let p = net.input_len();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = gaussian_vector(p, rng);
        ys.push(net.output(&x)?);
        xs.push(x);
    }
    Ok(TrainingSet { xs, ys })
}

#[derive(Debug, Clone)]
pub struct OperationalNetwork {
    pub net: CnnNetwork,
    pub data: TrainingSet,
    /// Draws that were tried, including the accepted one.
    pub attempts: usize,
}

impl OperationalNetwork {
    pub fn rejections(&self) -> usize {
        self.attempts - 1
    }
}

/// Rejection-samples (kernels, training set) pairs until the fraction of
/// nonzero training labels reaches the configured threshold.
pub fn generate_operational_network<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<OperationalNetwork> {
    let dims = config.kernel_dims()?;
    let activations = config.activations();
    let n = config.sample_size()?;
    for attempt in 1..=MAX_NETWORK_ATTEMPTS {
        let kernels = sample_kernels(&dims, config.kernel_distribution, rng)?;
        let net = CnnNetwork::new(kernels, activations.clone())?;
        let data = sample_dataset(&net, n, rng)?;
        if data.nonzero_label_fraction() >= config.threshold {
            return Ok(OperationalNetwork {
                net,
                data,
                attempts: attempt,
            });
        }
    }
    Err(Error::config(format!(
        "no network with at least {:.0}% nonzero labels (threshold {}) after {} attempts",
        config.threshold * 100.0,
        config.threshold,
        MAX_NETWORK_ATTEMPTS
    )))
}
