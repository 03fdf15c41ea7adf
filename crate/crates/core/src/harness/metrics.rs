use rand::Rng;

use crate::cnn::CnnNetwork;
use crate::error::{Error, Result};
use crate::harness::data::gaussian_vector;
use crate::ssa::{estimate_network, SignedEstimate};
use crate::tensor::{dot, norm2};

/// `|⟨k̂, k⟩|` for unit vectors; blind to the sign of either argument.
pub fn correlation_metric(k_hat: &[f64], k: &[f64]) -> Result<f64> {
    if k_hat.len() != k.len() {
        return Err(Error::dim(format!(
            "estimate has length {}, kernel has length {}",
            k_hat.len(),
            k.len()
        )));
    }
    for (name, v) in [("estimate", k_hat), ("kernel", k)] {
        let n = norm2(v);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::arg(format!("{name} has norm {n}, expected 1")));
        }
    }
    Ok(dot(k_hat, k).abs())
}

/// Test errors of several estimates plus a CNN-gain estimate, all on one
/// fresh Gaussian sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FreshEvaluation {
    pub test_mse: Vec<f64>,
    pub alpha_cnn: f64,
}

pub fn evaluate_on_fresh_sample<R: Rng + ?Sized>(
    estimates: &[&SignedEstimate],
    truth: &CnnNetwork,
    n_test: usize,
    rng: &mut R,
) -> Result<FreshEvaluation> {
    if n_test == 0 {
        return Err(Error::arg("test set must contain at least one sample"));
    }
    let activations = truth.activations();
    let nets = estimates
        .iter()
        .map(|e| estimate_network(e, activations))
        .collect::<Result<Vec<_>>>()?;
    let mut sq_err = vec![0.0; estimates.len()];
    let mut energy = 0.0;
    let mut slope_sums = vec![0.0; truth.depth()];
    for _ in 0..n_test {
        let x = gaussian_vector(truth.input_len(), rng);
        let trace = truth.forward(&x)?;
        let y = trace.output;
        energy += y * y;
        for ((s, pre), act) in slope_sums.iter_mut().zip(&trace.pre_activations).zip(activations) {
            *s += act.derivative(pre[0]);
        }
        for ((err, net), est) in sq_err.iter_mut().zip(&nets).zip(estimates) {
            let r = y - est.gamma * net.output(&x)?;
            *err += r * r;
        }
    }
    if energy == 0.0 {
        return Err(Error::Degenerate(
            "all test labels are zero, normalized test error undefined".into(),
        ));
    }
    let n = n_test as f64;
    Ok(FreshEvaluation {
        test_mse: sq_err.into_iter().map(|e| e / energy).collect(),
        alpha_cnn: slope_sums.iter().map(|s| s / n).product(),
    })
}

/// `Σ (y − γ f̂(x))² / Σ y²` over `n_test` fresh inputs.
pub fn test_mse<R: Rng + ?Sized>(
    estimate: &SignedEstimate,
    truth: &CnnNetwork,
    n_test: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(evaluate_on_fresh_sample(&[estimate], truth, n_test, rng)?.test_mse[0])
}
