//! Empirical moment tensor and its best rank-one approximation.
//!
//! The kernels of the network are read off as the factors of
//! `argmax ⟨T_n, v_1 ⊗ … ⊗ v_D⟩` over unit vectors, where
//! `T_n = (1/n) Σ (y_i − ȳ) 𝒯(x_i)`. The maximization runs alternating
//! exact updates `v_ℓ ← normalize(T ×_{m≠ℓ} v_m)`, which is the rank-one case
//! of CP-ALS (higher-order power iteration).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    contract_all_but, dot, frobenius_norm, norm2, outer_product, DenseTensor, TensorShape,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlsOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 500,
            rel_tol: 1e-9,
            seed: 0,
        }
    }
}

impl AlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::arg("ALS needs at least one restart"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("ALS needs at least one iteration"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::arg(format!("ALS tolerance {} must be positive", self.rel_tol)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    /// Unit-norm factors `v̂_1, …, v̂_D`.
    pub factors: Vec<Vec<f64>>,
    /// `⟨T, ⊗v̂⟩ ≥ 0`.
    pub lambda: f64,
    /// Objective after every sweep, one sequence per non-degenerate restart.
    pub objective_history: Vec<Vec<f64>>,
    /// Restarts that ran to completion without the contraction vanishing.
    pub restarts_used: usize,
    /// The winning restart met `rel_tol` before `max_iters`.
    pub converged: bool,
}

/// `(1/n) Σ w_i 𝒯(x_i)` with `w_i = y_i − ȳ` (centered) or `w_i = y_i`.
pub fn empirical_tensor<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[f64],
    shape: &TensorShape,
    centered: bool,
) -> Result<DenseTensor> {
    if xs.is_empty() {
        return Err(Error::arg("empirical tensor of an empty dataset"));
    }
    if xs.len() != ys.len() {
        return Err(Error::dim(format!(
            "{} inputs but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let offset = if centered { ys.iter().sum::<f64>() / n } else { 0.0 };
    let mut acc = vec![0.0; shape.total()];
    for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
        let x = x.as_ref();
        if x.len() != shape.total() {
            return Err(Error::dim(format!(
                "input {i} has length {}, tensor shape needs {}",
                x.len(),
                shape.total()
            )));
        }
        let w = y - offset;
        for (a, &v) in acc.iter_mut().zip(x) {
            *a += w * v;
        }
    }
    for a in acc.iter_mut() {
        *a /= n;
    }
    DenseTensor::from_entries(shape.clone(), acc)
}

struct RestartOutcome {
    factors: Vec<Vec<f64>>,
    objective: f64,
    history: Vec<f64>,
    converged: bool,
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// One restart of alternating maximization. `None` when a contraction vanishes.
fn run_restart(t: &DenseTensor, mut factors: Vec<Vec<f64>>, opts: &AlsOptions) -> Option<RestartOutcome> {
    let order = factors.len();
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    for _ in 0..opts.max_iters {
        let mut objective = 0.0;
        for mode in 0..order {
            let w = contract_all_but(t, &factors, mode).expect("factors conform to shape");
            let n = norm2(&w);
            if !(n > 0.0) || !n.is_finite() {
                return None;
            }
            factors[mode] = w.into_iter().map(|x| x / n).collect();
            objective = n;
        }
        history.push(objective);
        if let Some(p) = prev {
            if (objective - p).abs() <= opts.rel_tol * objective.abs() {
                return Some(RestartOutcome {
                    factors,
                    objective,
                    history,
                    converged: true,
                });
            }
        }
        prev = Some(objective);
    }
    Some(RestartOutcome {
        factors,
        objective: prev.unwrap_or(0.0),
        history,
        converged: false,
    })
}

/// Best rank-one approximation `λ ⊗v̂` of `t` over `opts.restarts` random starts.
pub fn rank1_decompose(t: &DenseTensor, opts: &AlsOptions) -> Result<DecompositionResult> {
    opts.validate()?;
    let dims = t.shape().dims().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut best: Option<RestartOutcome> = None;
    let mut histories = Vec::new();
    if frobenius_norm(t) > 0.0 {
        for _ in 0..opts.restarts {
            let init: Vec<Vec<f64>> = dims.iter().map(|&d| random_unit(&mut rng, d)).collect();
            let Some(outcome) = run_restart(t, init, opts) else {
                continue;
            };
            histories.push(outcome.history.clone());
            if best.as_ref().map_or(true, |b| outcome.objective > b.objective) {
                best = Some(outcome);
            }
        }
    }

    let restarts_used = histories.len();
    let Some(best) = best else {
        let factors = dims
            .iter()
            .map(|&d| {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            })
            .collect();
        return Ok(DecompositionResult {
            factors,
            lambda: 0.0,
            objective_history: histories,
            restarts_used,
            converged: false,
        });
    };

    let mut factors = best.factors;
    let last = factors.len() - 1;
    let w = contract_all_but(t, &factors, last)?;
    let mut lambda = dot(&w, &factors[last]);
    if lambda < 0.0 {
        lambda = -lambda;
        for v in factors[0].iter_mut() {
            *v = -*v;
        }
    }
    Ok(DecompositionResult {
        factors,
        lambda,
        objective_history: histories,
        restarts_used,
        converged: best.converged,
    })
}

/// Empirical tensor followed by its rank-one decomposition. The factors
/// estimate the kernels up to sign and scale.
pub fn deeptd_estimate<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[f64],
    shape: &TensorShape,
    opts: &AlsOptions,
    centered: bool,
) -> Result<DecompositionResult> {
    let t = empirical_tensor(xs, ys, shape, centered)?;
    rank1_decompose(&t, opts)
}

/// Lower bound on `sup ⟨T, ⊗v⟩` over unit rank-one tensors.
pub fn approx_spectral_norm(t: &DenseTensor, opts: &AlsOptions) -> Result<f64> {
    Ok(rank1_decompose(t, opts)?.lambda)
}

/// `‖T − λ ⊗v̂‖_F`.
pub fn rank1_residual(t: &DenseTensor, r: &DecompositionResult) -> Result<f64> {
    let approx = outer_product(&r.factors)?;
    Ok(frobenius_norm(&t.add_scaled(&approx, -r.lambda)?))
}
