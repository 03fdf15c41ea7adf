//! Sign and scale resolution for the rank-one factors.
//!
//! The decomposition only pins each kernel up to sign (and the network up to a
//! global scale). Signs are chosen by a greedy local search over single-layer
//! flips that maximizes the absolute correlation between centered labels and
//! centered predictions; the scale is then the least-squares slope of the
//! centered labels on the centered predictions.

use serde::{Deserialize, Serialize};

use crate::cnn::{ActivationKind, CnnNetwork, Kernel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrOpt {
    /// `ρ = Σ y_c ŷ_c`.
    Correlation,
    /// `ρ / Σ ŷ_c²`, the centered least-squares slope.
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrOutcome {
    pub value: f64,
    /// Predictions were constant, so the slope is undefined and reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedEstimate {
    pub kernels: Vec<Kernel>,
    pub gamma: f64,
    /// `±1` per layer, relative to the raw decomposition factors.
    pub signs: Vec<i8>,
    pub diagnostics: ResolveDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolveDiagnostics {
    /// Full passes over the layers, including the final pass without flips.
    pub sweeps: usize,
    pub flips: usize,
    pub initial_abs_corr: f64,
    pub final_abs_corr: f64,
    /// The scale fit hit constant predictions.
    pub degenerate_scale: bool,
    /// Some activation is not positively homogeneous, so one global scale
    /// cannot absorb per-layer scalings.
    pub non_homogeneous: bool,
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn corr_from_predictions(ys_c: &[f64], preds: &[f64], opt: CorrOpt) -> CorrOutcome {
    let preds_c = centered(preds);
    let rho: f64 = ys_c.iter().zip(&preds_c).map(|(a, b)| a * b).sum();
    match opt {
        CorrOpt::Correlation => CorrOutcome {
            value: rho,
            degenerate: false,
        },
        CorrOpt::Scale => {
            let energy: f64 = preds_c.iter().map(|v| v * v).sum();
            if energy == 0.0 {
                CorrOutcome {
                    value: 0.0,
                    degenerate: true,
                }
            } else {
                CorrOutcome {
                    value: rho / energy,
                    degenerate: false,
                }
            }
        }
    }
}

fn check_data<X: AsRef<[f64]>>(xs: &[X], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::dim(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::arg("correlation needs at least two samples"));
    }
    Ok(())
}

fn predictions<X: AsRef<[f64]>>(net: &CnnNetwork, xs: &[X]) -> Result<Vec<f64>> {
    xs.iter().map(|x| net.output(x.as_ref())).collect()
}

/// Centered correlation between labels and the predictions of the network
/// with the given kernels and activations.
pub fn corr<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[f64],
    kernels: &[Kernel],
    activations: &[ActivationKind],
    opt: CorrOpt,
) -> Result<CorrOutcome> {
    check_data(xs, ys)?;
    let net = CnnNetwork::new(kernels.to_vec(), activations.to_vec())?;
    let preds = predictions(&net, xs)?;
    Ok(corr_from_predictions(&centered(ys), &preds, opt))
}

fn unit_kernels(raw_factors: &[Vec<f64>]) -> Result<Vec<Kernel>> {
    raw_factors
        .iter()
        .enumerate()
        .map(|(l, f)| {
            let k = Kernel::new(f.clone())?;
            if (k.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::arg(format!(
                    "factor {} has norm {}, expected a unit vector",
                    l + 1,
                    k.norm()
                )));
            }
            Ok(k)
        })
        .collect()
}

fn apply_signs(raw: &[Kernel], signs: &[i8]) -> Vec<Kernel> {
    raw.iter()
        .zip(signs)
        .map(|(k, &s)| if s < 0 { k.negated() } else { k.clone() })
        .collect()
}

/// Starting signs for the greedy search: every factor but the last is oriented
/// so its entries sum to a nonnegative value, and the last factor absorbs the
/// parity so the rank-one tensor `⊗ v_ℓ` is unchanged.
///
/// The decomposition leaves the factor signs arbitrary up to an even number of
/// flips. Left as is, a ReLU network often has some layer whose kernel is
/// negative on every entry, every prediction is then constant, and no single
/// flip can move the correlation off zero.
pub fn canonical_signs(raw_factors: &[Vec<f64>]) -> Vec<i8> {
    let depth = raw_factors.len();
    let mut signs: Vec<i8> = raw_factors
        .iter()
        .map(|f| if f.iter().sum::<f64>() >= 0.0 { 1 } else { -1 })
        .collect();
    if let Some(last) = depth.checked_sub(1) {
        let parity: i8 = signs[..last].iter().product();
        signs[last] = parity;
    }
    signs
}

/// Greedy sign search followed by the global scale fit.
///
/// Starts from [`canonical_signs`] and sweeps the layers in order, flipping a kernel whenever that strictly
/// increases `|ρ|`, until a full sweep makes no flip. If the fitted scale is
/// negative and the last activation is odd, the last kernel is flipped and the
/// scale negated; the predictor is unchanged and the scale ends up `≥ 0`.
pub fn greedy_sign_resolve<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[f64],
    raw_factors: &[Vec<f64>],
    activations: &[ActivationKind],
) -> Result<SignedEstimate> {
    check_data(xs, ys)?;
    let raw = unit_kernels(raw_factors)?;
    let depth = raw.len();
    let ys_c = centered(ys);
    let mut signs = canonical_signs(raw_factors);
    let mut net = CnnNetwork::new(apply_signs(&raw, &signs), activations.to_vec())?;
    for x in xs {
        if x.as_ref().len() != net.input_len() {
            return Err(Error::dim(format!(
                "input has length {}, network expects {}",
                x.as_ref().len(),
                net.input_len()
            )));
        }
    }

    let initial = corr_from_predictions(&ys_c, &predictions(&net, xs)?, CorrOpt::Correlation)
        .value
        .abs();
    let mut best = initial;
    let mut diag = ResolveDiagnostics {
        initial_abs_corr: initial,
        non_homogeneous: activations.iter().any(|a| !a.is_positively_homogeneous()),
        ..ResolveDiagnostics::default()
    };

    loop {
        diag.sweeps += 1;
        let mut flipped = false;
        // Flipping layer ℓ leaves h^(ℓ-1) untouched, so candidates are
        // evaluated from a cache of the current h^(ℓ-1) for every sample.
        let mut cache: Option<Vec<Vec<f64>>> = None;
        for layer in 0..depth {
            let mut kernels = net.kernels().to_vec();
            kernels[layer] = kernels[layer].negated();
            let candidate = net.with_kernels(kernels)?;
            let preds: Vec<f64> = match &cache {
                None => xs.iter().map(|x| candidate.output_from(0, x.as_ref())).collect(),
                Some(h) => h.iter().map(|h| candidate.output_from(layer, h)).collect(),
            };
            let rho = corr_from_predictions(&ys_c, &preds, CorrOpt::Correlation).value.abs();
            if rho > best {
                best = rho;
                signs[layer] = -signs[layer];
                net = candidate;
                flipped = true;
                diag.flips += 1;
            }
            if layer + 1 < depth {
                cache = Some(match &cache {
                    None => xs.iter().map(|x| net.apply_layer(1, x.as_ref())).collect(),
                    Some(h) => h.iter().map(|h| net.apply_layer(layer + 1, h)).collect(),
                });
            }
        }
        if !flipped {
            break;
        }
    }
    diag.final_abs_corr = best;

    let scale = corr_from_predictions(&ys_c, &predictions(&net, xs)?, CorrOpt::Scale);
    diag.degenerate_scale = scale.degenerate;
    let mut gamma = scale.value;
    if gamma < 0.0 && activations[depth - 1].is_odd() {
        gamma = -gamma;
        signs[depth - 1] = -signs[depth - 1];
    }
    Ok(SignedEstimate {
        kernels: apply_signs(&raw, &signs),
        gamma,
        signs,
        diagnostics: diag,
    })
}

/// Representative of the sign patterns that give the same predictor.
///
/// Negating the kernel of a layer with an odd activation negates its output,
/// which is the same as negating the next kernel; at the last layer it is the
/// same as negating the scale. Such flips are pushed right and, past the last
/// odd layer, dropped.
pub fn equivalent_signs(signs: &[i8], activations: &[ActivationKind]) -> Vec<i8> {
    let mut out = signs.to_vec();
    for l in 0..out.len().min(activations.len()) {
        if out[l] < 0 && activations[l].is_odd() {
            out[l] = 1;
            if let Some(next) = out.get_mut(l + 1) {
                *next = -*next;
            }
        }
    }
    out
}

/// `sign⟨k̂^(ℓ), k^(ℓ)⟩` per layer, with ties resolved to `+1`.
pub fn oracle_sign_resolve(raw_factors: &[Vec<f64>], true_kernels: &[Kernel]) -> Result<Vec<i8>> {
    if raw_factors.len() != true_kernels.len() {
        return Err(Error::dim(format!(
            "{} factors but {} true kernels",
            raw_factors.len(),
            true_kernels.len()
        )));
    }
    raw_factors
        .iter()
        .zip(true_kernels)
        .enumerate()
        .map(|(l, (f, k))| {
            if f.len() != k.len() {
                return Err(Error::dim(format!(
                    "layer {}: factor length {} vs kernel length {}",
                    l + 1,
                    f.len(),
                    k.len()
                )));
            }
            let ip: f64 = f.iter().zip(k.weights()).map(|(a, b)| a * b).sum();
            Ok(if ip >= 0.0 { 1 } else { -1 })
        })
        .collect()
}

/// Applies fixed signs to the raw factors and fits the global scale.
pub fn fit_with_signs<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[f64],
    raw_factors: &[Vec<f64>],
    signs: &[i8],
    activations: &[ActivationKind],
) -> Result<SignedEstimate> {
    check_data(xs, ys)?;
    if signs.len() != raw_factors.len() {
        return Err(Error::dim("one sign per factor required"));
    }
    let raw = unit_kernels(raw_factors)?;
    let kernels = apply_signs(&raw, signs);
    let scale = corr(xs, ys, &kernels, activations, CorrOpt::Scale)?;
    let rho = corr(xs, ys, &kernels, activations, CorrOpt::Correlation)?.value.abs();
    Ok(SignedEstimate {
        kernels,
        gamma: scale.value,
        signs: signs.to_vec(),
        diagnostics: ResolveDiagnostics {
            sweeps: 0,
            flips: 0,
            initial_abs_corr: rho,
            final_abs_corr: rho,
            degenerate_scale: scale.degenerate,
            non_homogeneous: activations.iter().any(|a| !a.is_positively_homogeneous()),
        },
    })
}

/// `γ · f(x)` for the network with the signed kernels.
pub fn predict(estimate: &SignedEstimate, activations: &[ActivationKind], x: &[f64]) -> Result<f64> {
    let net = CnnNetwork::new(estimate.kernels.clone(), activations.to_vec())?;
    Ok(estimate.gamma * net.output(x)?)
}

/// The network behind a signed estimate, for repeated prediction.
pub fn estimate_network(estimate: &SignedEstimate, activations: &[ActivationKind]) -> Result<CnnNetwork> {
    CnnNetwork::new(estimate.kernels.clone(), activations.to_vec())
}
