//! Deep CNN with non-overlapping convolutions and a single kernel per layer.
//!
//! Layer `ℓ` maps `h^(ℓ-1) ∈ R^{p_{ℓ-1}}` to `h̄^(ℓ) = k^(ℓ) ⊛ h^(ℓ-1) ∈ R^{p_ℓ}`
//! with `p_ℓ = p_{ℓ-1} / d_ℓ`, followed by the entrywise activation `φ_ℓ`.
//! The last layer has a single unit, so the network input length is the
//! product of all kernel lengths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, norm2, TensorShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    Relu,
    /// `z` for `z ≥ 0`, `β z` otherwise, with `β ∈ [0, 1]`.
    LeakyRelu(f64),
    Softplus,
}

impl ActivationKind {
    pub fn validate(self) -> Result<Self> {
        match self {
            ActivationKind::LeakyRelu(beta) if !(0.0..=1.0).contains(&beta) => Err(Error::arg(
                format!("leaky ReLU slope {beta} outside [0, 1]"),
            )),
            other => Ok(other),
        }
    }

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            ActivationKind::Identity => z,
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::LeakyRelu(beta) => {
                if z >= 0.0 {
                    z
                } else {
                    beta * z
                }
            }
            ActivationKind::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }

    /// Derivative, with the kink of (leaky) ReLU assigned the left slope.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu(beta) => {
                if z > 0.0 {
                    1.0
                } else {
                    beta
                }
            }
            ActivationKind::Softplus => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Smoothness constant `S` (Lipschitz constant of the derivative), where defined.
    pub fn smoothness(self) -> Option<f64> {
        match self {
            ActivationKind::Identity => Some(0.0),
            ActivationKind::Softplus => Some(1.0),
            ActivationKind::Relu | ActivationKind::LeakyRelu(_) => None,
        }
    }

    /// `φ(c z) = c φ(z)` for every `c > 0`.
    pub fn is_positively_homogeneous(self) -> bool {
        !matches!(self, ActivationKind::Softplus)
    }

    /// `φ(-z) = -φ(z)`.
    pub fn is_odd(self) -> bool {
        match self {
            ActivationKind::Identity => true,
            ActivationKind::LeakyRelu(beta) => beta == 1.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Kernel {
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::arg("kernel must have at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::arg("kernel weights must be finite"));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.weights)
    }

    pub fn negated(&self) -> Kernel {
        Kernel {
            weights: self.weights.iter().map(|w| -w).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for Kernel {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Kernel::new(weights)
    }
}

impl From<Kernel> for Vec<f64> {
    fn from(k: Kernel) -> Self {
        k.weights
    }
}

impl AsRef<[f64]> for Kernel {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct CnnNetwork {
    kernels: Vec<Kernel>,
    activations: Vec<ActivationKind>,
    /// `p_0, p_1, …, p_D` with `p_D = 1`.
    widths: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    kernels: Vec<Kernel>,
    activations: Vec<ActivationKind>,
}

impl TryFrom<NetworkRepr> for CnnNetwork {
    type Error = Error;

    fn try_from(r: NetworkRepr) -> Result<Self> {
        CnnNetwork::new(r.kernels, r.activations)
    }
}

impl From<CnnNetwork> for NetworkRepr {
    fn from(n: CnnNetwork) -> Self {
        NetworkRepr {
            kernels: n.kernels,
            activations: n.activations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub output: f64,
    /// `h̄^(1), …, h̄^(D)`; the last one has length 1.
    pub pre_activations: Vec<Vec<f64>>,
}

impl CnnNetwork {
    pub fn new(kernels: Vec<Kernel>, activations: Vec<ActivationKind>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::arg("network needs at least one layer"));
        }
        if kernels.len() != activations.len() {
            return Err(Error::dim(format!(
                "{} kernels but {} activations",
                kernels.len(),
                activations.len()
            )));
        }
        for a in &activations {
            a.validate()?;
        }
        let p = kernels
            .iter()
            .try_fold(1usize, |acc, k| acc.checked_mul(k.len()))
            .ok_or_else(|| Error::arg("network input length overflows usize"))?;
        let mut widths = Vec::with_capacity(kernels.len() + 1);
        widths.push(p);
        for k in &kernels {
            let prev = *widths.last().unwrap();
            widths.push(prev / k.len());
        }
        debug_assert_eq!(*widths.last().unwrap(), 1);
        Ok(Self {
            kernels,
            activations,
            widths,
        })
    }

    pub fn depth(&self) -> usize {
        self.kernels.len()
    }

    pub fn input_len(&self) -> usize {
        self.widths[0]
    }

    /// Layer widths `p_0, …, p_D`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn activations(&self) -> &[ActivationKind] {
        &self.activations
    }

    pub fn kernel_dims(&self) -> Vec<usize> {
        self.kernels.iter().map(Kernel::len).collect()
    }

    /// Tensor shape `(d_1, …, d_D)` matching this network's input.
    pub fn tensor_shape(&self) -> TensorShape {
        TensorShape::new(self.kernel_dims()).expect("kernel lengths are positive")
    }

    /// Same activations, different kernels of the same lengths.
    pub fn with_kernels(&self, kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.len() != self.kernels.len()
            || kernels.iter().zip(&self.kernels).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::dim("replacement kernels do not match layer widths"));
        }
        Ok(Self {
            kernels,
            activations: self.activations.clone(),
            widths: self.widths.clone(),
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut pre_activations = Vec::with_capacity(self.depth());
        let mut h = x.to_vec();
        for (k, act) in self.kernels.iter().zip(&self.activations) {
            let pre: Vec<f64> = h.chunks_exact(k.len()).map(|c| dot(c, &k.weights)).collect();
            h = pre.iter().map(|&z| act.value(z)).collect();
            pre_activations.push(pre);
        }
        Ok(ForwardTrace {
            output: h[0],
            pre_activations,
        })
    }

    /// Scalar output `f(x)` without recording intermediate layers.
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.output_from(0, x))
    }

    /// Runs layers `first+1..=D` on `h = h^(first)`. `h` must have length `p_first`.
    pub(crate) fn output_from(&self, first: usize, h: &[f64]) -> f64 {
        debug_assert_eq!(h.len(), self.widths[first]);
        if first == self.depth() {
            return h[0];
        }
        let mut cur = self.apply_layer(first + 1, h);
        for layer in first + 2..=self.depth() {
            cur = self.apply_layer(layer, &cur);
        }
        cur[0]
    }

    /// Output of layer `layer` (1-based), i.e. `h^(layer)`, starting from `h^(layer-1)`.
    pub(crate) fn apply_layer(&self, layer: usize, h: &[f64]) -> Vec<f64> {
        let k = &self.kernels[layer - 1];
        let act = self.activations[layer - 1];
        h.chunks_exact(k.len())
            .map(|c| act.value(dot(c, &k.weights)))
            .collect()
    }

    /// Forward pass through explicit kernel matrices, returning the output.
    pub fn forward_dense(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for (k, act) in self.kernels.iter().zip(&self.activations) {
            let m = kernel_matrix(k, h.len())?;
            h = m.mul_vec(&h)?.into_iter().map(|z| act.value(z)).collect();
        }
        Ok(h[0])
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::dim(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_len()
            )));
        }
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "vector of length {} against matrix with {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }
}

/// Block-diagonal `I_{p/d} ⊗ kᵀ`, the matrix of a non-overlapping convolution.
pub fn kernel_matrix(k: &Kernel, input_len: usize) -> Result<DenseMatrix> {
    let d = k.len();
    if input_len % d != 0 {
        return Err(Error::dim(format!(
            "kernel length {d} does not divide input length {input_len}"
        )));
    }
    let rows = input_len / d;
    let mut data = vec![0.0; rows * input_len];
    for i in 0..rows {
        data[i * input_len + i * d..i * input_len + (i + 1) * d].copy_from_slice(&k.weights);
    }
    Ok(DenseMatrix {
        rows,
        cols: input_len,
        data,
    })
}

/// `u_i = ⟨k, h[i·d .. (i+1)·d]⟩` over disjoint consecutive patches.
pub fn non_overlapping_convolve(k: &Kernel, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() % k.len() != 0 {
        return Err(Error::dim(format!(
            "kernel length {} does not divide input length {}",
            k.len(),
            h.len()
        )));
    }
    Ok(h.chunks_exact(k.len()).map(|c| dot(c, &k.weights)).collect())
}

/// Product of kernel weights along the unique path from each input coordinate
/// to the output. Tensorizing this vector gives `⊗_ℓ k^(ℓ)` exactly.
pub fn path_gain_vector(net: &CnnNetwork) -> Vec<f64> {
    let shape = net.tensor_shape();
    (0..net.input_len())
        .map(|i| {
            shape
                .multi_index(i)
                .into_iter()
                .zip(&net.kernels)
                .fold(1.0, |acc, (j, k)| acc * k.weights[j])
        })
        .collect()
}

/// Per-layer averages of `φ'_ℓ(h̄^(ℓ)_1)` over the given inputs, multiplied together.
pub fn cnn_gain_from_inputs<X: AsRef<[f64]>>(net: &CnnNetwork, xs: &[X]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::arg("CNN gain needs at least one input"));
    }
    let mut sums = vec![0.0; net.depth()];
    for x in xs {
        let trace = net.forward(x.as_ref())?;
        for ((s, pre), act) in sums.iter_mut().zip(&trace.pre_activations).zip(&net.activations) {
            *s += act.derivative(pre[0]);
        }
    }
    let n = xs.len() as f64;
    Ok(sums.iter().map(|s| s / n).product())
}

/// Monte-Carlo estimate of `α_CNN = Π_ℓ E[φ'_ℓ(h̄^(ℓ)_1)]` under `x ~ N(0, I_p)`.
pub fn estimate_cnn_gain(net: &CnnNetwork, mc_samples: usize, rng_seed: u64) -> Result<f64> {
    if mc_samples == 0 {
        return Err(Error::arg("mc_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let p = net.input_len();
    let mut sums = vec![0.0; net.depth()];
    let mut x = vec![0.0; p];
    for _ in 0..mc_samples {
        for v in x.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let trace = net.forward(&x)?;
        for ((s, pre), act) in sums.iter_mut().zip(&trace.pre_activations).zip(&net.activations) {
            *s += act.derivative(pre[0]);
        }
    }
    let n = mc_samples as f64;
    Ok(sums.iter().map(|s| s / n).product())
}

/// `μ = max_ℓ √d_ℓ ‖k^(ℓ)‖_∞ / ‖k^(ℓ)‖_2`.
pub fn diffuseness(kernels: &[Kernel]) -> Result<f64> {
    let mut mu: f64 = 0.0;
    for (l, k) in kernels.iter().enumerate() {
        let n2 = k.norm();
        if n2 == 0.0 {
            return Err(Error::arg(format!("kernel {} has zero norm", l + 1)));
        }
        let inf = k.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        mu = mu.max((k.len() as f64).sqrt() * inf / n2);
    }
    Ok(mu)
}

/// `1ᵀk ≥ 4‖k‖_2`: a sufficient condition for a ReLU layer to keep a
/// non-vanishing gain.
pub fn gain_condition_holds(k: &Kernel) -> bool {
    k.weights.iter().sum::<f64>() >= 4.0 * k.norm()
}
