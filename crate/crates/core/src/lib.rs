//! Learning the kernels of a deep non-overlapping CNN from Gaussian data by a
//! rank-one decomposition of the label-weighted, centered input tensor.
//!
//! - [`tensor`]: dense tensors, tensorization, contractions.
//! - [`cnn`]: the generative network model and its path-gain structure.
//! - [`decompose`]: empirical tensors and rank-one alternating maximization.
//! - [`ssa`]: greedy and oracle resolution of per-layer signs and the global scale.
//! - [`harness`]: seeded synthetic experiments and their reports.

pub mod cnn;
pub mod decompose;
pub mod error;
pub mod harness;
pub mod ssa;
pub mod tensor;

pub use cnn::{ActivationKind, CnnNetwork, ForwardTrace, Kernel};
pub use decompose::{AlsOptions, DecompositionResult};
pub use error::{Error, Result};
pub use ssa::SignedEstimate;
pub use tensor::{DenseTensor, TensorShape};
