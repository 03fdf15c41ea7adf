//! Dense D-way tensors and the input tensorization.
//!
//! Entries are stored in a single buffer with mode 1 varying fastest, so the
//! multi-index `(j_1, …, j_D)` (0-based here) lives at
//! `j_1 + d_1·j_2 + d_1·d_2·j_3 + …`. Under this layout the tensorization of a
//! length-`p` input is a pure reinterpretation of the buffer: mode `ℓ` of the
//! tensor indexes into the `ℓ`-th kernel, matching the order in which a
//! non-overlapping CNN consumes its input (innermost patches first).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TensorShape {
    dims: Vec<usize>,
    total: usize,
}

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::arg("tensor shape needs at least one mode"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::arg(format!("mode {} has zero length", pos + 1)));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::arg("tensor shape overflows usize"))?;
        Ok(Self { dims, total })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes `D`.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Product of all mode lengths.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Linear position of a 0-based multi-index.
    pub fn linear_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.dims.len() {
            return Err(Error::dim(format!(
                "multi-index has {} entries, tensor has {} modes",
                index.len(),
                self.dims.len()
            )));
        }
        let mut linear = 0;
        let mut stride = 1;
        for (mode, (&j, &d)) in index.iter().zip(&self.dims).enumerate() {
            if j >= d {
                return Err(Error::dim(format!(
                    "index {j} out of range for mode {} of length {d}",
                    mode + 1
                )));
            }
            linear += j * stride;
            stride *= d;
        }
        Ok(linear)
    }

    /// Mixed-radix digits of a linear position, mode 1 first.
    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        debug_assert!(linear < self.total);
        self.dims
            .iter()
            .map(|&d| {
                let digit = linear % d;
                linear /= d;
                digit
            })
            .collect()
    }
}

impl TryFrom<Vec<usize>> for TensorShape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<TensorShape> for Vec<usize> {
    fn from(shape: TensorShape) -> Self {
        shape.dims
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct DenseTensor {
    shape: TensorShape,
    entries: Vec<f64>,
}

/// On-disk form: shape plus entries in canonical linear order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRepr {
    shape: TensorShape,
    entries: Vec<f64>,
}

impl TryFrom<TensorRepr> for DenseTensor {
    type Error = Error;

    fn try_from(repr: TensorRepr) -> Result<Self> {
        DenseTensor::from_entries(repr.shape, repr.entries)
    }
}

impl From<DenseTensor> for TensorRepr {
    fn from(t: DenseTensor) -> Self {
        TensorRepr {
            shape: t.shape,
            entries: t.entries,
        }
    }
}

impl DenseTensor {
    pub fn zeros(shape: TensorShape) -> Self {
        let entries = vec![0.0; shape.total()];
        Self { shape, entries }
    }

    pub fn from_entries(shape: TensorShape, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != shape.total() {
            return Err(Error::dim(format!(
                "{} entries supplied for a tensor with {} entries",
                entries.len(),
                shape.total()
            )));
        }
        Ok(Self { shape, entries })
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    /// Entries in canonical linear order.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.entries[self.shape.linear_index(index)?])
    }

    pub fn scaled(&self, factor: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &DenseTensor, factor: f64) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            entries,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "shape {:?} does not match {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        Ok(())
    }
}

/// Reshapes a length-`p` vector into a D-way tensor whose mode-`ℓ` index is the
/// `ℓ`-th mixed-radix digit (base `d_ℓ`) of the input coordinate.
pub fn tensorize(x: &[f64], shape: &TensorShape) -> Result<DenseTensor> {
    if x.len() != shape.total() {
        return Err(Error::dim(format!(
            "input of length {} cannot be tensorized to shape {:?} ({} entries)",
            x.len(),
            shape.dims(),
            shape.total()
        )));
    }
    Ok(DenseTensor {
        shape: shape.clone(),
        entries: x.to_vec(),
    })
}

pub fn vectorize(t: &DenseTensor) -> Vec<f64> {
    t.entries.clone()
}

/// `⊗_ℓ factors[ℓ]`.
pub fn outer_product<V: AsRef<[f64]>>(factors: &[V]) -> Result<DenseTensor> {
    if factors.is_empty() {
        return Err(Error::arg("outer product of an empty factor list"));
    }
    let shape = TensorShape::new(factors.iter().map(|f| f.as_ref().len()).collect())?;
    let entries = outer_entries(factors.iter().map(|f| f.as_ref()));
    Ok(DenseTensor { shape, entries })
}

/// Column-major outer product: the first factor varies fastest.
fn outer_entries<'a>(factors: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for &fj in f {
            next.extend(acc.iter().map(|&a| a * fj));
        }
        acc = next;
    }
    acc
}

pub fn inner_product(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(dot(&a.entries, &b.entries))
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    dot(&t.entries, &t.entries).sqrt()
}

/// Contracts `t` against every factor except the one at `mode` (0-based).
///
/// The result `w` satisfies `⟨w, v⟩ = ⟨t, f_1 ⊗ … ⊗ v ⊗ … ⊗ f_D⟩` for any `v`.
/// Modes before `mode` are folded in as successive non-overlapping
/// convolutions of the buffer; modes after it are folded in against their
/// joint outer product.
pub fn contract_all_but<V: AsRef<[f64]>>(
    t: &DenseTensor,
    factors: &[V],
    mode: usize,
) -> Result<Vec<f64>> {
    let dims = t.shape.dims();
    if mode >= dims.len() {
        return Err(Error::arg(format!(
            "mode {} out of range for a tensor with {} modes",
            mode + 1,
            dims.len()
        )));
    }
    if factors.len() != dims.len() {
        return Err(Error::dim(format!(
            "{} factors supplied for a tensor with {} modes",
            factors.len(),
            dims.len()
        )));
    }
    for (m, (f, &d)) in factors.iter().zip(dims).enumerate() {
        if m != mode && f.as_ref().len() != d {
            return Err(Error::dim(format!(
                "factor {} has length {}, mode length is {d}",
                m + 1,
                f.as_ref().len()
            )));
        }
    }

    let mut folded: Option<Vec<f64>> = None;
    for f in &factors[..mode] {
        let f = f.as_ref();
        let src = folded.as_deref().unwrap_or(&t.entries);
        folded = Some(src.chunks_exact(f.len()).map(|c| dot(c, f)).collect());
    }
    let current = folded.as_deref().unwrap_or(&t.entries);

    let d = dims[mode];
    let tail = outer_entries(factors[mode + 1..].iter().map(|f| f.as_ref()));
    debug_assert_eq!(current.len(), d * tail.len());
    let mut out = vec![0.0; d];
    for (block, &w) in current.chunks_exact(d).zip(&tail) {
        for (o, &b) in out.iter_mut().zip(block) {
            *o += w * b;
        }
    }
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
