//! Dense real vectors: the only numeric carrier for points and gradients.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// A fixed-dimension vector of finite `f64` entries.
///
/// Every constructor and arithmetic operation rejects NaN and infinities, so
/// a `DenseVector` that exists is always finite. Values are immutable once
/// built; operations return new vectors.
#[derive(Clone, PartialEq)]
pub struct DenseVector {
    entries: Vec<f64>,
}

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("entry {pos} is {}", entries[pos])));
        }
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: vec![0.0; dim],
        }
    }

    /// Wraps entries the caller has already checked to be finite.
    pub(crate) fn from_finite(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    fn check_dim(&self, other: &DenseVector, op: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::invalid(format!(
                "{op}: dimension mismatch ({} vs {})",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    fn finish(entries: Vec<f64>, op: &str) -> Result<Self> {
        Self::new(entries).map_err(|e| Error::NonFinite(format!("{op}: {e}")))
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        self.check_dim(other, "dot")?;
        let v = dot(&self.entries, &other.entries);
        if !v.is_finite() {
            return Err(Error::NonFinite("dot overflowed".into()));
        }
        Ok(v)
    }

    pub fn norm2(&self) -> f64 {
        norm2_sq(&self.entries).sqrt()
    }

    pub fn norm2_sq(&self) -> f64 {
        norm2_sq(&self.entries)
    }

    /// `self + a * x`
    pub fn axpy(&self, a: f64, x: &DenseVector) -> Result<Self> {
        self.check_dim(x, "axpy")?;
        let out = self
            .entries
            .iter()
            .zip(&x.entries)
            .map(|(s, xi)| s + a * xi)
            .collect();
        Self::finish(out, "axpy")
    }

    pub fn add(&self, other: &DenseVector) -> Result<Self> {
        self.check_dim(other, "add")?;
        let out = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Self::finish(out, "add")
    }

    pub fn sub(&self, other: &DenseVector) -> Result<Self> {
        self.check_dim(other, "sub")?;
        let out = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Self::finish(out, "sub")
    }

    pub fn hadamard(&self, other: &DenseVector) -> Result<Self> {
        self.check_dim(other, "hadamard")?;
        let out = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .collect();
        Self::finish(out, "hadamard")
    }

    pub fn scale(&self, a: f64) -> Result<Self> {
        let out = self.entries.iter().map(|v| a * v).collect();
        Self::finish(out, "scale")
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &DenseVector) -> Result<f64> {
        self.check_dim(other, "max_abs_diff")?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.entries).finish()
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
