use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous latent vectors, one per block of motion frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSequence {
    len: usize,
    dim: usize,
    values: Vec<f32>,
    pub source_fps: f64,
    pub downsample: usize,
}

impl LatentSequence {
    pub fn new(len: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::InvalidArgument("latent sequence must be non-empty".into()));
        }
        if values.len() != len * dim {
            return Err(Error::shape("latent values", len * dim, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent sequence".into()));
        }
        Ok(Self {
            len,
            dim,
            values,
            source_fps: crate::motion::TRAINING_FPS,
            downsample: super::DOWNSAMPLE,
        })
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        Self::new(len, dim, vec![0.0; len * dim]).expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Frames `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len {
            return Err(Error::InvalidArgument(format!(
                "latent slice {start}..{end} out of range for length {}",
                self.len
            )));
        }
        let mut out = Self::new(end - start, self.dim, self.values[start * self.dim..end * self.dim].to_vec())?;
        out.source_fps = self.source_fps;
        out.downsample = self.downsample;
        Ok(out)
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::shape("latent dim", self.dim, other.dim));
        }
        let mut v = self.values.clone();
        v.extend_from_slice(&other.values);
        Self::new(self.len + other.len, self.dim, v)
    }
}

/// Discrete codebook indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<usize>);

/// `size` vectors of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    size: usize,
    dim: usize,
    entries: Vec<f32>,
}

impl Codebook {
    pub fn new(size: usize, dim: usize, entries: Vec<f32>) -> Result<Self> {
        if size < 2 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "codebook needs at least 2 entries of positive dimension, got {size} x {dim}"
            )));
        }
        if entries.len() != size * dim {
            return Err(Error::shape("codebook entries", size * dim, entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook entry".into()));
        }
        Ok(Self { size, dim, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize) -> &[f32] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }
}
