use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionClip;
use crate::vqvae::{LatentSequence, VqvaeModel};

/// `M` finite feature vectors of equal width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    vectors: Vec<Vec<f64>>,
    extractor: String,
}

impl FeatureSet {
    pub fn new(vectors: Vec<Vec<f64>>, extractor: impl Into<String>) -> Result<Self> {
        let f = vectors.first().map(Vec::len).unwrap_or(0);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != f {
                return Err(Error::shape("feature vector", f, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("feature vector {i}")));
            }
        }
        Ok(Self {
            vectors,
            extractor: extractor.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map(Vec::len).unwrap_or(0)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn extractor(&self) -> &str {
        &self.extractor
    }
}

/// Temporal mean followed by temporal standard deviation of a latent
/// sequence, `2 D` values.
pub fn latent_feature(z: &LatentSequence) -> Vec<f64> {
    let d = z.dim();
    let n = z.len() as f64;
    let mut mean = vec![0.0; d];
    for f in 0..z.len() {
        for (k, &v) in z.frame(f).iter().enumerate() {
            mean[k] += v as f64 / n;
        }
    }
    let mut var = vec![0.0; d];
    for f in 0..z.len() {
        for (k, &v) in z.frame(f).iter().enumerate() {
            var[k] += (v as f64 - mean[k]).powi(2) / n;
        }
    }
    mean.extend(var.into_iter().map(f64::sqrt));
    mean
}

/// Per-clip encoder features: mean and std over time of `encode(clip)`.
pub fn extract_features(clips: &[MotionClip], vqvae: &VqvaeModel) -> Result<FeatureSet> {
    let refs: Vec<&MotionClip> = clips.iter().collect();
    let latents = vqvae.encode_many(&refs)?;
    FeatureSet::new(latents.iter().map(latent_feature).collect(), "vqvae-mean-std")
}
