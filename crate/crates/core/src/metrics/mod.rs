//! Evaluation metrics: Fréchet gesture distance over encoder features, beat
//! consistency against a motion-beat detector, diversity, and a
//! semantically weighted keypoint accuracy (SRGR).

mod beats;
mod features;
mod fgd;
mod srgr;

pub use beats::{beat_consistency, beat_consistency_tracks, detect_motion_beats, BeatConfig, BeatTrack};
pub use features::{extract_features, FeatureSet};
pub use fgd::{fgd, FGD_RIDGE};
pub use srgr::{forward_kinematics, srgr};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean pairwise Euclidean distance between equally sized samples.
pub fn diversity<S: AsRef<[f64]>>(samples: &[S]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("diversity needs at least two samples".into()));
    }
    let n = samples[0].as_ref().len();
    if let Some(bad) = samples.iter().find(|s| s.as_ref().len() != n) {
        return Err(Error::shape("diversity sample", n, bad.as_ref().len()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d: f64 = samples[i]
                .as_ref()
                .iter()
                .zip(samples[j].as_ref())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sum += d.sqrt();
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Metric report for a generated set against a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fgd: f64,
    pub bc: f64,
    pub diversity: f64,
    pub srgr: Option<f64>,
    /// SRGR tracks semantic quality only loosely; treat as advisory.
    pub srgr_advisory: bool,
    pub generated_clips: usize,
    pub reference_clips: usize,
    pub config: serde_json::Value,
}
