use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vqvae::{latent_len, DOWNSAMPLE};

/// What a feature provider may know about a clip's audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipDescriptor {
    pub frames: usize,
    pub fps: f64,
    pub bpm: f64,
    /// Time of the first beat in seconds.
    pub beat_offset: f64,
    pub speaker: usize,
    /// Loudness envelope `1 + depth * sin(2 pi t / period + phase)`.
    pub energy_depth: f64,
    pub energy_period: f64,
    pub energy_phase: f64,
}

impl ClipDescriptor {
    pub fn energy(&self, t: f64) -> f64 {
        1.0 + self.energy_depth * (2.0 * std::f64::consts::PI * t / self.energy_period + self.energy_phase).sin()
    }

    /// Beat phase in cycles at time `t`.
    pub fn phase(&self, t: f64) -> f64 {
        (t - self.beat_offset) * self.bpm / 60.0
    }

    pub fn latent_frames(&self) -> usize {
        latent_len(self.frames)
    }
}

/// Source of per-latent-frame conditioning features.
pub trait AudioFeatureProvider {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// `latent_frames * dim` values, frame-major.
    fn features(&self, clip: &ClipDescriptor) -> Result<Vec<f32>>;
}

/// Rhythm features computed from the beat grid: sin/cos of the beat phase
/// and two harmonics, loudness, and a one-hot speaker code.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatFeatureProvider {
    dim: usize,
    speakers: usize,
}

impl BeatFeatureProvider {
    pub const RHYTHM_DIMS: usize = 7;

    pub fn new(dim: usize, speakers: usize) -> Result<Self> {
        if dim < Self::RHYTHM_DIMS + speakers {
            return Err(Error::InvalidArgument(format!(
                "feature dimension {dim} cannot hold {} rhythm values and {speakers} speakers",
                Self::RHYTHM_DIMS
            )));
        }
        Ok(Self { dim, speakers })
    }
}

impl AudioFeatureProvider for BeatFeatureProvider {
    fn name(&self) -> &str {
        "beat-phase"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn features(&self, clip: &ClipDescriptor) -> Result<Vec<f32>> {
        if clip.speaker >= self.speakers {
            return Err(Error::InvalidArgument(format!("speaker {} outside vocabulary", clip.speaker)));
        }
        let n = clip.latent_frames();
        let mut out = Vec::with_capacity(n * self.dim);
        for k in 0..n {
            // Center of the block of motion frames behind latent frame k.
            let t = (k * DOWNSAMPLE) as f64 / clip.fps + (DOWNSAMPLE as f64 - 1.0) / (2.0 * clip.fps);
            let phi = 2.0 * std::f64::consts::PI * clip.phase(t);
            let mut v = vec![0.0f32; self.dim];
            for h in 0..3 {
                v[2 * h] = ((h + 1) as f64 * phi).sin() as f32;
                v[2 * h + 1] = ((h + 1) as f64 * phi).cos() as f32;
            }
            v[6] = clip.energy(t) as f32;
            v[Self::RHYTHM_DIMS + clip.speaker] = 1.0;
            out.extend(v);
        }
        Ok(out)
    }
}
