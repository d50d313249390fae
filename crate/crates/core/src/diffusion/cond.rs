use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conditioning for one latent sequence: per-latent-frame audio features and
/// a speaker id. With `null` set, the denoiser ignores both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningBundle {
    len: usize,
    audio_dim: usize,
    audio: Vec<f32>,
    speaker: usize,
    null: bool,
}

impl ConditioningBundle {
    /// `audio` holds `len * audio_dim` values, frame-major.
    pub fn new(len: usize, audio_dim: usize, audio: Vec<f32>, speaker: usize) -> Result<Self> {
        if audio.len() != len * audio_dim {
            return Err(Error::shape(
                "audio features",
                format!("{len} x {audio_dim}"),
                format!("{} values", audio.len()),
            ));
        }
        if audio.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("audio features".into()));
        }
        Ok(Self {
            len,
            audio_dim,
            audio,
            speaker,
            null: false,
        })
    }

    /// Unconditional bundle of the given shape.
    pub fn null(len: usize, audio_dim: usize) -> Self {
        Self {
            len,
            audio_dim,
            audio: vec![0.0; len * audio_dim],
            speaker: 0,
            null: true,
        }
    }

    /// The same bundle with the null flag set.
    pub fn to_null(&self) -> Self {
        let mut out = self.clone();
        out.null = true;
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn audio_dim(&self) -> usize {
        self.audio_dim
    }

    pub fn audio(&self) -> &[f32] {
        &self.audio
    }

    pub fn speaker(&self) -> usize {
        self.speaker
    }

    pub fn is_null(&self) -> bool {
        self.null
    }

    /// Frames `start..end` of the audio track.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} outside conditioning of length {}",
                self.len
            )));
        }
        Ok(Self {
            len: end - start,
            audio_dim: self.audio_dim,
            audio: self.audio[start * self.audio_dim..end * self.audio_dim].to_vec(),
            speaker: self.speaker,
            null: self.null,
        })
    }
}
