use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A word with its time span in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptWord {
    pub text: String,
    pub start: f64,
    pub end: f64,
}

/// Checks `0 <= start < end` and that words are sorted and disjoint.
pub fn validate_transcript(words: &[TranscriptWord]) -> Result<()> {
    let mut prev_end = 0.0;
    for (i, w) in words.iter().enumerate() {
        if !(w.start.is_finite() && w.end.is_finite() && w.start >= 0.0 && w.start < w.end) {
            return Err(Error::InvalidArgument(format!(
                "word {i} ({:?}) has invalid span {}..{}",
                w.text, w.start, w.end
            )));
        }
        if w.start < prev_end {
            return Err(Error::InvalidArgument(format!("word {i} ({:?}) overlaps the previous word", w.text)));
        }
        prev_end = w.end;
    }
    Ok(())
}

/// Consecutive spans from word durations, starting at 0.
pub fn align_transcript(words: &[String], durations: &[f64]) -> Result<Vec<TranscriptWord>> {
    if words.len() != durations.len() {
        return Err(Error::shape("durations", words.len(), durations.len()));
    }
    let mut t = 0.0;
    let mut out = Vec::with_capacity(words.len());
    for (w, &d) in words.iter().zip(durations) {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration of {w:?} must be positive, got {d}")));
        }
        out.push(TranscriptWord {
            text: w.clone(),
            start: t,
            end: t + d,
        });
        t += d;
    }
    Ok(out)
}

/// Lowercase with surrounding punctuation removed.
pub fn normalize_word(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptWord>> {
    let words: Vec<TranscriptWord> = serde_json::from_slice(&fs::read(path)?)?;
    validate_transcript(&words)?;
    Ok(words)
}

pub fn write_transcript(path: &Path, words: &[TranscriptWord]) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(words)?)?;
    Ok(())
}
