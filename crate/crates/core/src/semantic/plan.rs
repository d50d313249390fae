use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{GestureAssignment, GestureDatabase, TranscriptWord};
use crate::diffusion::LatentStats;
use crate::error::{Error, Result};
use crate::injection::InjectionTarget;
use crate::rng::{normal_f64, seeded, stream};
use crate::vqvae::{LatentSequence, DOWNSAMPLE};

const LATENT_RATE: f64 = crate::motion::TRAINING_FPS / DOWNSAMPLE as f64;

/// How a candidate shorter than its span is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignPolicy {
    /// Shrink the injected region to the candidate, centered in the span.
    #[default]
    Shrink,
    /// Keep the span and repeat the candidate's edge frames.
    EdgePad,
}

/// A candidate cut or placed to fit a span.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedCandidate {
    pub range: Range<usize>,
    pub latents: LatentSequence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedSpan {
    pub first_word: usize,
    pub last_word: usize,
    pub entry_id: String,
    pub start_latent: usize,
    pub end_latent: usize,
}

/// Spans to inject on a latent timeline of `latent_length` frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionPlan {
    pub latent_length: usize,
    pub spans: Vec<PlannedSpan>,
}

impl InjectionPlan {
    pub fn empty(latent_length: usize) -> Self {
        Self {
            latent_length,
            spans: Vec::new(),
        }
    }
}

/// Latent frames `floor(start * 7.5) .. ceil(end * 7.5)`, clipped to the
/// timeline.
pub fn word_to_latent_span(start: f64, end: f64, latent_length: usize) -> Range<usize> {
    let a = ((start * LATENT_RATE) + 1e-9).floor().max(0.0) as usize;
    let b = ((end * LATENT_RATE) - 1e-9).ceil().max(0.0) as usize;
    a.min(latent_length)..b.min(latent_length)
}

/// Center-crops a longer candidate; a shorter one either shrinks the span
/// around its center or is edge-padded to the span.
pub fn align_candidate_to_span(entry: &LatentSequence, span: Range<usize>, policy: AlignPolicy) -> Result<AlignedCandidate> {
    let s = span.len();
    let e = entry.len();
    if s == 0 || e == 0 {
        return Err(Error::InvalidArgument("span and candidate must be non-empty".into()));
    }
    if e >= s {
        let off = (e - s) / 2;
        return Ok(AlignedCandidate {
            range: span,
            latents: entry.slice(off, off + s)?,
        });
    }
    match policy {
        AlignPolicy::Shrink => {
            let start = span.start + (s - e) / 2;
            Ok(AlignedCandidate {
                range: start..start + e,
                latents: entry.clone(),
            })
        }
        AlignPolicy::EdgePad => {
            let before = (s - e) / 2;
            let d = entry.dim();
            let mut v = Vec::with_capacity(s * d);
            for i in 0..s {
                let k = i.saturating_sub(before).min(e - 1);
                v.extend_from_slice(entry.frame(k));
            }
            Ok(AlignedCandidate {
                range: span,
                latents: LatentSequence::new(s, d, v)?,
            })
        }
    }
}

/// Maps word assignments to aligned latent spans. A span that would
/// overlap the previous one is trimmed to start after it, and dropped when
/// nothing remains.
pub fn build_plan(
    transcript: &[TranscriptWord],
    assignments: &[GestureAssignment],
    db: &GestureDatabase,
    latent_length: usize,
    policy: AlignPolicy,
) -> Result<InjectionPlan> {
    let mut spans: Vec<PlannedSpan> = Vec::new();
    for a in assignments {
        if a.first > a.last || a.last >= transcript.len() {
            return Err(Error::InvalidArgument(format!("word range {}..={} outside transcript", a.first, a.last)));
        }
        let entry = db
            .get(&a.entry_id)
            .ok_or_else(|| Error::Database(format!("unknown gesture {}", a.entry_id)))?;
        let mut range = word_to_latent_span(transcript[a.first].start, transcript[a.last].end, latent_length);
        if let Some(prev) = spans.last() {
            range.start = range.start.max(prev.end_latent);
        }
        if range.is_empty() {
            log::warn!("gesture {} on words {}..={} has no room on the timeline", a.entry_id, a.first, a.last);
            continue;
        }
        let aligned = align_candidate_to_span(&entry.embedding, range, policy)?;
        spans.push(PlannedSpan {
            first_word: a.first,
            last_word: a.last,
            entry_id: a.entry_id.clone(),
            start_latent: aligned.range.start,
            end_latent: aligned.range.end,
        });
    }
    Ok(InjectionPlan { latent_length, spans })
}

/// 1 outside spans, 0 inside.
pub fn make_timeline_mask(plan: &InjectionPlan, latent_length: usize) -> Result<Vec<u8>> {
    let mut m = vec![1u8; latent_length];
    for s in &plan.spans {
        if s.start_latent >= s.end_latent || s.end_latent > latent_length {
            return Err(Error::InvalidArgument(format!(
                "span {}..{} outside timeline of {latent_length}",
                s.start_latent, s.end_latent
            )));
        }
        for v in &mut m[s.start_latent..s.end_latent] {
            if *v == 0 {
                return Err(Error::OverlappingSpans(format!("{}..{}", s.start_latent, s.end_latent)));
            }
            *v = 0;
        }
    }
    Ok(m)
}

/// `values + sigma * N(0, 1)` from the seed's perturbation stream.
pub fn perturb_embedding(values: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = seeded(seed, stream::PERTURB);
    let noise = normal_f64(&mut rng, values.len());
    Ok(values.iter().zip(noise).map(|(v, n)| v + sigma * n).collect())
}

/// Mask and standardized candidate latents for `plan`.
pub fn build_injection_target(
    plan: &InjectionPlan,
    db: &GestureDatabase,
    stats: &LatentStats,
    policy: AlignPolicy,
) -> Result<InjectionTarget> {
    let len = plan.latent_length;
    let d = stats.dim();
    let mask = make_timeline_mask(plan, len)?;
    let mut candidates = vec![0.0; len * d];
    for s in &plan.spans {
        let entry = db
            .get(&s.entry_id)
            .ok_or_else(|| Error::Database(format!("unknown gesture {}", s.entry_id)))?;
        let span = s.start_latent..s.end_latent;
        let aligned = align_candidate_to_span(&entry.embedding, span.clone(), policy)?;
        if aligned.range != span {
            return Err(Error::InvalidArgument(format!(
                "span {}..{} does not fit gesture {} under the alignment policy",
                span.start, span.end, s.entry_id
            )));
        }
        let z = stats.standardize(&aligned.latents)?;
        candidates[span.start * d..span.end * d].copy_from_slice(&z);
    }
    Ok(InjectionTarget { mask, candidates })
}
