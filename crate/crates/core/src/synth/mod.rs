//! Procedural paired corpus: upper-body motion with beat-locked arm swings,
//! per-speaker style, keyframed semantic gestures at labeled transcript
//! words, and rhythm features on the latent timeline. Every clip is
//! reproducible from the corpus seed and its index.

mod features;
mod layout;
mod templates;

pub use features::{AudioFeatureProvider, BeatFeatureProvider, ClipDescriptor};
pub use layout::{read_corpus, read_gesture_clips, write_corpus, CORPUS_FORMAT};
pub use templates::{idle_pose, joint, pose_matrices, template_library, GestureTemplate, Pose};

pub use crate::semantic::align_transcript;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BeatTrack;
use crate::motion::rotation::{axis_rotation, euler_to_matrix, slerp, to_flat, Mat3};
use crate::motion::{EulerOrder, MotionClip, Skeleton, TRAINING_FPS};
use crate::rng::{seeded, stream, SeededRng};
use crate::semantic::{LabeledClip, TranscriptWord};

const FILLER: &[&str] = &[
    "so", "and", "the", "we", "really", "think", "about", "this", "it", "was", "just", "kind", "of", "you", "know",
    "then", "people", "said", "idea", "time", "work", "here", "because", "maybe", "start", "a", "lot", "when",
    "story", "moment", "actually", "little", "thing", "called", "us",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCorpusConfig {
    pub n_clips: usize,
    pub clip_seconds: f64,
    pub bpm_min: f64,
    pub bpm_max: f64,
    /// Joint count; only the 12-joint upper body is supported.
    pub joints: usize,
    pub speakers: usize,
    /// Probability that each 4-second slot carries a semantic gesture.
    pub insertion_rate: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            n_clips: 200,
            clip_seconds: 12.0,
            bpm_min: 90.0,
            bpm_max: 130.0,
            joints: joint::COUNT,
            speakers: 4,
            insertion_rate: 0.5,
            feature_dim: 16,
            seed: 0,
        }
    }
}

impl SyntheticCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clips == 0 || self.speakers == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidArgument("n_clips, speakers and feature_dim must be positive".into()));
        }
        if !(self.clip_seconds >= 2.0) {
            return Err(Error::InvalidArgument("clips must last at least 2 s".into()));
        }
        if !(self.bpm_min > 0.0 && self.bpm_min <= self.bpm_max) {
            return Err(Error::InvalidArgument("need 0 < bpm_min <= bpm_max".into()));
        }
        if self.joints != joint::COUNT {
            return Err(Error::InvalidArgument(format!(
                "only the {}-joint upper-body skeleton is supported, got {}",
                joint::COUNT,
                self.joints
            )));
        }
        if !(0.0..=1.0).contains(&self.insertion_rate) {
            return Err(Error::InvalidArgument("insertion_rate must be in [0, 1]".into()));
        }
        BeatFeatureProvider::new(self.feature_dim, self.speakers)?;
        Ok(())
    }

    pub fn frames_per_clip(&self) -> usize {
        (self.clip_seconds * TRAINING_FPS).round() as usize
    }
}

/// A semantic gesture placed in a clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSpan {
    pub word_index: usize,
    pub gesture_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub id: String,
    pub motion: MotionClip,
    pub descriptor: ClipDescriptor,
    /// Latent-rate features, `latent_frames * feature_dim` values.
    pub features: Vec<f32>,
    pub transcript: Vec<TranscriptWord>,
    pub speaker: usize,
    /// Beat grid, excluding beats inside semantic gestures.
    pub beats: BeatTrack,
    pub semantic_spans: Vec<SemanticSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub config: SyntheticCorpusConfig,
    pub clips: Vec<SyntheticClip>,
}

/// Per-speaker motion style.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerStyle {
    base: Pose,
    /// `(joint, axis, amplitude)` of the beat-locked swing.
    swings: Vec<(usize, usize, f64)>,
}

impl SpeakerStyle {
    pub fn for_speaker(seed: u64, speaker: usize) -> Self {
        let mut rng = seeded(seed ^ 0x5EED_5EED, stream::DATA + 100 + speaker as u64);
        let s: f64 = rng.random_range(0.6..1.2);
        let spread: f64 = rng.random_range(-0.25..0.25);
        let mut base = idle_pose();
        base[joint::L_SHOULDER][2] += spread;
        base[joint::R_SHOULDER][2] -= spread;
        base[joint::L_ELBOW][0] += rng.random_range(0.0..0.5);
        base[joint::R_ELBOW][0] += rng.random_range(0.0..0.5);
        let wrist_axis = rng.random_range(0..3);
        let swings = vec![
            (joint::L_SHOULDER, 0, 0.30 * s * rng.random_range(0.7..1.3)),
            (joint::R_SHOULDER, 0, 0.30 * s * rng.random_range(0.7..1.3)),
            (joint::L_ELBOW, 0, 0.45 * s),
            (joint::R_ELBOW, 0, 0.45 * s),
            (joint::L_WRIST, wrist_axis, 0.25 * s),
            (joint::R_WRIST, wrist_axis, 0.25 * s),
            (joint::NECK, 0, 0.06 * s),
            (joint::SPINE1, 1, 0.04 * s),
        ];
        Self { base, swings }
    }

    /// Rhythmic pose at time `t`.
    pub fn pose(&self, d: &ClipDescriptor, t: f64) -> Vec<Mat3> {
        let swing = d.energy(t) * (std::f64::consts::PI * d.phase(t)).cos();
        let mut mats: Vec<Mat3> = self.base.iter().map(|a| euler_to_matrix(*a, EulerOrder::XYZ)).collect();
        for &(j, axis, amp) in &self.swings {
            mats[j] *= axis_rotation(axis, amp * swing);
        }
        mats
    }
}

fn clip_rng(seed: u64, index: usize) -> SeededRng {
    seeded(seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)), stream::DATA)
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Generates clip `index` of the corpus.
pub fn generate_clip(config: &SyntheticCorpusConfig, index: usize) -> Result<SyntheticClip> {
    let mut rng = clip_rng(config.seed, index);
    let skeleton = Skeleton::upper_body();
    let frames = config.frames_per_clip();
    let fps = TRAINING_FPS;
    let speaker = rng.random_range(0..config.speakers);
    let bpm = rng.random_range(config.bpm_min..=config.bpm_max);
    let period = 60.0 / bpm;
    let descriptor = ClipDescriptor {
        frames,
        fps,
        bpm,
        beat_offset: rng.random_range(0.0..period),
        speaker,
        energy_depth: 0.25,
        energy_period: rng.random_range(4.0..8.0),
        energy_phase: rng.random_range(0.0..std::f64::consts::TAU),
    };
    let style = SpeakerStyle::for_speaker(config.seed, speaker);

    // Words until the clip is covered; the last one ends at the clip end.
    let mut words = Vec::new();
    let mut durations = Vec::new();
    let mut total = 0.0;
    while total < config.clip_seconds {
        let mut d = rng.random_range(0.25..0.55);
        if total + d > config.clip_seconds || config.clip_seconds - (total + d) < 0.2 {
            d = config.clip_seconds - total;
        }
        words.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
        durations.push(d);
        total += d;
    }

    let library = template_library();
    let slots = ((config.clip_seconds / 4.0).floor() as usize).max(1);
    let slot_len = config.clip_seconds / slots as f64;
    let mut inserts: Vec<(usize, usize, usize)> = Vec::new();
    let mut spans = Vec::new();
    let provisional = align_transcript(&words, &durations)?;
    for s in 0..slots {
        if rng.random::<f64>() >= config.insertion_rate {
            continue;
        }
        let template = rng.random_range(0..library.len());
        let tpl = &library[template];
        let n = tpl.frames();
        let center = (s as f64 + 0.5) * slot_len + rng.random_range(-0.5..0.5);
        let start = ((center * fps) as isize - n as isize / 2).clamp(0, (frames - n) as isize) as usize;
        let mid = (start + n / 2) as f64 / fps;
        let Some(w) = provisional.iter().position(|w| w.start <= mid && mid < w.end) else {
            continue;
        };
        let single: Vec<&String> = tpl.keywords.iter().filter(|k| !k.contains(' ')).collect();
        words[w] = single[rng.random_range(0..single.len())].clone();
        inserts.push((template, start, n));
        spans.push(SemanticSpan {
            word_index: w,
            gesture_id: tpl.id.clone(),
            start_frame: start,
            end_frame: start + n,
        });
    }
    let transcript = align_transcript(&words, &durations)?;

    let mut data = Vec::with_capacity(frames * joint::COUNT * 9);
    for f in 0..frames {
        let t = f as f64 / fps;
        let mut pose = style.pose(&descriptor, t);
        for &(k, start, n) in &inserts {
            if f >= start && f < start + n {
                let u = (f - start) as f64 / (n - 1) as f64;
                let w = smoothstep(u / 0.25).min(smoothstep((1.0 - u) / 0.25));
                let target = library[k].pose_at(u);
                for (p, q) in pose.iter_mut().zip(&target) {
                    *p = slerp(p, q, w);
                }
            }
        }
        for m in &pose {
            data.extend(to_flat(m));
        }
    }
    let motion = MotionClip::new(skeleton, fps, data)?;

    let mut beats = Vec::new();
    let mut k = 0;
    loop {
        let t = descriptor.beat_offset + k as f64 * period;
        if t > (frames - 2) as f64 / fps {
            break;
        }
        let frame = t * fps;
        let in_gesture = spans
            .iter()
            .any(|s| frame >= s.start_frame as f64 - 3.0 && frame < s.end_frame as f64 + 3.0);
        if t >= 1.0 / fps && !in_gesture {
            beats.push(t);
        }
        k += 1;
    }

    let provider = BeatFeatureProvider::new(config.feature_dim, config.speakers)?;
    let features = provider.features(&descriptor)?;
    Ok(SyntheticClip {
        id: format!("clip_{index:04}"),
        motion,
        descriptor,
        features,
        transcript,
        speaker,
        beats: BeatTrack::new(beats)?,
        semantic_spans: spans,
    })
}

pub fn generate_synthetic_corpus(config: &SyntheticCorpusConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let clips = (0..config.n_clips)
        .map(|i| generate_clip(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticCorpus {
        config: config.clone(),
        clips,
    })
}

/// The template gestures rendered as labeled clips for the gesture database.
pub fn gesture_clips() -> Result<Vec<LabeledClip>> {
    let sk = Skeleton::upper_body();
    template_library()
        .into_iter()
        .map(|t| {
            Ok(LabeledClip {
                clip: t.render(&sk)?,
                source: format!("template:{}", t.id),
                id: t.id,
                label: t.label,
                category: t.category,
                keywords: t.keywords,
            })
        })
        .collect()
}
