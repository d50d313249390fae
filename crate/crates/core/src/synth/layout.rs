//! On-disk corpus layout:
//!
//! ```text
//! manifest.json
//! clips/<id>/motion.json  transcript.json  features.json  meta.json
//! gestures/labels.json    gestures/<gesture-id>.json
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{gesture_clips, ClipDescriptor, SemanticSpan, SyntheticClip, SyntheticCorpus, SyntheticCorpusConfig};
use crate::error::{Error, Result};
use crate::metrics::BeatTrack;
use crate::motion::{read_motion_file, write_motion_file};
use crate::semantic::{read_transcript, write_transcript, LabeledClip};

pub const CORPUS_FORMAT: &str = "gesture-corpus";
const CORPUS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    config: SyntheticCorpusConfig,
    feature_provider: String,
    feature_dim: usize,
    clips: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureFile {
    dim: usize,
    latent_frames: usize,
    values: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    speaker: usize,
    descriptor: ClipDescriptor,
    beats: BeatTrack,
    semantic_spans: Vec<SemanticSpan>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRecord {
    id: String,
    label: String,
    category: String,
    keywords: Vec<String>,
    source: String,
    file: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Writes the corpus and the template gesture clips under `dir`.
pub fn write_corpus(dir: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    fs::create_dir_all(dir.join("clips"))?;
    for clip in &corpus.clips {
        let cdir = dir.join("clips").join(&clip.id);
        fs::create_dir_all(&cdir)?;
        write_motion_file(cdir.join("motion.json"), &clip.motion)?;
        write_transcript(&cdir.join("transcript.json"), &clip.transcript)?;
        write_json(
            &cdir.join("features.json"),
            &FeatureFile {
                dim: corpus.config.feature_dim,
                latent_frames: clip.descriptor.latent_frames(),
                values: clip.features.clone(),
            },
        )?;
        write_json(
            &cdir.join("meta.json"),
            &MetaFile {
                speaker: clip.speaker,
                descriptor: clip.descriptor.clone(),
                beats: clip.beats.clone(),
                semantic_spans: clip.semantic_spans.clone(),
            },
        )?;
    }
    let gdir = dir.join("gestures");
    fs::create_dir_all(&gdir)?;
    let mut labels = Vec::new();
    for g in gesture_clips()? {
        let file = format!("{}.json", g.id);
        write_motion_file(gdir.join(&file), &g.clip)?;
        labels.push(LabelRecord {
            id: g.id,
            label: g.label,
            category: g.category,
            keywords: g.keywords,
            source: g.source,
            file,
        });
    }
    write_json(&gdir.join("labels.json"), &labels)?;
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            format: CORPUS_FORMAT.into(),
            version: CORPUS_VERSION,
            config: corpus.config.clone(),
            feature_provider: "beat-rhythm".into(),
            feature_dim: corpus.config.feature_dim,
            clips: corpus.clips.iter().map(|c| c.id.clone()).collect(),
        },
    )
}

pub fn read_corpus(dir: &Path) -> Result<SyntheticCorpus> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != CORPUS_FORMAT || manifest.version != CORPUS_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported corpus format {} v{}",
            manifest.format, manifest.version
        )));
    }
    let mut clips = Vec::with_capacity(manifest.clips.len());
    for id in &manifest.clips {
        let cdir = dir.join("clips").join(id);
        let features: FeatureFile = read_json(&cdir.join("features.json"))?;
        if features.dim != manifest.feature_dim || features.values.len() != features.dim * features.latent_frames {
            return Err(Error::shape("corpus features", manifest.feature_dim, features.dim));
        }
        let meta: MetaFile = read_json(&cdir.join("meta.json"))?;
        clips.push(SyntheticClip {
            id: id.clone(),
            motion: read_motion_file(cdir.join("motion.json"))?,
            descriptor: meta.descriptor,
            features: features.values,
            transcript: read_transcript(&cdir.join("transcript.json"))?,
            speaker: meta.speaker,
            beats: meta.beats,
            semantic_spans: meta.semantic_spans,
        });
    }
    Ok(SyntheticCorpus {
        config: manifest.config,
        clips,
    })
}

/// Reads the labeled gesture clips from a `gestures/` directory.
pub fn read_gesture_clips(dir: &Path) -> Result<Vec<LabeledClip>> {
    let labels: Vec<LabelRecord> = read_json(&dir.join("labels.json"))?;
    labels
        .into_iter()
        .map(|r| {
            Ok(LabeledClip {
                clip: read_motion_file(dir.join(&r.file))?,
                id: r.id,
                label: r.label,
                category: r.category,
                keywords: r.keywords,
                source: r.source,
            })
        })
        .collect()
}
