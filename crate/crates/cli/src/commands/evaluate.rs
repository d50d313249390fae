use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use gesture_core::metrics::{
    beat_consistency, diversity, extract_features, fgd, srgr, BeatConfig, BeatTrack, EvaluationReport, FeatureSet,
};
use gesture_core::motion::{read_motion_file, MotionClip};
use gesture_core::synth::read_corpus;

use super::{config_value, create_out, load_vqvae, write_json, BEATS_FILE, MOTION_DIR, REPORT_FILE};
use crate::config::{optional_path, require_path, RunConfig};
use crate::error::{CliError, CliResult};

/// A clip with its audio beats and semantic frame spans when known.
struct EvalClip {
    clip: MotionClip,
    beats: Option<BeatTrack>,
    spans: Vec<Range<usize>>,
}

fn read_beats(path: &Path) -> CliResult<BeatTrack> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_slice(&bytes).map_err(gesture_core::Error::from)?)
}

fn json_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads a corpus directory, a `sample` output directory, or a plain
/// directory of motion files.
fn load_set(dir: &Path) -> CliResult<Vec<EvalClip>> {
    if dir.join("manifest.json").exists() {
        let corpus = read_corpus(dir)?;
        return Ok(corpus
            .clips
            .into_iter()
            .map(|c| EvalClip {
                beats: Some(c.beats),
                spans: c.semantic_spans.iter().map(|s| s.start_frame..s.end_frame).collect(),
                clip: c.motion,
            })
            .collect());
    }
    let (motion_dir, beats) = if dir.join(MOTION_DIR).is_dir() {
        let b = dir.join(BEATS_FILE);
        (dir.join(MOTION_DIR), if b.exists() { Some(read_beats(&b)?) } else { None })
    } else {
        (dir.to_path_buf(), None)
    };
    json_files(&motion_dir)?
        .into_iter()
        .filter(|p| p.file_name().is_some_and(|n| n != BEATS_FILE))
        .map(|p| {
            Ok(EvalClip {
                clip: read_motion_file(&p)?,
                beats: beats.clone(),
                spans: Vec::new(),
            })
        })
        .collect()
}

fn features(set: &[EvalClip], vqvae: &gesture_core::vqvae::VqvaeModel) -> CliResult<FeatureSet> {
    let mut vectors = Vec::with_capacity(set.len());
    for c in set {
        let f = extract_features(std::slice::from_ref(&c.clip), vqvae)?;
        vectors.push(f.vectors()[0].clone());
    }
    Ok(FeatureSet::new(vectors, "vqvae-mean-std")?)
}

/// `evaluate`: FGD against the reference set, beat consistency against the
/// audio beats, diversity of the generated set, and SRGR when the two sets
/// pair up clip by clip.
pub fn evaluate(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let e = &cfg.eval;
    let real_dir = require_path(&e.real, "eval.real")?;
    let gen_dir = require_path(&e.generated, "eval.generated")?;
    let beats_override = optional_path(&e.beats, "eval.beats")?.map(read_beats).transpose()?;
    let vqvae = load_vqvae(require_path(&e.vqvae, "eval.vqvae")?)?;
    if !(e.bc_sigma > 0.0) || !(e.srgr_threshold > 0.0) || !(e.srgr_weight >= 0.0) {
        return Err(CliError::Config("`eval.bc_sigma` and `eval.srgr_threshold` must be positive".into()));
    }

    let real = load_set(real_dir)?;
    let gen = load_set(gen_dir)?;
    for (name, set, dir) in [("reference", &real, real_dir), ("generated", &gen, gen_dir)] {
        if set.is_empty() {
            return Err(CliError::Input(format!("no motion files in {name} directory {}", dir.display())));
        }
        if let Some(bad) = set.iter().position(|c| c.clip.skeleton() != vqvae.skeleton()) {
            return Err(CliError::Input(format!(
                "{name} clip {bad} in {} uses a different skeleton than the feature extractor",
                dir.display()
            )));
        }
    }

    let fgd_value = fgd(&features(&real, &vqvae)?, &features(&gen, &vqvae)?)?;

    let beat_cfg = BeatConfig::default();
    let mut bc_sum = 0.0;
    for (i, c) in gen.iter().enumerate() {
        let audio = beats_override.as_ref().or(c.beats.as_ref()).ok_or_else(|| {
            CliError::Input(format!("no audio beats for generated clip {i}; set `eval.beats`"))
        })?;
        bc_sum += beat_consistency(audio, &c.clip, e.bc_sigma, &beat_cfg)?;
    }
    let bc = bc_sum / gen.len() as f64;

    let min_len = gen.iter().map(|c| c.clip.len()).min().unwrap_or(0);
    let flat: Vec<&[f64]> = gen
        .iter()
        .map(|c| &c.clip.data()[..min_len * c.clip.frame_width()])
        .collect();
    let div = if flat.len() >= 2 { diversity(&flat)? } else { 0.0 };

    let paired = real.len() == gen.len() && real.iter().zip(&gen).all(|(r, g)| r.clip.len() == g.clip.len());
    let srgr_value = if paired {
        let mut sum = 0.0;
        for (r, g) in real.iter().zip(&gen) {
            sum += srgr(&g.clip, &r.clip, &r.spans, e.srgr_weight, e.srgr_threshold)?;
        }
        Some(sum / gen.len() as f64)
    } else {
        None
    };

    let report = EvaluationReport {
        fgd: fgd_value,
        bc,
        diversity: div,
        srgr: srgr_value,
        srgr_advisory: true,
        generated_clips: gen.len(),
        reference_clips: real.len(),
        config: config_value(cfg),
    };
    create_out(out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(format!(
        "FGD {:.4}  BC {:.4}  diversity {:.4}  SRGR {}",
        report.fgd,
        report.bc,
        report.diversity,
        report.srgr.map_or("n/a".into(), |v| format!("{v:.4} (advisory)"))
    ))
}
