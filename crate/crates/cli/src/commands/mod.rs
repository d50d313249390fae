//! Subcommand implementations. Each takes the resolved configuration and an
//! output directory, writes its artifacts plus a `report.json`, and returns
//! a one-line human summary.

mod evaluate;
mod sample;
mod train;

use std::fs;
use std::path::Path;

use gesture_core::diffusion::{ConditioningBundle, DiffusionCheckpoint, DiffusionModel, TrainingExample};
use gesture_core::synth::{generate_synthetic_corpus, read_corpus, write_corpus, SyntheticCorpus};
use gesture_core::vqvae::{VqvaeCheckpoint, VqvaeModel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub use evaluate::evaluate;
pub use sample::sample;
pub use train::{build_db, train_diffusion, train_vqvae};

pub const VQVAE_FILE: &str = "vqvae.json";
pub const DIFFUSION_FILE: &str = "diffusion.json";
pub const DATABASE_FILE: &str = "database.json";
pub const REPORT_FILE: &str = "report.json";
pub const PLAN_FILE: &str = "plan.json";
pub const MASK_FILE: &str = "mask.json";
pub const BEATS_FILE: &str = "beats.json";
pub const MOTION_DIR: &str = "motion";

pub(crate) fn create_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(gesture_core::Error::from)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Config echo for reports.
pub(crate) fn config_value(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub(crate) fn load_vqvae(path: &Path) -> CliResult<VqvaeModel> {
    Ok(VqvaeCheckpoint::load(path)?.into_model()?)
}

pub(crate) fn load_diffusion(path: &Path) -> CliResult<(DiffusionCheckpoint, DiffusionModel)> {
    let ckpt = DiffusionCheckpoint::load(path)?;
    let model = ckpt.to_model()?;
    Ok((ckpt, model))
}

pub(crate) fn load_corpus(path: &Path) -> CliResult<SyntheticCorpus> {
    Ok(read_corpus(path)?)
}

/// Encodes every corpus clip and pairs it with its features and speaker.
pub(crate) fn training_examples(corpus: &SyntheticCorpus, vqvae: &VqvaeModel) -> CliResult<Vec<TrainingExample>> {
    let dim = corpus.config.feature_dim;
    corpus
        .clips
        .iter()
        .map(|c| {
            let latents = vqvae.encode(&c.motion)?;
            let cond = ConditioningBundle::new(latents.len(), dim, c.features.clone(), c.speaker)?;
            Ok(TrainingExample { latents, cond })
        })
        .collect()
}

/// `gen-corpus`: writes the synthetic corpus to `out`.
pub fn gen_corpus(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let corpus_cfg = cfg.data.corpus_config(cfg.seed);
    corpus_cfg.validate()?;
    create_out(out)?;
    let corpus = generate_synthetic_corpus(&corpus_cfg)?;
    write_corpus(out, &corpus)?;
    let spans: usize = corpus.clips.iter().map(|c| c.semantic_spans.len()).sum();
    write_json(
        &out.join(REPORT_FILE),
        &serde_json::json!({
            "command": "gen-corpus",
            "clips": corpus.clips.len(),
            "semantic_spans": spans,
            "config": config_value(cfg),
        }),
    )?;
    Ok(format!(
        "wrote {} clips ({spans} semantic spans) to {}",
        corpus.clips.len(),
        out.display()
    ))
}
