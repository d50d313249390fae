use std::path::Path;

use gesture_core::diffusion::{
    make_linear_schedule, train_diffusion as fit_diffusion, train_diffusion_from, Denoiser, DiffusionCheckpoint,
    PhaseRecord, ScheduleSpec,
};
use gesture_core::semantic::build_database;
use gesture_core::synth::read_gesture_clips;
use gesture_core::vqvae::{train_vqvae as fit_vqvae, VqvaeCheckpoint};
use gesture_core::DType;

use super::{
    config_value, create_out, load_corpus, load_vqvae, training_examples, write_json, DATABASE_FILE, DIFFUSION_FILE,
    REPORT_FILE, VQVAE_FILE,
};
use crate::config::{optional_path, require_path, RunConfig};
use crate::error::{CliError, CliResult};

/// `train-vqvae`: fits the codec on the corpus motion.
pub fn train_vqvae(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let corpus_dir = require_path(&cfg.vqvae.corpus, "vqvae.corpus")?;
    let corpus = load_corpus(corpus_dir)?;
    create_out(out)?;
    let clips: Vec<_> = corpus.clips.iter().map(|c| c.motion.clone()).collect();
    let joints = clips
        .first()
        .ok_or_else(|| CliError::Input(format!("corpus {} has no clips", corpus_dir.display())))?
        .joint_count();
    let train_cfg = cfg.vqvae.train_config(cfg.seed);
    let run = fit_vqvae(&clips, cfg.vqvae.arch(joints), &train_cfg)?;
    let mut mse = 0.0;
    for c in &clips {
        mse += run.model.reconstruction_mse(c)?;
    }
    mse /= clips.len() as f64;
    VqvaeCheckpoint::from_model(&run.model, Some(train_cfg), run.history.clone())?.save(out.join(VQVAE_FILE))?;
    write_json(
        &out.join(REPORT_FILE),
        &serde_json::json!({
            "command": "train-vqvae",
            "reconstruction_mse": mse,
            "diverged_at": run.diverged_at,
            "loss_history": run.history,
            "config": config_value(cfg),
        }),
    )?;
    Ok(format!(
        "trained vqvae for {} epochs, reconstruction mse {mse:.3e}",
        run.history.len()
    ))
}

/// `train-diffusion`: pre-trains on `pretrain_corpus`, then fine-tunes on
/// `finetune_corpus` when given. The fine-tuning phase starts from the exact
/// parameters the pre-training phase ended with.
pub fn train_diffusion(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let d = &cfg.diffusion;
    let vq_path = require_path(&d.vqvae, "diffusion.vqvae")?;
    let pre_dir = require_path(&d.pretrain_corpus, "diffusion.pretrain_corpus")?;
    let ft_dir = optional_path(&d.finetune_corpus, "diffusion.finetune_corpus")?;
    let vqvae = load_vqvae(vq_path)?;
    let pre = load_corpus(pre_dir)?;
    create_out(out)?;

    let schedule = make_linear_schedule(d.steps, d.beta_start, d.beta_end)?;
    let denoiser_cfg = d.denoiser_config(vqvae.latent_dim(), pre.config.feature_dim, pre.config.speakers);
    let denoiser = Denoiser::new(denoiser_cfg, schedule, DType::F32, cfg.seed)?;
    let examples = training_examples(&pre, &vqvae)?;

    let mut phases = Vec::new();
    let start_hash = denoiser.store().content_hash()?;
    let pre_cfg = d.pretrain_config(cfg.seed);
    let run = fit_diffusion(denoiser, &examples, &pre_cfg)?;
    let mut diverged = run.diverged_at.map(|e| ("pretrain", e));
    phases.push(PhaseRecord {
        name: "pretrain".into(),
        train_config: pre_cfg,
        start_hash,
        end_hash: run.model.denoiser.store().content_hash()?,
        history: run.history,
    });
    let mut model = run.model;

    if let Some(dir) = ft_dir {
        let ft = load_corpus(dir)?;
        if ft.config.feature_dim != pre.config.feature_dim || ft.config.speakers > pre.config.speakers {
            return Err(CliError::Input(format!(
                "fine-tuning corpus has feature_dim {} and {} speakers; the model expects {} and at most {}",
                ft.config.feature_dim, ft.config.speakers, pre.config.feature_dim, pre.config.speakers
            )));
        }
        let ft_examples = training_examples(&ft, &vqvae)?;
        let ft_cfg = d.finetune_config(cfg.seed);
        let start_hash = model.denoiser.store().content_hash()?;
        let run = train_diffusion_from(model, &ft_examples, &ft_cfg)?;
        if diverged.is_none() {
            diverged = run.diverged_at.map(|e| ("finetune", e));
        }
        phases.push(PhaseRecord {
            name: "finetune".into(),
            train_config: ft_cfg,
            start_hash,
            end_hash: run.model.denoiser.store().content_hash()?,
            history: run.history,
        });
        model = run.model;
    }

    let spec = ScheduleSpec {
        steps: d.steps,
        beta_start: d.beta_start,
        beta_end: d.beta_end,
    };
    let ckpt = DiffusionCheckpoint::from_model(&model, spec, phases)?;
    ckpt.save(&out.join(DIFFUSION_FILE))?;
    let final_loss = ckpt.phases.last().and_then(|p| p.history.last()).map(|e| e.loss);
    write_json(
        &out.join(REPORT_FILE),
        &serde_json::json!({
            "command": "train-diffusion",
            "parameters": model.denoiser.parameter_count(),
            "phases": ckpt.phases,
            "final_loss": final_loss,
            "diverged": diverged.map(|(phase, epoch)| serde_json::json!({"phase": phase, "epoch": epoch})),
            "config": config_value(cfg),
        }),
    )?;
    Ok(format!(
        "trained denoiser in {} phase(s), final loss {}",
        ckpt.phases.len(),
        final_loss.map_or("n/a".into(), |l| format!("{l:.4}"))
    ))
}

/// `build-db`: encodes the labeled gesture clips.
pub fn build_db(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let vq_path = require_path(&cfg.database.vqvae, "database.vqvae")?;
    let gestures = require_path(&cfg.database.gestures, "database.gestures")?;
    let vqvae = load_vqvae(vq_path)?;
    create_out(out)?;
    let db = build_database(read_gesture_clips(gestures)?, &vqvae)?;
    db.save(&out.join(DATABASE_FILE))?;
    write_json(
        &out.join(REPORT_FILE),
        &serde_json::json!({
            "command": "build-db",
            "entries": db.entries().iter().map(|e| serde_json::json!({
                "id": e.id,
                "category": e.category,
                "keywords": e.keywords,
                "latent_frames": e.embedding.len(),
            })).collect::<Vec<_>>(),
            "config": config_value(cfg),
        }),
    )?;
    Ok(format!("built gesture database with {} entries", db.len()))
}
