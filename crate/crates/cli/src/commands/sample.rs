use std::path::Path;

use gesture_core::diffusion::ConditioningBundle;
use gesture_core::injection::{sample_with_injection, InjectionTarget};
use gesture_core::long_sequence::{plan_segments, sample_long};
use gesture_core::metrics::BeatTrack;
use gesture_core::motion::{write_motion_file, TRAINING_FPS};
use gesture_core::semantic::{
    assign_gestures, build_injection_target, build_plan, make_timeline_mask, read_transcript, AssignmentOutcome,
    AssignmentSource, GestureDatabase, InjectionPlan, LiveClient, LlmClient, PromptConfig, ReplayClient,
};
use gesture_core::synth::{AudioFeatureProvider, BeatFeatureProvider, ClipDescriptor};
use gesture_core::vqvae::latent_len;

use super::{
    config_value, create_out, load_diffusion, load_vqvae, write_json, BEATS_FILE, MASK_FILE, MOTION_DIR, PLAN_FILE,
    REPORT_FILE,
};
use crate::config::{optional_path, require_path, LlmMode, RunConfig};
use crate::error::{CliError, CliResult};

/// Stands in when no language model is configured; every request fails,
/// so assignment falls back to keyword matching.
struct NoLlm;

impl LlmClient for NoLlm {
    fn complete(&self, _prompt: &str) -> gesture_core::Result<String> {
        Err(gesture_core::Error::Llm("no language model configured".into()))
    }
}

fn llm_client(cfg: &RunConfig) -> CliResult<Box<dyn LlmClient>> {
    Ok(match cfg.sample.llm {
        LlmMode::None => Box::new(NoLlm),
        LlmMode::Replay => Box::new(ReplayClient::load(require_path(
            &cfg.sample.llm_replay,
            "sample.llm_replay",
        )?)?),
        LlmMode::Live => match LiveClient::from_env() {
            Some(c) => Box::new(c),
            None => {
                log::warn!("GESTURE_LLM_ENDPOINT is not set; using keyword matching");
                Box::new(NoLlm)
            }
        },
    })
}

/// Audio beat times of the conditioning descriptor.
fn descriptor_beats(d: &ClipDescriptor) -> CliResult<BeatTrack> {
    let period = 60.0 / d.bpm;
    let end = d.frames as f64 / d.fps;
    let mut t = d.beat_offset.rem_euclid(period);
    let mut beats = Vec::new();
    while t < end {
        beats.push(t);
        t += period;
    }
    Ok(BeatTrack::new(beats)?)
}

/// `sample`: generates `n_samples` clips of `duration_seconds`. Timelines
/// longer than the long-sequence window go through the merged-segment
/// sampler; a transcript turns on semantic gesture injection.
pub fn sample(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let s = &cfg.sample;
    let vqvae = load_vqvae(require_path(&s.vqvae, "sample.vqvae")?)?;
    let (_, model) = load_diffusion(require_path(&s.diffusion, "sample.diffusion")?)?;
    let transcript_path = optional_path(&s.transcript, "sample.transcript")?;
    let db_path = optional_path(&s.database, "sample.database")?;
    let prompt_path = optional_path(&s.prompt, "sample.prompt")?;
    if transcript_path.is_some() && db_path.is_none() {
        return Err(CliError::Config("`sample.transcript` requires `sample.database`".into()));
    }
    if !(s.duration_seconds > 0.0) || s.n_samples == 0 {
        return Err(CliError::Config("`sample.duration_seconds` and `sample.n_samples` must be positive".into()));
    }
    if vqvae.latent_dim() != model.denoiser.config().latent_dim {
        return Err(CliError::Input(format!(
            "vqvae latent width {} does not match the denoiser's {}",
            vqvae.latent_dim(),
            model.denoiser.config().latent_dim
        )));
    }
    let mc = model.denoiser.config().clone();
    if s.speaker >= mc.speakers {
        return Err(CliError::Config(format!(
            "`sample.speaker` is {}, the model knows {} speakers",
            s.speaker, mc.speakers
        )));
    }

    let frames = (s.duration_seconds * TRAINING_FPS).round() as usize;
    let lz = latent_len(frames);
    let descriptor = ClipDescriptor {
        frames,
        fps: TRAINING_FPS,
        bpm: s.bpm,
        beat_offset: s.beat_offset,
        speaker: s.speaker,
        energy_depth: 0.25,
        energy_period: 6.0,
        energy_phase: 0.0,
    };
    let provider = BeatFeatureProvider::new(mc.audio_dim, mc.speakers)?;
    let cond = ConditioningBundle::new(lz, mc.audio_dim, provider.features(&descriptor)?, s.speaker)?;

    let policy = cfg.injection.align_policy;
    let (plan, outcome, target) = match (transcript_path, db_path) {
        (Some(tp), Some(dp)) => {
            let transcript = read_transcript(tp)?;
            let db = GestureDatabase::load(dp)?;
            if db.latent_dim() != mc.latent_dim {
                return Err(CliError::Input(format!(
                    "database latent width {} does not match the denoiser's {}",
                    db.latent_dim(),
                    mc.latent_dim
                )));
            }
            let prompt = match prompt_path {
                Some(p) => PromptConfig::load(p)?,
                None => PromptConfig::default(),
            };
            let client = llm_client(cfg)?;
            let outcome = assign_gestures(&transcript, &db, client.as_ref(), &prompt);
            for w in &outcome.warnings {
                log::warn!("{w}");
            }
            let plan = build_plan(&transcript, &outcome.assignments, &db, lz, policy)?;
            let target = build_injection_target(&plan, &db, &model.stats, policy)?;
            (plan, Some(outcome), target)
        }
        _ => (InjectionPlan::empty(lz), None, InjectionTarget::empty(lz, mc.latent_dim)),
    };
    let mask = make_timeline_mask(&plan, lz)?;

    let mut schedule = model.denoiser.schedule().clone();
    if let Some(steps) = s.sampling_steps {
        schedule = schedule.respaced(steps)?;
    }
    let sampler = s.sampler();
    let inj = cfg.injection.config();
    let long = cfg.long.config();
    let routed_long = lz > long.window;
    let segments = if routed_long {
        plan_segments(lz, long.window, long.overlap)?.segments.len()
    } else {
        1
    };

    create_out(out)?;
    let motion_dir = out.join(MOTION_DIR);
    create_out(&motion_dir)?;
    let mut files = Vec::new();
    let seeds: Vec<u64> = (0..s.n_samples as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    for (i, &seed) in seeds.iter().enumerate() {
        let z = if routed_long {
            sample_long(&model, &cond, lz, &schedule, &sampler, &long, seed, Some((&target, &inj)))?
        } else {
            sample_with_injection(&model, &cond, lz, &target, &schedule, &sampler, &inj, seed)?
        };
        let latents = model.stats.destandardize(&z, lz)?;
        let clip = vqvae.decode(&latents)?.slice(0, frames)?;
        let name = format!("sample_{i:03}.json");
        write_motion_file(motion_dir.join(&name), &clip)?;
        files.push(format!("{MOTION_DIR}/{name}"));
        log::info!("wrote sample {i} (seed {seed})");
    }

    write_json(&out.join(PLAN_FILE), &plan)?;
    write_json(&out.join(MASK_FILE), &mask)?;
    write_json(&out.join(BEATS_FILE), &descriptor_beats(&descriptor)?)?;
    let source = outcome.as_ref().map(|o: &AssignmentOutcome| o.source);
    write_json(
        &out.join(REPORT_FILE),
        &serde_json::json!({
            "command": "sample",
            "files": files,
            "seeds": seeds,
            "frames": frames,
            "latent_frames": lz,
            "routing": if routed_long { "long" } else { "window" },
            "segments": segments,
            "sampling_steps": schedule.steps(),
            "plan_spans": plan.spans.len(),
            "assignment_source": source,
            "assignment_warnings": outcome.as_ref().map(|o| o.warnings.clone()).unwrap_or_default(),
            "config": config_value(cfg),
        }),
    )?;
    let how = match source {
        None => "no transcript".to_string(),
        Some(AssignmentSource::Llm) => "language model".to_string(),
        Some(AssignmentSource::Mixed) => "language model with keyword fallback".to_string(),
        Some(AssignmentSource::Fallback) => "keyword fallback".to_string(),
    };
    Ok(format!(
        "wrote {} sample(s) of {frames} frames ({} routing, {} semantic span(s), {how})",
        files.len(),
        if routed_long { "long-sequence" } else { "single-window" },
        plan.spans.len()
    ))
}
