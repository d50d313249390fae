//! Run configuration: one TOML document with a section per stage. Unknown
//! keys are rejected everywhere, and relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use gesture_core::diffusion::{DenoiserConfig, DiffusionTrainConfig, LossWeighting, ReverseVariance, SamplerConfig};
use gesture_core::injection::InjectionConfig;
use gesture_core::long_sequence::LongConfig;
use gesture_core::semantic::AlignPolicy;
use gesture_core::synth::SyntheticCorpusConfig;
use gesture_core::vqvae::{VqvaeArch, VqvaeTrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub vqvae: VqvaeSection,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub database: DatabaseSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub injection: InjectionSection,
    #[serde(default)]
    pub long: LongSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

/// Synthetic corpus generation (`gen-corpus`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub n_clips: usize,
    pub clip_seconds: f64,
    pub bpm_min: f64,
    pub bpm_max: f64,
    pub joints: usize,
    pub speakers: usize,
    pub insertion_rate: f64,
    pub feature_dim: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        let c = SyntheticCorpusConfig::default();
        Self {
            n_clips: c.n_clips,
            clip_seconds: c.clip_seconds,
            bpm_min: c.bpm_min,
            bpm_max: c.bpm_max,
            joints: c.joints,
            speakers: c.speakers,
            insertion_rate: c.insertion_rate,
            feature_dim: c.feature_dim,
        }
    }
}

impl DataSection {
    pub fn corpus_config(&self, seed: u64) -> SyntheticCorpusConfig {
        SyntheticCorpusConfig {
            n_clips: self.n_clips,
            clip_seconds: self.clip_seconds,
            bpm_min: self.bpm_min,
            bpm_max: self.bpm_max,
            joints: self.joints,
            speakers: self.speakers,
            insertion_rate: self.insertion_rate,
            feature_dim: self.feature_dim,
            seed,
        }
    }
}

/// VQVAE training (`train-vqvae`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqvaeSection {
    /// Corpus directory written by `gen-corpus`.
    pub corpus: Option<PathBuf>,
    pub latent_dim: usize,
    pub codebook_size: usize,
    pub hidden: usize,
    pub depth: usize,
    pub context: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub window_frames: usize,
    pub velocity_weight: f64,
    pub acceleration_weight: f64,
    pub continuous_recon_weight: f64,
    pub latent_noise: f64,
    pub final_lr_fraction: f64,
    pub reseed_dead_codes: bool,
}

impl Default for VqvaeSection {
    fn default() -> Self {
        let a = VqvaeArch::new(12);
        let t = VqvaeTrainConfig::default();
        Self {
            corpus: None,
            latent_dim: a.latent_dim,
            codebook_size: a.codebook_size,
            hidden: a.hidden,
            depth: a.depth,
            context: a.context,
            lr: t.lr,
            epochs: t.epochs,
            batch_size: t.batch_size,
            window_frames: t.window_frames,
            velocity_weight: t.velocity_weight,
            acceleration_weight: t.acceleration_weight,
            continuous_recon_weight: t.continuous_recon_weight,
            latent_noise: t.latent_noise,
            final_lr_fraction: t.final_lr_fraction,
            reseed_dead_codes: t.reseed_dead_codes,
        }
    }
}

impl VqvaeSection {
    pub fn arch(&self, joints: usize) -> VqvaeArch {
        VqvaeArch {
            joints,
            latent_dim: self.latent_dim,
            codebook_size: self.codebook_size,
            hidden: self.hidden,
            depth: self.depth,
            context: self.context,
        }
    }

    pub fn train_config(&self, seed: u64) -> VqvaeTrainConfig {
        VqvaeTrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            window_frames: self.window_frames,
            velocity_weight: self.velocity_weight,
            acceleration_weight: self.acceleration_weight,
            continuous_recon_weight: self.continuous_recon_weight,
            latent_noise: self.latent_noise,
            final_lr_fraction: self.final_lr_fraction,
            reseed_dead_codes: self.reseed_dead_codes,
            seed,
        }
    }
}

/// Diffusion training (`train-diffusion`): a pre-training phase and an
/// optional fine-tuning phase that continues from its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSection {
    /// VQVAE checkpoint used to encode the corpora.
    pub vqvae: Option<PathBuf>,
    pub pretrain_corpus: Option<PathBuf>,
    pub finetune_corpus: Option<PathBuf>,
    pub model_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Training crop in latent frames.
    pub window: usize,
    pub p_uncond: f64,
    pub weighting: LossWeighting,
    pub final_lr_fraction: f64,
    pub finetune_lr: f64,
    pub finetune_epochs: usize,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let m = DenoiserConfig::new(64, 16, 4);
        let t = DiffusionTrainConfig::default();
        Self {
            vqvae: None,
            pretrain_corpus: None,
            finetune_corpus: None,
            model_dim: m.model_dim,
            layers: m.layers,
            heads: m.heads,
            ff_dim: m.ff_dim,
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            lr: t.lr,
            epochs: t.epochs,
            batch_size: t.batch_size,
            window: t.window,
            p_uncond: t.p_uncond,
            weighting: t.weighting,
            final_lr_fraction: t.final_lr_fraction,
            finetune_lr: t.lr,
            finetune_epochs: 300,
        }
    }
}

impl DiffusionSection {
    pub fn denoiser_config(&self, latent_dim: usize, audio_dim: usize, speakers: usize) -> DenoiserConfig {
        DenoiserConfig {
            latent_dim,
            model_dim: self.model_dim,
            layers: self.layers,
            heads: self.heads,
            ff_dim: self.ff_dim,
            audio_dim,
            speakers,
        }
    }

    pub fn pretrain_config(&self, seed: u64) -> DiffusionTrainConfig {
        DiffusionTrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            window: self.window,
            p_uncond: self.p_uncond,
            weighting: self.weighting,
            final_lr_fraction: self.final_lr_fraction,
            seed,
        }
    }

    pub fn finetune_config(&self, seed: u64) -> DiffusionTrainConfig {
        DiffusionTrainConfig {
            lr: self.finetune_lr,
            epochs: self.finetune_epochs,
            seed: seed.wrapping_add(1),
            ..self.pretrain_config(seed)
        }
    }
}

/// Gesture database construction (`build-db`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatabaseSection {
    pub vqvae: Option<PathBuf>,
    /// Directory with `labels.json` and the labeled clips.
    pub gestures: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmMode {
    /// Keyword matching only.
    None,
    /// Answers from a recorded replay file.
    Replay,
    /// HTTP endpoint from the environment; keyword matching when unset.
    Live,
}

/// Sampling (`sample`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub vqvae: Option<PathBuf>,
    pub diffusion: Option<PathBuf>,
    pub database: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    pub prompt: Option<PathBuf>,
    pub llm: LlmMode,
    pub llm_replay: Option<PathBuf>,
    pub duration_seconds: f64,
    pub n_samples: usize,
    pub speaker: usize,
    pub bpm: f64,
    pub beat_offset: f64,
    /// Respaced reverse chain length; the full schedule when unset.
    pub sampling_steps: Option<usize>,
    pub guidance_scale: f64,
    pub variance: ReverseVariance,
    pub clip_x0: Option<f64>,
}

impl Default for SampleSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            vqvae: None,
            diffusion: None,
            database: None,
            transcript: None,
            prompt: None,
            llm: LlmMode::Live,
            llm_replay: None,
            duration_seconds: 12.0,
            n_samples: 1,
            speaker: 0,
            bpm: 110.0,
            beat_offset: 0.0,
            sampling_steps: None,
            guidance_scale: s.guidance_scale,
            variance: s.variance,
            clip_x0: s.clip_x0,
        }
    }
}

impl SampleSection {
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            guidance_scale: self.guidance_scale,
            variance: self.variance,
            clip_x0: self.clip_x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectionSection {
    pub k_fraction: f64,
    pub sigma_perturb: f64,
    pub noise_matching: bool,
    pub align_policy: AlignPolicy,
}

impl Default for InjectionSection {
    fn default() -> Self {
        let c = InjectionConfig::default();
        Self {
            k_fraction: c.k_fraction,
            sigma_perturb: c.sigma_perturb,
            noise_matching: c.noise_matching,
            align_policy: AlignPolicy::default(),
        }
    }
}

impl InjectionSection {
    pub fn config(&self) -> InjectionConfig {
        InjectionConfig {
            k_fraction: self.k_fraction,
            sigma_perturb: self.sigma_perturb,
            noise_matching: self.noise_matching,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LongSection {
    pub window: usize,
    pub overlap: usize,
}

impl Default for LongSection {
    fn default() -> Self {
        let c = LongConfig::default();
        Self {
            window: c.window,
            overlap: c.overlap,
        }
    }
}

impl LongSection {
    pub fn config(&self) -> LongConfig {
        LongConfig {
            window: self.window,
            overlap: self.overlap,
        }
    }
}

/// Evaluation (`evaluate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Reference motion: a corpus directory or a directory of motion files.
    pub real: Option<PathBuf>,
    /// Generated motion: a `sample` output directory or a directory of motion files.
    pub generated: Option<PathBuf>,
    /// Audio beat track; defaults to the beats recorded next to the motion.
    pub beats: Option<PathBuf>,
    /// VQVAE checkpoint used as the FGD feature extractor.
    pub vqvae: Option<PathBuf>,
    pub bc_sigma: f64,
    pub srgr_threshold: f64,
    pub srgr_weight: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            real: None,
            generated: None,
            beats: None,
            vqvae: None,
            bc_sigma: 0.1,
            srgr_threshold: 0.1,
            srgr_weight: 2.0,
        }
    }
}

impl RunConfig {
    /// Defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            version: CONFIG_VERSION,
            seed,
            data: DataSection::default(),
            vqvae: VqvaeSection::default(),
            diffusion: DiffusionSection::default(),
            database: DatabaseSection::default(),
            sample: SampleSection::default(),
            injection: InjectionSection::default(),
            long: LongSection::default(),
            eval: EvalSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut self.vqvae.corpus);
        fix(&mut self.diffusion.vqvae);
        fix(&mut self.diffusion.pretrain_corpus);
        fix(&mut self.diffusion.finetune_corpus);
        fix(&mut self.database.vqvae);
        fix(&mut self.database.gestures);
        fix(&mut self.sample.vqvae);
        fix(&mut self.sample.diffusion);
        fix(&mut self.sample.database);
        fix(&mut self.sample.transcript);
        fix(&mut self.sample.prompt);
        fix(&mut self.sample.llm_replay);
        fix(&mut self.eval.real);
        fix(&mut self.eval.generated);
        fix(&mut self.eval.beats);
        fix(&mut self.eval.vqvae);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// The path under `key`, which must be set and exist.
pub fn require_path<'a>(value: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    let p = value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))?;
    if !p.exists() {
        return Err(CliError::Config(format!("`{key}` points to {}, which does not exist", p.display())));
    }
    Ok(p)
}

/// The optional path under `key`, which must exist when set.
pub fn optional_path<'a>(value: &'a Option<PathBuf>, key: &str) -> CliResult<Option<&'a Path>> {
    match value {
        None => Ok(None),
        Some(_) => require_path(value, key).map(Some),
    }
}
