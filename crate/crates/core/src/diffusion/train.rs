use candle_core::{DType, Device, Tensor};
use candle_nn::optim::{AdamW, Optimizer, ParamsAdamW};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{normal_tensor, ConditioningBundle, Denoiser, NoiseSchedule, TensorX0Predictor, X0Predictor};
use crate::error::{Error, Result};
use crate::rng::{permutation, seeded, stream};
use crate::vqvae::LatentSequence;

/// Per-dimension mean and standard deviation of the training latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LatentStats {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn from_latents<'a>(seqs: impl IntoIterator<Item = &'a LatentSequence>) -> Result<Self> {
        let mut dim = None;
        let mut n = 0usize;
        let mut sum = Vec::new();
        let mut sq = Vec::new();
        for s in seqs {
            let d = *dim.get_or_insert(s.dim());
            if d != s.dim() {
                return Err(Error::shape("latent width", d.to_string(), s.dim().to_string()));
            }
            if sum.is_empty() {
                sum = vec![0.0; d];
                sq = vec![0.0; d];
            }
            for f in 0..s.len() {
                for (k, &v) in s.frame(f).iter().enumerate() {
                    sum[k] += v as f64;
                    sq[k] += (v as f64) * (v as f64);
                }
            }
            n += s.len();
        }
        if n == 0 {
            return Err(Error::InvalidArgument("no latent frames to measure".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / n as f64 - m * m).max(0.0).sqrt().max(1e-6))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn standardize(&self, seq: &LatentSequence) -> Result<Vec<f64>> {
        if seq.dim() != self.dim() {
            return Err(Error::shape("latent width", self.dim().to_string(), seq.dim().to_string()));
        }
        let d = self.dim();
        Ok(seq
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v as f64 - self.mean[i % d]) / self.std[i % d])
            .collect())
    }

    pub fn destandardize(&self, values: &[f64], len: usize) -> Result<LatentSequence> {
        let d = self.dim();
        let raw = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v * self.std[i % d] + self.mean[i % d]) as f32)
            .collect();
        LatentSequence::new(len, d, raw)
    }
}

/// A denoiser together with the latent standardization it was trained on.
/// Its [`X0Predictor`] works in standardized space.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub denoiser: Denoiser,
    pub stats: LatentStats,
}

impl X0Predictor for DiffusionModel {
    fn latent_dim(&self) -> usize {
        self.denoiser.latent_dim()
    }

    fn predict_x0(&self, x_t: &[f64], len: usize, t: usize, conds: &[&ConditioningBundle]) -> Result<Vec<f64>> {
        self.denoiser.predict_x0(x_t, len, t, conds)
    }
}

/// Per-step weight of the clean-latent squared error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    /// Every step counts the same.
    Uniform,
    /// Weight `1 / (1 - abar_t)` (signal-to-noise ratio plus one).
    #[default]
    SnrPlusOne,
}

impl LossWeighting {
    pub fn weight(self, schedule: &NoiseSchedule, t: usize) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::SnrPlusOne => 1.0 / (1.0 - schedule.alpha_bar(t)),
        }
    }
}

/// Weighted mean squared error between `x0` and the model's prediction from
/// `sqrt(abar_t) x0 + sqrt(1 - abar_t) noise`, with explicit draws.
/// `x0` and `noise` are `(B, L, D)`; elements with `null[i]` set use the
/// unconditional bundle.
#[allow(clippy::too_many_arguments)]
pub fn training_loss_with<P: TensorX0Predictor + ?Sized>(
    model: &P,
    schedule: &NoiseSchedule,
    x0: &Tensor,
    conds: &[&ConditioningBundle],
    t: &[usize],
    noise: &Tensor,
    null: &[bool],
    weighting: LossWeighting,
) -> Result<Tensor> {
    let (b, _, _) = x0.dims3()?;
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if noise.dims() != x0.dims() {
        return Err(Error::shape("noise", format!("{:?}", x0.dims()), format!("{:?}", noise.dims())));
    }
    if t.len() != b || conds.len() != b || null.len() != b {
        return Err(Error::shape("batch", b.to_string(), "mismatched timesteps, bundles or flags"));
    }
    for &ti in t {
        schedule.check_step(ti)?;
    }
    let dtype = x0.dtype();
    let a: Vec<f64> = t.iter().map(|&ti| schedule.alpha_bar(ti).sqrt()).collect();
    let s: Vec<f64> = t.iter().map(|&ti| (1.0 - schedule.alpha_bar(ti)).sqrt()).collect();
    let a = Tensor::from_vec(a, (b, 1, 1), &Device::Cpu)?.to_dtype(dtype)?;
    let s = Tensor::from_vec(s, (b, 1, 1), &Device::Cpu)?.to_dtype(dtype)?;
    let x_t = (x0.broadcast_mul(&a)? + noise.broadcast_mul(&s)?)?;
    let nulls: Vec<ConditioningBundle> = conds
        .iter()
        .zip(null)
        .map(|(c, &n)| if n { c.to_null() } else { (*c).clone() })
        .collect();
    let refs: Vec<&ConditioningBundle> = nulls.iter().collect();
    let model_t: Vec<usize> = t.iter().map(|&ti| schedule.model_timestep(ti)).collect();
    let pred = model.predict_x0_tensor(&x_t, &model_t, &refs)?;
    let per_item = (x0 - pred)?.sqr()?.flatten_from(1)?.mean(1)?;
    if weighting == LossWeighting::Uniform {
        return Ok(per_item.mean_all()?);
    }
    let w: Vec<f64> = t.iter().map(|&ti| weighting.weight(schedule, ti)).collect();
    let w = Tensor::from_vec(w, b, &Device::Cpu)?.to_dtype(dtype)?;
    Ok((per_item * w)?.mean_all()?)
}

/// [`training_loss_with`] with `t ~ U{1..T}`, standard-normal noise and
/// condition dropout with probability `p_uncond`, all drawn from `rng`.
pub fn training_loss<P: TensorX0Predictor + ?Sized>(
    model: &P,
    schedule: &NoiseSchedule,
    x0: &Tensor,
    conds: &[&ConditioningBundle],
    p_uncond: f64,
    weighting: LossWeighting,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&p_uncond) {
        return Err(Error::InvalidArgument(format!("p_uncond must be in [0, 1], got {p_uncond}")));
    }
    let b = x0.dim(0)?;
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let t: Vec<usize> = (0..b).map(|_| rng.random_range(1..=schedule.steps())).collect();
    let null: Vec<bool> = (0..b).map(|_| rng.random::<f64>() < p_uncond).collect();
    let noise = normal_tensor(rng, x0.dims(), model.dtype())?;
    training_loss_with(model, schedule, x0, conds, &t, &noise, &null, weighting)
}

/// One latent sequence with its conditioning.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub latents: LatentSequence,
    pub cond: ConditioningBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Training crop length in latent frames.
    pub window: usize,
    pub p_uncond: f64,
    pub weighting: LossWeighting,
    /// Learning rate at the last epoch as a fraction of `lr` (cosine decay).
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            epochs: 3000,
            batch_size: 16,
            window: 90,
            p_uncond: 0.1,
            weighting: LossWeighting::default(),
            final_lr_fraction: 1.0,
            seed: 0,
        }
    }
}

impl DiffusionTrainConfig {
    fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr;
        }
        let progress = epoch as f64 / (self.epochs - 1) as f64;
        let f = self.final_lr_fraction;
        self.lr * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEpoch {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct DiffusionTraining {
    pub model: DiffusionModel,
    pub history: Vec<DiffusionEpoch>,
    pub diverged_at: Option<usize>,
}

/// Trains a fresh denoiser; latent statistics come from `examples`.
pub fn train_diffusion(denoiser: Denoiser, examples: &[TrainingExample], config: &DiffusionTrainConfig) -> Result<DiffusionTraining> {
    let stats = LatentStats::from_latents(examples.iter().map(|e| &e.latents))?;
    train_diffusion_from(DiffusionModel { denoiser, stats }, examples, config)
}

/// Continues training, keeping the model's latent statistics.
pub fn train_diffusion_from(
    model: DiffusionModel,
    examples: &[TrainingExample],
    config: &DiffusionTrainConfig,
) -> Result<DiffusionTraining> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if config.batch_size == 0 || config.window == 0 || !(config.lr > 0.0) {
        return Err(Error::InvalidArgument("batch_size, window and lr must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.p_uncond) {
        return Err(Error::InvalidArgument(format!("p_uncond must be in [0, 1], got {}", config.p_uncond)));
    }
    let dz = model.denoiser.latent_dim();
    let mut standardized = Vec::with_capacity(examples.len());
    for (i, e) in examples.iter().enumerate() {
        if e.latents.len() < config.window {
            return Err(Error::TooShort(format!(
                "example {i} has {} latent frames, window is {}",
                e.latents.len(),
                config.window
            )));
        }
        if e.cond.len() != e.latents.len() {
            return Err(Error::shape("conditioning length", e.latents.len().to_string(), e.cond.len().to_string()));
        }
        standardized.push(model.stats.standardize(&e.latents)?);
    }

    let DiffusionModel { denoiser, stats } = model;
    let schedule = denoiser.schedule().clone();
    let dtype = denoiser.dtype();
    let mut rng = seeded(config.seed, stream::TRAIN);
    let mut opt = AdamW::new(
        denoiser.store().vars(),
        ParamsAdamW {
            lr: config.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut last_good = denoiser.store().deep_clone()?;
    let mut history = Vec::with_capacity(config.epochs);
    let w = config.window;

    for epoch in 0..config.epochs {
        opt.set_learning_rate(config.lr_at(epoch));
        let order = permutation(&mut rng, examples.len());
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let mut buf = Vec::with_capacity(chunk.len() * w * dz);
            let mut conds = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let start = rng.random_range(0..=examples[i].latents.len() - w);
                buf.extend_from_slice(&standardized[i][start * dz..(start + w) * dz]);
                conds.push(examples[i].cond.slice(start, start + w)?);
            }
            let x0 = Tensor::from_vec(buf, (chunk.len(), w, dz), &Device::Cpu)?.to_dtype(dtype)?;
            let refs: Vec<&ConditioningBundle> = conds.iter().collect();
            let loss = training_loss(&denoiser, &schedule, &x0, &refs, config.p_uncond, config.weighting, &mut rng)?;
            let lv = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !lv.is_finite() {
                log::warn!("diffusion loss became non-finite at epoch {epoch}; restoring last good parameters");
                let denoiser = Denoiser::from_store(denoiser.config().clone(), schedule, last_good, config.seed)?;
                return Ok(DiffusionTraining {
                    model: DiffusionModel { denoiser, stats },
                    history,
                    diverged_at: Some(epoch),
                });
            }
            opt.backward_step(&loss)?;
            sum += lv;
            batches += 1;
        }
        let record = DiffusionEpoch {
            epoch,
            loss: sum / batches.max(1) as f64,
        };
        if epoch % 50 == 0 || epoch + 1 == config.epochs {
            log::info!("diffusion epoch {epoch}: loss {:.5}", record.loss);
        }
        history.push(record);
        last_good = denoiser.store().deep_clone()?;
    }
    Ok(DiffusionTraining {
        model: DiffusionModel { denoiser, stats },
        history,
        diverged_at: None,
    })
}
