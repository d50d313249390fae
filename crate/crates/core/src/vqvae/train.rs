use candle_core::{DType, Device, Tensor};
use candle_nn::optim::{AdamW, Optimizer, ParamsAdamW};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{nearest_code, recon_loss_tensor, VqLossWeights, VqvaeArch, VqvaeModel, DOWNSAMPLE};
use crate::diffusion::normal_tensor;
use crate::error::{Error, Result};
use crate::motion::{MotionClip, TRAINING_FPS};
use crate::rng::{permutation, seeded, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqvaeTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    /// Training window length in frames; a multiple of 4.
    pub window_frames: usize,
    pub velocity_weight: f64,
    pub acceleration_weight: f64,
    /// Weight of the reconstruction term computed from un-quantized latents.
    pub continuous_recon_weight: f64,
    /// Gaussian noise added to the un-quantized latents before decoding, in
    /// units of the batch's per-dimension latent std.
    pub latent_noise: f64,
    /// Learning rate at the last epoch as a fraction of `lr` (cosine decay).
    pub final_lr_fraction: f64,
    pub reseed_dead_codes: bool,
    pub seed: u64,
}

impl Default for VqvaeTrainConfig {
    fn default() -> Self {
        Self {
            lr: 3e-3,
            epochs: 150,
            batch_size: 16,
            window_frames: 120,
            velocity_weight: 1.0,
            acceleration_weight: 1.0,
            continuous_recon_weight: 1.0,
            latent_noise: 1.0,
            final_lr_fraction: 0.05,
            reseed_dead_codes: true,
            seed: 0,
        }
    }
}

impl VqvaeTrainConfig {
    pub fn weights(&self) -> VqLossWeights {
        VqLossWeights {
            velocity: self.velocity_weight,
            acceleration: self.acceleration_weight,
        }
    }

    fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        if self.window_frames < 3 || self.window_frames % DOWNSAMPLE != 0 {
            return Err(Error::InvalidArgument(format!(
                "window_frames must be a multiple of {DOWNSAMPLE} and at least 4, got {}",
                self.window_frames
            )));
        }
        if !(self.latent_noise >= 0.0) {
            return Err(Error::InvalidArgument("latent_noise must be non-negative".into()));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidArgument("batch_size and lr must be positive".into()));
        }
        Ok(())
    }

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
pub struct VqvaeEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub recon: f64,
    pub quantization: f64,
    pub codes_used: usize,
}

#[derive(Debug, Clone)]
pub struct VqvaeTraining {
    pub model: VqvaeModel,
    pub history: Vec<VqvaeEpoch>,
    /// Epoch at which the loss became non-finite; `model` is then the last
    /// good state.
    pub diverged_at: Option<usize>,
}

fn windows(dataset: &[MotionClip], window: usize) -> Vec<Vec<f32>> {
    let mut out = Vec::new();
    for clip in dataset {
        let w = clip.frame_width();
        let mut frames: Vec<f32> = clip.data().iter().map(|&x| x as f32).collect();
        let last = clip.frame(clip.len() - 1);
        while frames.len() < window * w {
            frames.extend(last.iter().map(|&x| x as f32));
        }
        let len = frames.len() / w;
        let mut start = 0;
        loop {
            let s = start.min(len - window);
            out.push(frames[s * w..(s + window) * w].to_vec());
            if s + window >= len {
                break;
            }
            start += window;
        }
    }
    out
}

pub fn train_vqvae(dataset: &[MotionClip], arch: VqvaeArch, config: &VqvaeTrainConfig) -> Result<VqvaeTraining> {
    let skeleton = dataset
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty training set".into()))?
        .skeleton()
        .clone();
    let model = VqvaeModel::new(arch, skeleton, config.seed)?;
    train_vqvae_from(model, dataset, config, true)
}

/// Continues training `model`. With `init_codebook`, the codebook is first
/// reset to randomly chosen encoder outputs.
pub fn train_vqvae_from(
    mut model: VqvaeModel,
    dataset: &[MotionClip],
    config: &VqvaeTrainConfig,
    init_codebook: bool,
) -> Result<VqvaeTraining> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    for (i, c) in dataset.iter().enumerate() {
        if c.skeleton() != model.skeleton() {
            return Err(Error::InvalidArgument(format!("clip {i} uses a different skeleton")));
        }
        if (c.fps() - TRAINING_FPS).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "clip {i} is {} fps, expected {TRAINING_FPS}",
                c.fps()
            )));
        }
    }
    let arch = model.arch().clone();
    let dtype = model.store().dtype();
    let d = arch.latent_dim;
    let n_codes = arch.codebook_size;
    let width = arch.joints * crate::motion::ROT_DIM;
    let lz = config.window_frames / DOWNSAMPLE;
    let data = windows(dataset, config.window_frames);
    let mut rng = seeded(config.seed, stream::TRAIN);
    let weights = config.weights();

    let batch_tensor = |idx: &[usize]| -> Result<Tensor> {
        let mut buf = Vec::with_capacity(idx.len() * config.window_frames * width);
        for &i in idx {
            buf.extend_from_slice(&data[i]);
        }
        Ok(Tensor::from_vec(buf, (idx.len(), config.window_frames, width), &Device::Cpu)?.to_dtype(dtype)?)
    };
    let encode_rows = |model: &VqvaeModel, x: &Tensor| -> Result<Vec<f32>> {
        let b = x.dim(0)?;
        let z = model.encode_tensor(&x.reshape((b, lz, arch.patch_dim()))?)?;
        Ok(z.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?)
    };

    if init_codebook {
        let take: Vec<usize> = permutation(&mut rng, data.len())
            .into_iter()
            .take(n_codes.div_ceil(lz).max(1))
            .collect();
        let rows = encode_rows(&model, &batch_tensor(&take)?)?;
        let avail = rows.len() / d;
        let picks = permutation(&mut rng, avail);
        let init: Vec<(usize, Vec<f32>)> = (0..n_codes)
            .map(|k| {
                let r = picks[k % avail];
                let mut v = rows[r * d..(r + 1) * d].to_vec();
                if k >= avail {
                    for x in &mut v {
                        *x += 0.01 * rng.random_range(-1.0f32..1.0);
                    }
                }
                (k, v)
            })
            .collect();
        model.set_codebook_rows(&init)?;
    }

    let mut opt = AdamW::new(
        model.store().vars(),
        ParamsAdamW {
            lr: config.lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut last_good = model.store().deep_clone()?;

    for epoch in 0..config.epochs {
        opt.set_learning_rate(config.lr_at(epoch));
        let order = permutation(&mut rng, data.len());
        let mut usage = vec![0usize; n_codes];
        let (mut sum_loss, mut sum_recon, mut sum_quant, mut batches) = (0.0, 0.0, 0.0, 0usize);
        let mut last_rows: Vec<f32> = Vec::new();
        let mut failed = false;

        for chunk in order.chunks(config.batch_size) {
            let b = chunk.len();
            let frames = batch_tensor(chunk)?;
            let patches = frames.reshape((b, lz, arch.patch_dim()))?;
            let e = model.encode_tensor(&patches)?;
            let rows = e.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
            let cb = model.codebook()?;
            let mut tokens = Vec::with_capacity(b * lz);
            for r in rows.chunks_exact(d) {
                let t = nearest_code(r, cb.entries(), d)?;
                usage[t] += 1;
                tokens.push(t as u32);
            }
            last_rows = rows;
            let idx = Tensor::from_vec(tokens, b * lz, &Device::Cpu)?;
            let q = model.codebook_tensor().index_select(&idx, 0)?.reshape((b, lz, d))?;
            let q_st = (&e + (&q - &e)?.detach())?;
            let recon_q = model.decode_tensor(&q_st)?.reshape((b, config.window_frames, width))?;
            let mut recon = recon_loss_tensor(&recon_q, &frames, weights)?;
            if config.continuous_recon_weight > 0.0 {
                let input = if config.latent_noise > 0.0 {
                    let flat = e.detach().reshape((b * lz, d))?;
                    let centered = flat.broadcast_sub(&flat.mean_keepdim(0)?)?;
                    let std = centered.sqr()?.mean_keepdim(0)?.sqrt()?.reshape((1, 1, d))?;
                    let noise = normal_tensor(&mut rng, &[b, lz, d], dtype)?;
                    (&e + noise.broadcast_mul(&(std * config.latent_noise)?)?)?
                } else {
                    e.clone()
                };
                let recon_c = model.decode_tensor(&input)?.reshape((b, config.window_frames, width))?;
                recon = (recon
                    + (recon_loss_tensor(&recon_c, &frames, weights)? * config.continuous_recon_weight)?)?;
            }
            let codebook_term = (e.detach() - &q)?.sqr()?.mean_all()?;
            let commit_term = (&e - q.detach())?.sqr()?.mean_all()?;
            let quant = (codebook_term + commit_term)?;
            let loss = (&recon + &quant)?;
            let lv = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !lv.is_finite() {
                failed = true;
                break;
            }
            opt.backward_step(&loss)?;
            sum_loss += lv;
            sum_recon += recon.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            sum_quant += quant.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            batches += 1;
        }

        if failed {
            log::warn!("vqvae loss became non-finite at epoch {epoch}; restoring last good parameters");
            let model = VqvaeModel::from_store(arch.clone(), model.skeleton().clone(), last_good, config.seed)?;
            return Ok(VqvaeTraining {
                model,
                history,
                diverged_at: Some(epoch),
            });
        }

        let codes_used = usage.iter().filter(|&&u| u > 0).count();
        if config.reseed_dead_codes && codes_used < n_codes && !last_rows.is_empty() {
            let avail = last_rows.len() / d;
            let dead: Vec<(usize, Vec<f32>)> = usage
                .iter()
                .enumerate()
                .filter(|(_, &u)| u == 0)
                .map(|(k, _)| {
                    let r = rng.random_range(0..avail);
                    (k, last_rows[r * d..(r + 1) * d].to_vec())
                })
                .collect();
            model.set_codebook_rows(&dead)?;
        }

        let n = batches.max(1) as f64;
        let record = VqvaeEpoch {
            epoch,
            loss: sum_loss / n,
            recon: sum_recon / n,
            quantization: sum_quant / n,
            codes_used,
        };
        if epoch % 10 == 0 || epoch + 1 == config.epochs {
            log::info!(
                "vqvae epoch {epoch}: loss {:.5} recon {:.5} quant {:.5} codes {codes_used}",
                record.loss,
                record.recon,
                record.quantization
            );
        }
        history.push(record);
        last_good = model.store().deep_clone()?;
    }

    Ok(VqvaeTraining {
        model,
        history,
        diverged_at: None,
    })
}
