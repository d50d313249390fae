use candle_core::{DType, Device, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConditioningBundle, NoiseSchedule};
use crate::error::{Error, Result};
use crate::nn::{sinusoidal_embedding, Attention, Init, LayerNorm, Linear, ParamStore};
use crate::rng::{seeded, stream};

/// Shape of the transformer denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserConfig {
    pub latent_dim: usize,
    pub model_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    /// Audio feature width; 0 disables cross-attention.
    pub audio_dim: usize,
    pub speakers: usize,
}

impl DenoiserConfig {
    pub fn new(latent_dim: usize, audio_dim: usize, speakers: usize) -> Self {
        Self {
            latent_dim,
            model_dim: 128,
            layers: 4,
            heads: 4,
            ff_dim: 256,
            audio_dim,
            speakers,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.model_dim == 0 || self.heads == 0 || self.ff_dim == 0 {
            return Err(Error::InvalidArgument("denoiser dimensions must be positive".into()));
        }
        if self.model_dim % self.heads != 0 || self.model_dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "model_dim {} must be even and divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if self.speakers == 0 {
            return Err(Error::InvalidArgument("need at least one speaker".into()));
        }
        Ok(())
    }
}

/// Predicts clean latents from noisy ones. `x_t` holds `conds.len()`
/// sequences of `len` frames of `latent_dim` values, row-major; `t` is the
/// model timestep shared by the whole batch.
pub trait X0Predictor {
    fn latent_dim(&self) -> usize;

    fn predict_x0(&self, x_t: &[f64], len: usize, t: usize, conds: &[&ConditioningBundle]) -> Result<Vec<f64>>;
}

/// Differentiable form of [`X0Predictor`] used by the training loss.
pub trait TensorX0Predictor {
    fn dtype(&self) -> DType;

    /// `x_t: (B, L, D)`, one timestep and one bundle per batch element.
    fn predict_x0_tensor(&self, x_t: &Tensor, t: &[usize], conds: &[&ConditioningBundle]) -> Result<Tensor>;
}

#[derive(Debug, Clone)]
struct Block {
    ln1: LayerNorm,
    self_attn: Attention,
    ln2: Option<LayerNorm>,
    cross_attn: Option<Attention>,
    ln3: LayerNorm,
    ff_in: Linear,
    ff_out: Linear,
    cond: Linear,
}

/// Pre-LN transformer over latent frames. Timestep and speaker embeddings
/// are summed into a condition vector added before every block; audio
/// features enter by cross-attention.
///
/// The output is `sqrt(abar_t) * x_t + sqrt(1 - abar_t) * F(x_t, t, c)`,
/// which is the optimal linear estimate of unit-variance data plus a learned
/// correction.
#[derive(Debug, Clone)]
pub struct Denoiser {
    config: DenoiserConfig,
    schedule: NoiseSchedule,
    store: ParamStore,
    in_proj: Linear,
    time_a: Linear,
    time_b: Linear,
    speaker_table: Tensor,
    audio_proj: Option<Linear>,
    blocks: Vec<Block>,
    ln_out: LayerNorm,
    out_proj: Linear,
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, schedule: NoiseSchedule, dtype: DType, seed: u64) -> Result<Self> {
        Self::from_store(config, schedule, ParamStore::new(dtype), seed)
    }

    /// Builds the network around `store`, initializing only missing entries.
    pub fn from_store(config: DenoiserConfig, schedule: NoiseSchedule, mut store: ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed, stream::INIT);
        let d = config.model_dim;
        let s = &mut store;
        let r = &mut rng;
        let in_proj = Linear::new(s, "in_proj", config.latent_dim, d, r)?;
        let time_a = Linear::new(s, "time.a", d, d, r)?;
        let time_b = Linear::new(s, "time.b", d, d, r)?;
        let speaker_table = s.get_or_init("speaker_table", &[config.speakers + 1, d], Init::Normal(0.02), r)?;
        let audio_proj = if config.audio_dim > 0 {
            Some(Linear::new(s, "audio_proj", config.audio_dim, d, r)?)
        } else {
            None
        };
        let mut blocks = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            let p = format!("block{i}");
            let with_audio = config.audio_dim > 0;
            blocks.push(Block {
                ln1: LayerNorm::new(s, &format!("{p}.ln1"), d, r)?,
                self_attn: Attention::new(s, &format!("{p}.self"), d, d, config.heads, r)?,
                ln2: if with_audio {
                    Some(LayerNorm::new(s, &format!("{p}.ln2"), d, r)?)
                } else {
                    None
                },
                cross_attn: if with_audio {
                    Some(Attention::new(s, &format!("{p}.cross"), d, d, config.heads, r)?)
                } else {
                    None
                },
                ln3: LayerNorm::new(s, &format!("{p}.ln3"), d, r)?,
                ff_in: Linear::new(s, &format!("{p}.ff_in"), d, config.ff_dim, r)?,
                ff_out: Linear::new(s, &format!("{p}.ff_out"), config.ff_dim, d, r)?,
                cond: Linear::new(s, &format!("{p}.cond"), d, d, r)?,
            });
        }
        let ln_out = LayerNorm::new(s, "ln_out", d, r)?;
        let out_proj = Linear::new(s, "out_proj", d, config.latent_dim, r)?;
        Ok(Self {
            config,
            schedule,
            store,
            in_proj,
            time_a,
            time_b,
            speaker_table,
            audio_proj,
            blocks,
            ln_out,
            out_proj,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn parameter_count(&self) -> usize {
        self.store.parameter_count()
    }

    fn check_conds(&self, len: usize, conds: &[&ConditioningBundle]) -> Result<()> {
        for c in conds {
            if c.len() != len {
                return Err(Error::shape("conditioning length", len.to_string(), c.len().to_string()));
            }
            if c.audio_dim() != self.config.audio_dim {
                return Err(Error::shape(
                    "audio feature width",
                    self.config.audio_dim.to_string(),
                    c.audio_dim().to_string(),
                ));
            }
            if !c.is_null() && c.speaker() >= self.config.speakers {
                return Err(Error::InvalidArgument(format!(
                    "speaker {} outside vocabulary of {}",
                    c.speaker(),
                    self.config.speakers
                )));
            }
        }
        Ok(())
    }

    fn forward(&self, x_t: &Tensor, t: &[usize], conds: &[&ConditioningBundle]) -> Result<Tensor> {
        let (b, l, dz) = x_t.dims3()?;
        if dz != self.config.latent_dim {
            return Err(Error::shape("latent width", self.config.latent_dim.to_string(), dz.to_string()));
        }
        if t.len() != b || conds.len() != b {
            return Err(Error::shape(
                "batch",
                b.to_string(),
                format!("{} timesteps, {} bundles", t.len(), conds.len()),
            ));
        }
        for &ti in t {
            self.schedule.check_step(ti)?;
        }
        self.check_conds(l, conds)?;
        let dtype = self.store.dtype();
        let dev = Device::Cpu;
        let d = self.config.model_dim;

        let pos = sinusoidal_embedding(&(0..l).map(|i| i as f64).collect::<Vec<_>>(), d, dtype, &dev)?;
        let mut h = self.in_proj.forward(x_t)?.broadcast_add(&pos)?;

        let tpos: Vec<f64> = t.iter().map(|&ti| ti as f64).collect();
        let temb = sinusoidal_embedding(&tpos, d, dtype, &dev)?;
        let temb = self.time_b.forward(&self.time_a.forward(&temb)?.silu()?)?;
        let spk: Vec<u32> = conds
            .iter()
            .map(|c| if c.is_null() { self.config.speakers } else { c.speaker() } as u32)
            .collect();
        let spk = self.speaker_table.index_select(&Tensor::from_vec(spk, b, &dev)?, 0)?;
        let cond = (temb + spk)?.silu()?.unsqueeze(1)?;

        let audio = match &self.audio_proj {
            Some(proj) => {
                let a = self.config.audio_dim;
                let mut buf = Vec::with_capacity(b * l * a);
                for c in conds {
                    if c.is_null() {
                        buf.extend(std::iter::repeat_n(0.0f32, l * a));
                    } else {
                        buf.extend_from_slice(c.audio());
                    }
                }
                let raw = Tensor::from_vec(buf, (b, l, a), &dev)?.to_dtype(dtype)?;
                Some(proj.forward(&raw)?.broadcast_add(&pos)?)
            }
            None => None,
        };

        for block in &self.blocks {
            h = h.broadcast_add(&block.cond.forward(&cond)?)?;
            let n = block.ln1.forward(&h)?;
            h = (&h + block.self_attn.forward(&n, &n)?)?;
            if let (Some(ln), Some(attn), Some(a)) = (&block.ln2, &block.cross_attn, &audio) {
                let n = ln.forward(&h)?;
                h = (&h + attn.forward(&n, a)?)?;
            }
            let n = block.ln3.forward(&h)?;
            h = (&h + block.ff_out.forward(&block.ff_in.forward(&n)?.silu()?)?)?;
        }
        let f = self.out_proj.forward(&self.ln_out.forward(&h)?)?;

        let skip: Vec<f64> = t.iter().map(|&ti| self.schedule.alpha_bar(ti).sqrt()).collect();
        let out: Vec<f64> = t.iter().map(|&ti| (1.0 - self.schedule.alpha_bar(ti)).sqrt()).collect();
        let skip = Tensor::from_vec(skip, (b, 1, 1), &dev)?.to_dtype(dtype)?;
        let out = Tensor::from_vec(out, (b, 1, 1), &dev)?.to_dtype(dtype)?;
        Ok((x_t.broadcast_mul(&skip)? + f.broadcast_mul(&out)?)?)
    }
}

impl TensorX0Predictor for Denoiser {
    fn dtype(&self) -> DType {
        self.store.dtype()
    }

    fn predict_x0_tensor(&self, x_t: &Tensor, t: &[usize], conds: &[&ConditioningBundle]) -> Result<Tensor> {
        self.forward(x_t, t, conds)
    }
}

impl X0Predictor for Denoiser {
    fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn predict_x0(&self, x_t: &[f64], len: usize, t: usize, conds: &[&ConditioningBundle]) -> Result<Vec<f64>> {
        let b = conds.len();
        let dz = self.config.latent_dim;
        if x_t.len() != b * len * dz {
            return Err(Error::shape(
                "noisy latents",
                format!("{b} x {len} x {dz}"),
                format!("{} values", x_t.len()),
            ));
        }
        let x = Tensor::from_slice(x_t, (b, len, dz), &Device::Cpu)?.to_dtype(self.store.dtype())?;
        let y = self.forward(&x, &vec![t; b], conds)?;
        Ok(y.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?)
    }
}

/// Draws an `f64` standard-normal tensor of the given shape.
pub fn normal_tensor(rng: &mut impl Rng, shape: &[usize], dtype: DType) -> Result<Tensor> {
    let n = shape.iter().product();
    let v = crate::rng::normal_f64(rng, n);
    Ok(Tensor::from_vec(v, shape, &Device::Cpu)?.to_dtype(dtype)?)
}
