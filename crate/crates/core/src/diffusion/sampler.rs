use serde::{Deserialize, Serialize};

use super::{ConditioningBundle, NoiseSchedule, ReverseVariance, X0Predictor};
use crate::error::{Error, Result};
use crate::rng::{normal_f64, seeded, stream, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub guidance_scale: f64,
    pub variance: ReverseVariance,
    /// Predicted clean latents are clipped to `[-c, c]` per dimension.
    pub clip_x0: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            guidance_scale: 2.5,
            variance: ReverseVariance::Posterior,
            clip_x0: Some(4.0),
        }
    }
}

/// `uncond + s * (cond - uncond)`.
pub fn cfg_combine(cond: &[f64], uncond: &[f64], s: f64) -> Result<Vec<f64>> {
    if cond.len() != uncond.len() {
        return Err(Error::shape("guidance inputs", cond.len().to_string(), uncond.len().to_string()));
    }
    Ok(cond.iter().zip(uncond).map(|(&c, &u)| u + s * (c - u)).collect())
}

/// Guided and clipped x0 prediction at chain step `t`.
pub fn guided_x0<P: X0Predictor + ?Sized>(
    model: &P,
    x_t: &[f64],
    len: usize,
    t: usize,
    conds: &[&ConditioningBundle],
    schedule: &NoiseSchedule,
    config: &SamplerConfig,
) -> Result<Vec<f64>> {
    let mt = schedule.model_timestep(t);
    let mut x0 = if config.guidance_scale == 1.0 {
        model.predict_x0(x_t, len, mt, conds)?
    } else {
        let nulls: Vec<ConditioningBundle> = conds.iter().map(|c| c.to_null()).collect();
        let mut all: Vec<&ConditioningBundle> = conds.to_vec();
        all.extend(nulls.iter());
        let mut doubled = Vec::with_capacity(2 * x_t.len());
        doubled.extend_from_slice(x_t);
        doubled.extend_from_slice(x_t);
        let both = model.predict_x0(&doubled, len, mt, &all)?;
        let (c, u) = both.split_at(x_t.len());
        cfg_combine(c, u, config.guidance_scale)?
    };
    if let Some(c) = config.clip_x0 {
        for v in &mut x0 {
            *v = v.clamp(-c, c);
        }
    }
    Ok(x0)
}

/// Posterior step from `x_t` to `x_{t-1}` given a clean estimate. `noise` is
/// ignored at `t = 1`.
pub fn posterior_step(
    schedule: &NoiseSchedule,
    x_t: &[f64],
    x0_hat: &[f64],
    t: usize,
    variance: ReverseVariance,
    noise: &[f64],
) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    if x_t.len() != x0_hat.len() || (t > 1 && noise.len() != x_t.len()) {
        return Err(Error::shape("posterior inputs", x_t.len().to_string(), x0_hat.len().to_string()));
    }
    let (c0, ct, var) = schedule.posterior(t, variance);
    let sd = var.sqrt();
    Ok((0..x_t.len())
        .map(|i| {
            let mean = c0 * x0_hat[i] + ct * x_t[i];
            if t > 1 {
                mean + sd * noise[i]
            } else {
                mean
            }
        })
        .collect())
}

/// One reverse step for a batch; each sequence draws its noise from its own
/// stream in `rngs`.
#[allow(clippy::too_many_arguments)]
pub fn denoise_step<P: X0Predictor + ?Sized>(
    model: &P,
    x_t: &[f64],
    len: usize,
    t: usize,
    conds: &[&ConditioningBundle],
    schedule: &NoiseSchedule,
    config: &SamplerConfig,
    rngs: &mut [SeededRng],
) -> Result<Vec<f64>> {
    let x0 = guided_x0(model, x_t, len, t, conds, schedule, config)?;
    let noise = step_noise(rngs, x_t.len(), t)?;
    posterior_step(schedule, x_t, &x0, t, config.variance, &noise)
}

fn step_noise(rngs: &mut [SeededRng], total: usize, t: usize) -> Result<Vec<f64>> {
    if t == 1 {
        return Ok(Vec::new());
    }
    if rngs.is_empty() || total % rngs.len() != 0 {
        return Err(Error::InvalidArgument("one noise stream per sequence required".into()));
    }
    let per = total / rngs.len();
    let mut out = Vec::with_capacity(total);
    for r in rngs.iter_mut() {
        out.extend(normal_f64(r, per));
    }
    Ok(out)
}

/// Starting noise and step streams for one sequence per seed.
pub fn initial_state(seeds: &[u64], per_sequence: usize) -> (Vec<f64>, Vec<SeededRng>) {
    let mut rngs: Vec<SeededRng> = seeds.iter().map(|&s| seeded(s, stream::SAMPLE)).collect();
    let mut x = Vec::with_capacity(seeds.len() * per_sequence);
    for r in &mut rngs {
        x.extend(normal_f64(r, per_sequence));
    }
    (x, rngs)
}

/// Runs the reverse chain from `x` at step `T` down to step 0.
/// `predict(x_t, t)` returns the clean estimate; `after_step(x_{t-1}, t)`
/// may edit the new state.
pub fn run_chain(
    schedule: &NoiseSchedule,
    mut x: Vec<f64>,
    variance: ReverseVariance,
    rngs: &mut [SeededRng],
    mut predict: impl FnMut(&[f64], usize) -> Result<Vec<f64>>,
    mut after_step: impl FnMut(&mut Vec<f64>, usize) -> Result<()>,
) -> Result<Vec<f64>> {
    for t in (1..=schedule.steps()).rev() {
        let x0 = predict(&x, t)?;
        let noise = step_noise(rngs, x.len(), t)?;
        x = posterior_step(schedule, &x, &x0, t, variance, &noise)?;
        after_step(&mut x, t)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SamplingNaN { step: t });
        }
    }
    Ok(x)
}

/// Samples one standardized latent sequence per seed, all sharing `len`.
/// Sequence `i` uses `conds[i]` and `seeds[i]`.
pub fn sample_batch<P: X0Predictor + ?Sized>(
    model: &P,
    conds: &[&ConditioningBundle],
    len: usize,
    schedule: &NoiseSchedule,
    config: &SamplerConfig,
    seeds: &[u64],
) -> Result<Vec<Vec<f64>>> {
    if len == 0 {
        return Err(Error::InvalidArgument("latent length must be at least 1".into()));
    }
    if conds.len() != seeds.len() {
        return Err(Error::shape("seeds", conds.len().to_string(), seeds.len().to_string()));
    }
    let per = len * model.latent_dim();
    let (x, mut rngs) = initial_state(seeds, per);
    let out = run_chain(
        schedule,
        x,
        config.variance,
        &mut rngs,
        |x, t| guided_x0(model, x, len, t, conds, schedule, config),
        |_, _| Ok(()),
    )?;
    Ok(out.chunks(per).map(|c| c.to_vec()).collect())
}

/// Samples one standardized latent sequence of `len` frames.
pub fn sample<P: X0Predictor + ?Sized>(
    model: &P,
    cond: &ConditioningBundle,
    len: usize,
    schedule: &NoiseSchedule,
    config: &SamplerConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(sample_batch(model, &[cond], len, schedule, config, &[seed])?.remove(0))
}
