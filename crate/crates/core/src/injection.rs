//! Reverse diffusion with semantic injection: during the early reverse
//! steps, latent frames marked by the timeline mask are overwritten with a
//! candidate gesture embedding; the final `K` steps denoise freely.

use serde::{Deserialize, Serialize};

use crate::diffusion::{
    guided_x0, initial_state, q_sample, run_chain, ConditioningBundle, NoiseSchedule, SamplerConfig, X0Predictor,
};
use crate::error::{Error, Result};
use crate::rng::{normal_f64, seeded, stream, SeededRng};
use crate::semantic::perturb_embedding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectionConfig {
    /// `K = round(k_fraction * T)`; injection runs while `t > K`.
    pub k_fraction: f64,
    /// Candidate perturbation in units of the per-dimension latent std.
    pub sigma_perturb: f64,
    /// Forward-noise the candidate to the current level before blending.
    pub noise_matching: bool,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            k_fraction: 0.25,
            sigma_perturb: 0.05,
            noise_matching: true,
        }
    }
}

/// Mask and candidate latents for one sequence, in standardized units.
/// `mask[i] = 1` keeps generated frame `i`; `0` injects `candidates` there.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionTarget {
    pub mask: Vec<u8>,
    pub candidates: Vec<f64>,
}

impl InjectionTarget {
    /// A target that never injects.
    pub fn empty(len: usize, dim: usize) -> Self {
        Self {
            mask: vec![1; len],
            candidates: vec![0.0; len * dim],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mask.iter().all(|&m| m == 1)
    }

    fn validate(&self, len: usize, dim: usize) -> Result<()> {
        if self.mask.len() != len || self.candidates.len() != len * dim {
            return Err(Error::shape(
                "injection target",
                format!("mask {len}, candidates {}", len * dim),
                format!("mask {}, candidates {}", self.mask.len(), self.candidates.len()),
            ));
        }
        if self.mask.iter().any(|&m| m > 1) {
            return Err(Error::InvalidArgument("mask values must be 0 or 1".into()));
        }
        Ok(())
    }
}

/// `K = round(fraction * T)` clamped to `[1, T]`.
pub fn choose_k(schedule: &NoiseSchedule, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("K fraction must be in (0, 1], got {fraction}")));
    }
    let t = schedule.steps();
    Ok(((fraction * t as f64).round() as usize).clamp(1, t))
}

/// `x_t * m + G * (1 - m)` per latent frame. With `noise_matching`, `G` is
/// the candidate noised to level `t` with `noise`; otherwise the raw
/// candidate.
pub fn inject(
    x_t: &[f64],
    t: usize,
    mask: &[u8],
    candidates: &[f64],
    schedule: &NoiseSchedule,
    noise_matching: bool,
    noise: &[f64],
) -> Result<Vec<f64>> {
    let len = mask.len();
    if len == 0 || x_t.len() % len != 0 || candidates.len() != x_t.len() {
        return Err(Error::shape(
            "injection inputs",
            format!("{} values", x_t.len()),
            format!("mask {len}, candidates {}", candidates.len()),
        ));
    }
    let dim = x_t.len() / len;
    let g = if noise_matching {
        q_sample(candidates, t, noise, schedule)?
    } else {
        candidates.to_vec()
    };
    let mut out = x_t.to_vec();
    for (f, &m) in mask.iter().enumerate() {
        match m {
            1 => {}
            0 => out[f * dim..(f + 1) * dim].copy_from_slice(&g[f * dim..(f + 1) * dim]),
            _ => return Err(Error::InvalidArgument("mask values must be 0 or 1".into())),
        }
    }
    Ok(out)
}

/// Per-sequence state for the injection hook.
pub(crate) struct Injector {
    targets: Vec<InjectionTarget>,
    rngs: Vec<SeededRng>,
    k: usize,
    noise_matching: bool,
    per: usize,
}

impl Injector {
    /// Perturbs each target's candidates once with its own stream.
    pub(crate) fn new(
        targets: &[&InjectionTarget],
        seeds: &[u64],
        len: usize,
        dim: usize,
        schedule: &NoiseSchedule,
        config: &InjectionConfig,
    ) -> Result<Self> {
        if targets.len() != seeds.len() {
            return Err(Error::shape("injection targets", seeds.len().to_string(), targets.len().to_string()));
        }
        if config.sigma_perturb < 0.0 {
            return Err(Error::InvalidArgument("sigma_perturb must be non-negative".into()));
        }
        let k = choose_k(schedule, config.k_fraction)?;
        let mut owned = Vec::with_capacity(targets.len());
        for (tg, &seed) in targets.iter().zip(seeds) {
            tg.validate(len, dim)?;
            let mut tg = (*tg).clone();
            if !tg.is_empty() {
                tg.candidates = perturb_embedding(&tg.candidates, config.sigma_perturb, seed)?;
            }
            owned.push(tg);
        }
        Ok(Self {
            targets: owned,
            rngs: seeds.iter().map(|&s| seeded(s, stream::INJECT)).collect(),
            k,
            noise_matching: config.noise_matching,
            per: len * dim,
        })
    }

    /// Applies injection to the state just produced by the step at `t`.
    pub(crate) fn after_step(&mut self, x: &mut [f64], t: usize, schedule: &NoiseSchedule) -> Result<()> {
        if t <= self.k {
            return Ok(());
        }
        let level = t - 1;
        for (i, tg) in self.targets.iter().enumerate() {
            if tg.is_empty() {
                continue;
            }
            let seq = &mut x[i * self.per..(i + 1) * self.per];
            let noise = if self.noise_matching {
                normal_f64(&mut self.rngs[i], self.per)
            } else {
                Vec::new()
            };
            let out = inject(seq, level, &tg.mask, &tg.candidates, schedule, self.noise_matching, &noise)?;
            seq.copy_from_slice(&out);
        }
        Ok(())
    }
}

/// Batched sampling with one injection target and seed per sequence.
/// Sequences whose target is empty follow exactly the plain sampler.
#[allow(clippy::too_many_arguments)]
pub fn sample_with_injection_batch<P: X0Predictor + ?Sized>(
    model: &P,
    conds: &[&ConditioningBundle],
    len: usize,
    targets: &[&InjectionTarget],
    schedule: &NoiseSchedule,
    sampler: &SamplerConfig,
    config: &InjectionConfig,
    seeds: &[u64],
) -> Result<Vec<Vec<f64>>> {
    if len == 0 {
        return Err(Error::InvalidArgument("latent length must be at least 1".into()));
    }
    if conds.len() != seeds.len() {
        return Err(Error::shape("seeds", conds.len().to_string(), seeds.len().to_string()));
    }
    let dim = model.latent_dim();
    let mut injector = Injector::new(targets, seeds, len, dim, schedule, config)?;
    let (x, mut rngs) = initial_state(seeds, len * dim);
    let out = run_chain(
        schedule,
        x,
        sampler.variance,
        &mut rngs,
        |x, t| guided_x0(model, x, len, t, conds, schedule, sampler),
        |x, t| injector.after_step(x, t, schedule),
    )?;
    Ok(out.chunks(len * dim).map(|c| c.to_vec()).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn sample_with_injection<P: X0Predictor + ?Sized>(
    model: &P,
    cond: &ConditioningBundle,
    len: usize,
    target: &InjectionTarget,
    schedule: &NoiseSchedule,
    sampler: &SamplerConfig,
    config: &InjectionConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(sample_with_injection_batch(model, &[cond], len, &[target], schedule, sampler, config, &[seed])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{make_linear_schedule, sample};
    use crate::rng::normal_f64;

    /// Shrinks its input toward zero.
    struct Shrink;

    impl X0Predictor for Shrink {
        fn latent_dim(&self) -> usize {
            2
        }
        fn predict_x0(&self, x: &[f64], _: usize, _: usize, _: &[&ConditioningBundle]) -> Result<Vec<f64>> {
            Ok(x.iter().map(|v| 0.5 * v).collect())
        }
    }

    #[test]
    fn choose_k_cases() {
        let s = NoiseSchedule::default_linear();
        assert_eq!(choose_k(&s, 1.0).unwrap(), 1000);
        assert_eq!(choose_k(&s, 0.25).unwrap(), 250);
        let two = make_linear_schedule(2, 1e-4, 0.02).unwrap();
        assert_eq!(choose_k(&two, 0.25).unwrap(), 1);
        assert!(choose_k(&s, 0.0).is_err());
        assert!(choose_k(&s, 1.5).is_err());
    }

    #[test]
    fn degenerate_masks() {
        let s = NoiseSchedule::default_linear();
        let mut rng = seeded(0, 0);
        let x = normal_f64(&mut rng, 6);
        let g = normal_f64(&mut rng, 6);
        let n = normal_f64(&mut rng, 6);
        assert_eq!(inject(&x, 500, &[1, 1, 1], &g, &s, true, &n).unwrap(), x);
        assert_eq!(inject(&x, 500, &[0, 0, 0], &g, &s, false, &[]).unwrap(), g);
    }

    #[test]
    fn mixed_mask_matches_formula() {
        let s = NoiseSchedule::default_linear();
        let mut rng = seeded(1, 0);
        let x = normal_f64(&mut rng, 8);
        let g = normal_f64(&mut rng, 8);
        let n = normal_f64(&mut rng, 8);
        let m = [1u8, 0, 0, 1];
        let t = 321;
        let got = inject(&x, t, &m, &g, &s, true, &n).unwrap();
        let (a, b) = (s.alpha_bar(t).sqrt(), (1.0 - s.alpha_bar(t)).sqrt());
        for i in 0..8 {
            let mf = m[i / 2] as f64;
            let want = x[i] * mf + (a * g[i] + b * n[i]) * (1.0 - mf);
            assert_eq!(got[i], want);
        }
        assert!(inject(&x, t, &[1, 2, 0, 1], &g, &s, true, &n).is_err());
        assert!(inject(&x, t, &m, &g[..6], &s, true, &n).is_err());
    }

    #[test]
    fn empty_plan_and_full_threshold_reduce_to_plain() {
        let s = make_linear_schedule(40, 1e-4, 0.2).unwrap();
        let c = ConditioningBundle::null(3, 0);
        let sc = SamplerConfig::default();
        let plain = sample(&Shrink, &c, 3, &s, &sc, 9).unwrap();
        let empty = InjectionTarget::empty(3, 2);
        let cfg = InjectionConfig::default();
        assert_eq!(sample_with_injection(&Shrink, &c, 3, &empty, &s, &sc, &cfg, 9).unwrap(), plain);
        let full = InjectionTarget {
            mask: vec![0, 0, 1],
            candidates: vec![1.0; 6],
        };
        let k_t = InjectionConfig {
            k_fraction: 1.0,
            ..cfg.clone()
        };
        assert_eq!(sample_with_injection(&Shrink, &c, 3, &full, &s, &sc, &k_t, 9).unwrap(), plain);
        let injected = sample_with_injection(&Shrink, &c, 3, &full, &s, &sc, &cfg, 9).unwrap();
        assert_ne!(injected, plain);
        assert_eq!(injected, sample_with_injection(&Shrink, &c, 3, &full, &s, &sc, &cfg, 9).unwrap());
    }
}
