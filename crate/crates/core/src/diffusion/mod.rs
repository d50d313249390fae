//! Latent diffusion: the forward noising schedule, a conditional transformer
//! denoiser that predicts clean latents, its training objective with
//! condition dropout, and ancestral sampling with classifier-free guidance.

mod checkpoint;
mod cond;
mod denoiser;
mod sampler;
mod schedule;
mod train;

pub use checkpoint::{DiffusionCheckpoint, PhaseRecord, ScheduleSpec, DIFFUSION_FORMAT, DIFFUSION_VERSION};
pub use cond::ConditioningBundle;
pub use denoiser::{normal_tensor, Denoiser, DenoiserConfig, TensorX0Predictor, X0Predictor};
pub use sampler::{
    cfg_combine, denoise_step, guided_x0, initial_state, posterior_step, run_chain, sample, sample_batch,
    SamplerConfig,
};
pub use schedule::{make_linear_schedule, NoiseSchedule, ReverseVariance};
pub use train::{
    train_diffusion, train_diffusion_from, training_loss, training_loss_with, DiffusionEpoch, DiffusionModel,
    DiffusionTrainConfig, DiffusionTraining, LatentStats, LossWeighting, TrainingExample,
};

use crate::error::{Error, Result};

/// `sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise`.
pub fn q_sample(x0: &[f64], t: usize, noise: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    if noise.len() != x0.len() {
        return Err(Error::shape("noise", x0.len().to_string(), noise.len().to_string()));
    }
    let a = schedule.alpha_bar(t).sqrt();
    let s = (1.0 - schedule.alpha_bar(t)).sqrt();
    Ok(x0.iter().zip(noise).map(|(&x, &n)| a * x + s * n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_noise_scales() {
        let s = NoiseSchedule::default_linear();
        let x = q_sample(&[2.0, -1.0], 300, &[0.0, 0.0], &s).unwrap();
        let a = s.alpha_bar(300).sqrt();
        assert_eq!(x, vec![2.0 * a, -a]);
        assert!(q_sample(&[1.0], 0, &[0.0], &s).is_err());
        assert!(q_sample(&[1.0], 1001, &[0.0], &s).is_err());
        assert!(q_sample(&[1.0], 1, &[0.0, 1.0], &s).is_err());
    }

    #[test]
    fn terminal_marginal_is_standard_normal() {
        let s = NoiseSchedule::default_linear();
        let mut rng = crate::rng::seeded(4, 0);
        let n = 10_000;
        let noise = crate::rng::normal_f64(&mut rng, n);
        let x = q_sample(&vec![3.0; n], 1000, &noise, &s).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let se = 1.0 / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se + 3.0 * s.alpha_bar(1000).sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn linear_in_x0(a in -3.0f64..3.0, b in -3.0f64..3.0, k in -2.0f64..2.0, t in 1usize..=1000, n in -2.0f64..2.0) {
            let s = NoiseSchedule::default_linear();
            let z = q_sample(&[0.0], t, &[n], &s).unwrap()[0];
            let f = |x: f64| q_sample(&[x], t, &[n], &s).unwrap()[0] - z;
            prop_assert!((f(a + k * b) - (f(a) + k * f(b))).abs() < 1e-9);
        }
    }
}
