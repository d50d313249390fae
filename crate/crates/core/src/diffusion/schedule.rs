use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which variance the reverse step adds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverseVariance {
    /// `beta_tilde_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t`.
    #[default]
    Posterior,
    /// `beta_t`.
    Beta,
}

/// Variance schedule over steps `1..=T`.
///
/// `timesteps[i]` is the model timestep for chain step `i + 1`; it is the
/// identity unless the schedule was respaced for fast sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    timesteps: Vec<usize>,
}

/// `beta_t = start + (t - 1) / (T - 1) * (end - start)`.
pub fn make_linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + i as f64 / (steps - 1) as f64 * (beta_end - beta_start)
            }
        })
        .collect();
    NoiseSchedule::from_betas(betas, (1..=steps).collect())
}

impl NoiseSchedule {
    fn from_betas(betas: Vec<f64>, timesteps: Vec<usize>) -> Result<Self> {
        if betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidArgument("every beta must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
            timesteps,
        })
    }

    /// The 1000-step schedule with betas rising linearly from 1e-4 to 0.02.
    pub fn default_linear() -> Self {
        make_linear_schedule(1000, 1e-4, 0.02).expect("valid defaults")
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::InvalidArgument(format!(
                "timestep {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `abar_t`, with `abar_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Model timestep fed to the denoiser at chain step `t`.
    pub fn model_timestep(&self, t: usize) -> usize {
        self.timesteps[t - 1]
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        self.index(t).map(|_| ())
    }

    /// Coefficients `(c_x0, c_xt, variance)` of the reverse step from `t` to `t - 1`.
    pub fn posterior(&self, t: usize, variance: ReverseVariance) -> (f64, f64, f64) {
        let abar = self.alpha_bar(t);
        let abar_prev = self.alpha_bar(t - 1);
        let beta = self.beta(t);
        let c_x0 = abar_prev.sqrt() * beta / (1.0 - abar);
        let c_xt = self.alpha(t).sqrt() * (1.0 - abar_prev) / (1.0 - abar);
        let var = match variance {
            ReverseVariance::Posterior => (1.0 - abar_prev) / (1.0 - abar) * beta,
            ReverseVariance::Beta => beta,
        };
        (c_x0, c_xt, var)
    }

    /// A shorter chain visiting `steps` evenly spaced timesteps of this
    /// schedule, with betas recomputed so the chain's `abar` values match.
    pub fn respaced(&self, steps: usize) -> Result<Self> {
        let total = self.steps();
        if steps == 0 || steps > total {
            return Err(Error::InvalidArgument(format!(
                "respaced steps must be in 1..={total}, got {steps}"
            )));
        }
        if steps == total {
            return Ok(self.clone());
        }
        let picks: Vec<usize> = (0..steps)
            .map(|i| ((i + 1) as f64 * total as f64 / steps as f64).round() as usize)
            .map(|t| t.clamp(1, total))
            .collect();
        let mut betas = Vec::with_capacity(steps);
        let mut prev = 1.0;
        for &t in &picks {
            let ab = self.alpha_bar(t);
            betas.push(1.0 - ab / prev);
            prev = ab;
        }
        let timesteps = picks.iter().map(|&t| self.model_timestep(t)).collect();
        Self::from_betas(betas, timesteps)
    }
}
