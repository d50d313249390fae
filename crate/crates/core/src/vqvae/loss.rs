use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::LatentSequence;
use crate::error::{Error, Result};
use crate::motion::{finite_difference, MotionClip};

/// Weights of the velocity and acceleration reconstruction terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqLossWeights {
    pub velocity: f64,
    pub acceleration: f64,
}

impl Default for VqLossWeights {
    fn default() -> Self {
        Self {
            velocity: 1.0,
            acceleration: 1.0,
        }
    }
}

impl VqLossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.velocity >= 0.0 && self.acceleration >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be non-negative, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VqLoss {
    pub recon: f64,
    pub codebook: f64,
    pub commitment: f64,
    pub total: f64,
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn mean_sq_diff(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum::<f64>()
        / a.len() as f64
}

/// Loss breakdown for one clip.
///
/// Reconstruction is mean L1 on rotation entries plus weighted mean L1 on
/// their velocity and acceleration. The codebook and commitment terms are
/// mean squared distances between encoder output and selected entries; they
/// are numerically equal and differ only in which side receives gradient.
pub fn vq_loss(
    encoded: &LatentSequence,
    quantized: &LatentSequence,
    recon: &MotionClip,
    target: &MotionClip,
    weights: VqLossWeights,
) -> Result<VqLoss> {
    weights.validate()?;
    if encoded.values().len() != quantized.values().len() {
        return Err(Error::shape(
            "quantized latents",
            encoded.values().len(),
            quantized.values().len(),
        ));
    }
    if recon.data().len() != target.data().len() {
        return Err(Error::shape("reconstruction", target.data().len(), recon.data().len()));
    }
    let mut recon_term = mean_abs_diff(recon.data(), target.data());
    if weights.velocity > 0.0 {
        let (a, b) = (finite_difference(recon, 1)?, finite_difference(target, 1)?);
        recon_term += weights.velocity * mean_abs_diff(&a.values, &b.values);
    }
    if weights.acceleration > 0.0 {
        let (a, b) = (finite_difference(recon, 2)?, finite_difference(target, 2)?);
        recon_term += weights.acceleration * mean_abs_diff(&a.values, &b.values);
    }
    let codebook = mean_sq_diff(encoded.values(), quantized.values());
    let commitment = mean_sq_diff(quantized.values(), encoded.values());
    Ok(VqLoss {
        recon: recon_term,
        codebook,
        commitment,
        total: recon_term + codebook + commitment,
    })
}

/// Temporal derivative along dim 1 of a `(B, L, W)` tensor, using the same
/// stencils as [`finite_difference`].
pub fn temporal_difference(x: &Tensor, order: usize) -> Result<Tensor> {
    let l = x.dim(1)?;
    match order {
        1 => {
            if l < 2 {
                return Err(Error::TooShort(format!("velocity needs 2 frames, got {l}")));
            }
            let first = (x.narrow(1, 1, 1)? - x.narrow(1, 0, 1)?)?;
            let last = (x.narrow(1, l - 1, 1)? - x.narrow(1, l - 2, 1)?)?;
            if l == 2 {
                return Ok(Tensor::cat(&[first, last], 1)?);
            }
            let mid = ((x.narrow(1, 2, l - 2)? - x.narrow(1, 0, l - 2)?)? * 0.5)?;
            Ok(Tensor::cat(&[first, mid, last], 1)?)
        }
        2 => {
            if l < 3 {
                return Err(Error::TooShort(format!("acceleration needs 3 frames, got {l}")));
            }
            let mid = ((x.narrow(1, 2, l - 2)? + x.narrow(1, 0, l - 2)?)?
                - (x.narrow(1, 1, l - 2)? * 2.0)?)?;
            let first = mid.narrow(1, 0, 1)?;
            let last = mid.narrow(1, l - 3, 1)?;
            Ok(Tensor::cat(&[first, mid, last], 1)?)
        }
        _ => Err(Error::InvalidArgument(format!("derivative order must be 1 or 2, got {order}"))),
    }
}

/// Differentiable reconstruction term on `(B, L, W)` frame tensors.
pub fn recon_loss_tensor(recon: &Tensor, target: &Tensor, weights: VqLossWeights) -> Result<Tensor> {
    weights.validate()?;
    let mut loss = (recon - target)?.abs()?.mean_all()?;
    if weights.velocity > 0.0 {
        let d = (temporal_difference(recon, 1)? - temporal_difference(target, 1)?)?;
        loss = (loss + (d.abs()?.mean_all()? * weights.velocity)?)?;
    }
    if weights.acceleration > 0.0 {
        let d = (temporal_difference(recon, 2)? - temporal_difference(target, 2)?)?;
        loss = (loss + (d.abs()?.mean_all()? * weights.acceleration)?)?;
    }
    Ok(loss)
}
