use super::{Codebook, LatentSequence, TokenSequence};
use crate::error::{Error, Result};

/// Index of the entry in `entries` (row-major, `dim` wide) closest to `v` in
/// Euclidean distance; ties go to the lowest index.
///
/// Uses partial-distance elimination: a candidate is abandoned as soon as its
/// running squared distance exceeds the best one found so far.
pub fn nearest_code(v: &[f32], entries: &[f32], dim: usize) -> Result<usize> {
    if dim == 0 || entries.is_empty() {
        return Err(Error::InvalidArgument("empty codebook".into()));
    }
    if v.len() != dim || entries.len() % dim != 0 {
        return Err(Error::shape("quantization dim", dim, v.len()));
    }
    let mut best = 0usize;
    let mut best_d = f32::INFINITY;
    'outer: for (idx, z) in entries.chunks_exact(dim).enumerate() {
        let mut d = 0.0f32;
        for (a, b) in v.iter().zip(z) {
            let diff = a - b;
            d += diff * diff;
            if d > best_d {
                continue 'outer;
            }
        }
        if d < best_d {
            best_d = d;
            best = idx;
        }
    }
    Ok(best)
}

/// Snaps every latent vector to its nearest codebook entry.
pub fn quantize(latents: &LatentSequence, codebook: &Codebook) -> Result<(TokenSequence, LatentSequence)> {
    if latents.dim() != codebook.dim() {
        return Err(Error::shape("codebook dim", codebook.dim(), latents.dim()));
    }
    let mut tokens = Vec::with_capacity(latents.len());
    let mut values = Vec::with_capacity(latents.values().len());
    for i in 0..latents.len() {
        let t = nearest_code(latents.frame(i), codebook.entries(), codebook.dim())?;
        tokens.push(t);
        values.extend_from_slice(codebook.entry(t));
    }
    let mut q = LatentSequence::new(latents.len(), latents.dim(), values)?;
    q.source_fps = latents.source_fps;
    q.downsample = latents.downsample;
    Ok((TokenSequence(tokens), q))
}
