//! Motion autoencoder with a quantization codebook.
//!
//! The encoder maps every block of [`DOWNSAMPLE`] frames to one latent vector
//! (a strided temporal convolution whose kernel equals its stride, followed by
//! pointwise residual layers); the decoder inverts this block-wise and
//! projects its raw 9-value outputs onto the nearest rotation matrices.
//! Because every layer is block-local the codec is exactly length-equivariant
//! on clips whose lengths are multiples of [`DOWNSAMPLE`].

mod checkpoint;
mod latent;
mod loss;
mod model;
mod quantize;
mod train;

pub use checkpoint::{VqvaeCheckpoint, VQVAE_FORMAT, VQVAE_VERSION};
pub use latent::{Codebook, LatentSequence, TokenSequence};
pub use loss::{recon_loss_tensor, temporal_difference, vq_loss, VqLoss, VqLossWeights};
pub use model::{VqvaeArch, VqvaeModel};
pub use quantize::{nearest_code, quantize};
pub use train::{train_vqvae, train_vqvae_from, VqvaeEpoch, VqvaeTrainConfig, VqvaeTraining};

/// Temporal downsampling factor between motion frames and latent frames.
pub const DOWNSAMPLE: usize = 4;

/// Number of latent frames for a clip of `frames` motion frames.
pub fn latent_len(frames: usize) -> usize {
    frames.div_ceil(DOWNSAMPLE)
}
