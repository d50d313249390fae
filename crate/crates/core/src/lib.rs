//! Co-speech gesture synthesis in a learned motion latent space.
//!
//! The pipeline: a temporal autoencoder with a quantization codebook
//! ([`vqvae`]) maps rotation sequences ([`motion`]) to a 4x downsampled latent
//! sequence; a conditional x0-predicting diffusion model ([`diffusion`])
//! generates latents from per-frame audio features and a speaker id;
//! retrieved semantic gestures ([`semantic`]) are blended into the reverse
//! chain through a timeline mask ([`injection`]); long requests are composed
//! from overlapping windows ([`long_sequence`]); [`metrics`] scores the
//! results and [`synth`] generates a procedural training corpus.

pub mod diffusion;
pub mod error;
pub mod injection;
pub mod long_sequence;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod rng;
pub mod semantic;
pub mod synth;
pub mod vqvae;

pub use candle_core::DType;
pub use error::{Error, Result};
