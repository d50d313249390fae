//! Command-line pipeline for latent-diffusion gesture synthesis: corpus
//! generation, codec and denoiser training, gesture database construction,
//! sampling with semantic injection, and evaluation.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
