//! Minimal layer toolkit on top of candle tensors.
//!
//! Parameters live in a [`ParamStore`] keyed by dotted names so models can be
//! checkpointed, hashed and reloaded without a framework-specific format.

mod layers;
mod params;

pub use layers::{silu_mlp, layer_norm, sinusoidal_embedding, softmax_last, Attention, LayerNorm, Linear};
pub use params::{Init, ParamStore, StoredTensor};
