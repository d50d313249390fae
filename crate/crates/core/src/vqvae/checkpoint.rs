use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use candle_core::DType;
use serde::{Deserialize, Serialize};

use super::{VqvaeArch, VqvaeEpoch, VqvaeModel, VqvaeTrainConfig};
use crate::error::{Error, Result};
use crate::motion::Skeleton;
use crate::nn::{ParamStore, StoredTensor};

pub const VQVAE_FORMAT: &str = "gesture-vqvae";
pub const VQVAE_VERSION: u32 = 1;

/// On-disk VQVAE: configuration, parameters, codebook and loss history.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqvaeCheckpoint {
    pub format: String,
    pub version: u32,
    pub arch: VqvaeArch,
    pub train_config: Option<VqvaeTrainConfig>,
    pub skeleton: Skeleton,
    pub params: BTreeMap<String, StoredTensor>,
    pub codebook: StoredTensor,
    pub loss_history: Vec<VqvaeEpoch>,
}

impl VqvaeCheckpoint {
    pub fn from_model(
        model: &VqvaeModel,
        train_config: Option<VqvaeTrainConfig>,
        loss_history: Vec<VqvaeEpoch>,
    ) -> Result<Self> {
        let mut params = model.store().to_stored()?;
        let codebook = params
            .remove("codebook")
            .ok_or_else(|| Error::Checkpoint("model has no codebook".into()))?;
        Ok(Self {
            format: VQVAE_FORMAT.into(),
            version: VQVAE_VERSION,
            arch: model.arch().clone(),
            train_config,
            skeleton: model.skeleton().clone(),
            params,
            codebook,
            loss_history,
        })
    }

    pub fn into_model(self) -> Result<VqvaeModel> {
        if self.format != VQVAE_FORMAT || self.version != VQVAE_VERSION {
            return Err(Error::Checkpoint(format!(
                "expected {VQVAE_FORMAT} v{VQVAE_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        if self.skeleton.joint_count() != self.arch.joints {
            return Err(Error::Checkpoint(format!(
                "skeleton has {} joints but architecture expects {}",
                self.skeleton.joint_count(),
                self.arch.joints
            )));
        }
        if self.codebook.shape != [self.arch.codebook_size, self.arch.latent_dim] {
            return Err(Error::Checkpoint(format!(
                "codebook shape {:?} does not match N={} D={}",
                self.codebook.shape, self.arch.codebook_size, self.arch.latent_dim
            )));
        }
        let mut params = self.params;
        params.insert("codebook".into(), self.codebook);
        let expected = VqvaeModel::new(self.arch.clone(), self.skeleton.clone(), 0)?;
        for (name, var) in expected.store().named_vars() {
            match params.get(name) {
                Some(st) if st.shape == var.dims() => {}
                Some(st) => {
                    return Err(Error::Checkpoint(format!(
                        "parameter {name} has shape {:?}, expected {:?}",
                        st.shape,
                        var.dims()
                    )))
                }
                None => return Err(Error::Checkpoint(format!("missing parameter {name}"))),
            }
        }
        let store = ParamStore::from_stored(&params, DType::F32)?;
        VqvaeModel::from_store(self.arch, self.skeleton, store, 0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl VqvaeModel {
    /// Loads a checkpoint and checks it against the expected joint count and
    /// latent dimension.
    pub fn load_checked(path: impl AsRef<Path>, joints: Option<usize>, latent_dim: Option<usize>) -> Result<Self> {
        let ckpt = VqvaeCheckpoint::load(path)?;
        if let Some(j) = joints {
            if ckpt.arch.joints != j {
                return Err(Error::Checkpoint(format!(
                    "checkpoint trained for J={}, expected J={j}",
                    ckpt.arch.joints
                )));
            }
        }
        if let Some(dim) = latent_dim {
            if ckpt.arch.latent_dim != dim {
                return Err(Error::Checkpoint(format!(
                    "checkpoint has D={}, expected D={dim}",
                    ckpt.arch.latent_dim
                )));
            }
        }
        ckpt.into_model()
    }
}
