use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use candle_core::DType;
use serde::{Deserialize, Serialize};

use super::{
    make_linear_schedule, Denoiser, DenoiserConfig, DiffusionEpoch, DiffusionModel, DiffusionTrainConfig,
    LatentStats,
};
use crate::error::{Error, Result};
use crate::nn::{ParamStore, StoredTensor};

pub const DIFFUSION_FORMAT: &str = "gesture-diffusion";
pub const DIFFUSION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

/// On-disk diffusion model with its training record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: DenoiserConfig,
    pub schedule: ScheduleSpec,
    pub stats: LatentStats,
    pub params: BTreeMap<String, StoredTensor>,
    /// Training phases in order, e.g. pre-training then fine-tuning.
    pub phases: Vec<PhaseRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseRecord {
    pub name: String,
    pub train_config: DiffusionTrainConfig,
    pub start_hash: String,
    pub end_hash: String,
    pub history: Vec<DiffusionEpoch>,
}

impl DiffusionCheckpoint {
    pub fn from_model(model: &DiffusionModel, schedule: ScheduleSpec, phases: Vec<PhaseRecord>) -> Result<Self> {
        Ok(Self {
            format: DIFFUSION_FORMAT.into(),
            version: DIFFUSION_VERSION,
            config: model.denoiser.config().clone(),
            schedule,
            stats: model.stats.clone(),
            params: model.denoiser.store().to_stored()?,
            phases,
        })
    }

    /// Rebuilds the model, checking every parameter shape.
    pub fn to_model(&self) -> Result<DiffusionModel> {
        if self.format != DIFFUSION_FORMAT || self.version != DIFFUSION_VERSION {
            return Err(Error::Checkpoint(format!(
                "expected {DIFFUSION_FORMAT} v{DIFFUSION_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        if self.stats.dim() != self.config.latent_dim {
            return Err(Error::Checkpoint(format!(
                "latent statistics have width {}, model expects {}",
                self.stats.dim(),
                self.config.latent_dim
            )));
        }
        let schedule = make_linear_schedule(self.schedule.steps, self.schedule.beta_start, self.schedule.beta_end)?;
        let expected = Denoiser::new(self.config.clone(), schedule.clone(), DType::F32, 0)?;
        for (name, var) in expected.store().named_vars() {
            match self.params.get(name) {
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
        if self.params.len() != expected.store().len() {
            return Err(Error::Checkpoint("checkpoint has unexpected extra parameters".into()));
        }
        let store = ParamStore::from_stored(&self.params, DType::F32)?;
        let denoiser = Denoiser::from_store(self.config.clone(), schedule, store, 0)?;
        Ok(DiffusionModel {
            denoiser,
            stats: self.stats.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
