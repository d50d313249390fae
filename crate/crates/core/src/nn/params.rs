use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Normal(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Named trainable parameters.
#[derive(Debug, Clone)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    dtype: DType,
    device: Device,
}

impl ParamStore {
    pub fn new(dtype: DType) -> Self {
        Self {
            vars: BTreeMap::new(),
            dtype,
            device: Device::Cpu,
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Returns the existing parameter `name`, or creates it with `init`.
    pub fn get_or_init(
        &mut self,
        name: &str,
        shape: &[usize],
        init: Init,
        rng: &mut impl Rng,
    ) -> Result<Tensor> {
        if let Some(v) = self.vars.get(name) {
            if v.dims() != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, model expects {shape:?}",
                    v.dims()
                )));
            }
            return Ok(v.as_tensor().clone());
        }
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            }
            Init::Normal(std) => crate::rng::normal_f64(rng, n)
                .into_iter()
                .map(|x| x * std)
                .collect(),
        };
        let t = Tensor::from_vec(data, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.vars.insert(name.to_string(), var);
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.vars.values().cloned().collect()
    }

    pub fn named_vars(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    pub fn to_stored(&self) -> Result<BTreeMap<String, StoredTensor>> {
        self.vars
            .iter()
            .map(|(k, v)| {
                let data = v.flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()?;
                Ok((
                    k.clone(),
                    StoredTensor {
                        shape: v.dims().to_vec(),
                        data,
                    },
                ))
            })
            .collect()
    }

    pub fn from_stored(stored: &BTreeMap<String, StoredTensor>, dtype: DType) -> Result<Self> {
        let mut store = Self::new(dtype);
        for (name, st) in stored {
            let n: usize = st.shape.iter().product();
            if n != st.data.len() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} does not match {} values",
                    st.shape,
                    st.data.len()
                )));
            }
            let t = Tensor::from_vec(st.data.clone(), st.shape.as_slice(), &store.device)?
                .to_dtype(dtype)?;
            store.vars.insert(name.clone(), Var::from_tensor(&t)?);
        }
        Ok(store)
    }

    /// SHA-256 over names, shapes and f32 bit patterns.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (name, st) in self.to_stored()? {
            h.update(name.as_bytes());
            for d in &st.shape {
                h.update((*d as u64).to_le_bytes());
            }
            for x in &st.data {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Copies current values into a fresh, independent store.
    pub fn deep_clone(&self) -> Result<Self> {
        let mut out = Self::new(self.dtype);
        for (k, v) in &self.vars {
            out.vars
                .insert(k.clone(), Var::from_tensor(&v.as_tensor().copy()?)?);
        }
        Ok(out)
    }
}
