//! Versioned JSON checkpoints: config, parameter tensors (row-major
//! decimal), optimizer state and RNG seed. JSON floats use shortest
//! round-trip formatting, so save/load reproduces every bit.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::model::{Model, ModelConfig};
use super::params::ParamSet;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorData {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub data: Vec<f64>,
}

impl TensorData {
    pub fn from_array(name: &str, a: &Array2<f64>) -> Self {
        TensorData {
            name: name.to_string(),
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    pub fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone()).map_err(|e| {
            Error::Parse { path: format!("tensor `{}`", self.name), msg: e.to_string() }
        })
    }
}

pub fn params_to_tensors(ps: &ParamSet) -> Vec<TensorData> {
    (0..ps.len())
        .map(|i| TensorData::from_array(ps.name(i), ps.value(i)))
        .collect()
}

pub fn tensors_to_params(tensors: &[TensorData]) -> Result<ParamSet> {
    let mut ps = ParamSet::new();
    for t in tensors {
        ps.add(t.name.clone(), t.to_array()?);
    }
    Ok(ps)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<TensorData>,
    pub v: Vec<TensorData>,
}

impl AdamState {
    pub fn from_adam(a: &Adam) -> Self {
        AdamState {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            step: a.step,
            m: a.m.iter().map(|t| TensorData::from_array("m", t)).collect(),
            v: a.v.iter().map(|t| TensorData::from_array("v", t)).collect(),
        }
    }

    pub fn to_adam(&self) -> Result<Adam> {
        Ok(Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            step: self.step,
            m: self.m.iter().map(|t| t.to_array()).collect::<Result<_>>()?,
            v: self.v.iter().map(|t| t.to_array()).collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlCheckpoint {
    pub version: u32,
    pub kind: String,
    pub config: ModelConfig,
    pub params: Vec<TensorData>,
    pub optimizer: Option<AdamState>,
    pub rng_seed: u64,
}

pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    optimizer: Option<&Adam>,
    rng_seed: u64,
) -> Result<()> {
    let ckpt = MlCheckpoint {
        version: CHECKPOINT_VERSION,
        kind: "ml".into(),
        config: model.cfg.clone(),
        params: params_to_tensors(&model.params),
        optimizer: optimizer.map(AdamState::from_adam),
        rng_seed,
    };
    write_json(path, &ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Option<Adam>, u64)> {
    let ckpt: MlCheckpoint = read_json(path)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Config(format!(
            "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    if ckpt.kind != "ml" {
        return Err(Error::Config(format!(
            "expected an ml checkpoint, found kind `{}`",
            ckpt.kind
        )));
    }
    let params = tensors_to_params(&ckpt.params)?;
    let model = Model::from_params(ckpt.config, params)?;
    let adam = ckpt.optimizer.as_ref().map(AdamState::to_adam).transpose()?;
    Ok((model, adam, ckpt.rng_seed))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::INPUT_DIM;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip_reproduces_predictions_bit_exactly() {
        let cfg = ModelConfig {
            d: 8,
            heads: 2,
            l_obs: 12,
            b_ctx: 4,
            f_horizon: 2,
            u_factor: 3.0,
            d_ff: 16,
            seed: 77,
            delta_floor: false,
        };
        let model = Model::new(cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ml.json");
        let adam = Adam::new(&model.params, 1e-3);
        save_checkpoint(&path, &model, Some(&adam), 123).unwrap();

        let (restored, adam2, seed) = load_checkpoint(&path).unwrap();
        assert_eq!(seed, 123);
        assert_eq!(adam2.unwrap().step, 0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let x = Array2::from_shape_fn((12, INPUT_DIM), |_| rng.gen_range(-1.0..1.0));
            let a = model.predict(&x).unwrap();
            let b = restored.predict(&x).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert_eq!(p.mu.to_bits(), q.mu.to_bits());
                assert_eq!(p.sigma.to_bits(), q.sigma.to_bits());
                assert_eq!(p.nu.to_bits(), q.nu.to_bits());
            }
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let model = Model::new(ModelConfig {
            d: 4,
            heads: 1,
            l_obs: 8,
            b_ctx: 2,
            f_horizon: 1,
            u_factor: 2.0,
            d_ff: 8,
            seed: 0,
            delta_floor: false,
        })
        .unwrap();
        save_checkpoint(&path, &model, None, 0).unwrap();
        let mut ckpt: MlCheckpoint = read_json(&path).unwrap();
        ckpt.kind = "df".into();
        write_json(&path, &ckpt).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
