//! Deep fusion: a small feed-forward network mapping the six-channel
//! fusion input to a sideslip estimate, trained with an L2 loss.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::FusionRow;
use super::FeatureNorm;
use crate::data::FusionInput;
use crate::error::{Error, Result};
use crate::ml::checkpoint::{
    params_to_tensors, read_json, tensors_to_params, write_json, TensorData, CHECKPOINT_VERSION,
};
use crate::ml::params::{Linear, ParamSet};
use crate::ml::tape::{NodeId, Tape};
use crate::ml::Adam;

/// Layer widths of the fusion network.
pub const DF_DIMS: [usize; 4] = [6, 20, 10, 1];

/// The fused estimator: network parameters plus the input standardization
/// fitted on its training split.
#[derive(Debug, Clone)]
pub struct DeepFusion {
    pub params: ParamSet,
    pub norm: FeatureNorm,
    layers: [Linear; 3],
}

impl DeepFusion {
    pub fn new(seed: u64, norm: FeatureNorm) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let layers = [
            Linear::init(&mut ps, &mut rng, "df.l1", DF_DIMS[0], DF_DIMS[1]),
            Linear::init(&mut ps, &mut rng, "df.l2", DF_DIMS[1], DF_DIMS[2]),
            Linear::init(&mut ps, &mut rng, "df.l3", DF_DIMS[2], DF_DIMS[3]),
        ];
        DeepFusion { params: ps, norm, layers }
    }

    pub fn from_parts(params: ParamSet, norm: FeatureNorm) -> Result<Self> {
        let fresh = DeepFusion::new(0, norm);
        if params.len() != fresh.params.len() {
            return Err(Error::Config(format!(
                "fusion checkpoint holds {} tensors, expected {}",
                params.len(),
                fresh.params.len()
            )));
        }
        for i in 0..params.len() {
            if params.value(i).dim() != fresh.params.value(i).dim() {
                return Err(Error::Config(format!(
                    "fusion tensor `{}` has wrong shape {:?}",
                    params.name(i),
                    params.value(i).dim()
                )));
            }
        }
        Ok(DeepFusion { params, norm: fresh.norm, layers: fresh.layers })
    }

    /// Forward pass on the tape over a batch of already-normalized inputs.
    pub fn forward_on_tape(&self, tape: &mut Tape, x: NodeId, leaves: &[NodeId]) -> NodeId {
        let h1 = self.layers[0].apply(tape, leaves, x);
        let a1 = tape.relu(h1);
        let h2 = self.layers[1].apply(tape, leaves, a1);
        let a2 = tape.relu(h2);
        self.layers[2].apply(tape, leaves, a2)
    }

    /// Batch prediction from raw fusion inputs.
    pub fn predict_batch(&self, inputs: &[FusionInput]) -> Vec<f64> {
        let n = inputs.len();
        let mut x = Array2::zeros((n, 6));
        for (i, h) in inputs.iter().enumerate() {
            let row = self.norm.apply(h);
            for (c, v) in row.iter().enumerate() {
                x[(i, c)] = *v;
            }
        }
        let mut tape = Tape::new();
        let leaves = self.params.register(&mut tape);
        let xn = tape.leaf(x);
        let out = self.forward_on_tape(&mut tape, xn, &leaves);
        tape.value(out).column(0).to_vec()
    }
}

/// Single-sample deep-fusion estimate.
pub fn df_forward(df: &DeepFusion, h: &FusionInput) -> f64 {
    df.predict_batch(std::slice::from_ref(h))[0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfTrainOptions {
    pub lr: f64,
    /// The learning rate decays exponentially to `lr * lr_final_factor`
    /// over the run; 1.0 keeps it constant.
    pub lr_final_factor: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DfTrainOptions {
    fn default() -> Self {
        DfTrainOptions { lr: 1e-3, lr_final_factor: 0.01, batch: 1000, epochs: 100, seed: 11 }
    }
}

fn to_matrices(rows: &[FusionRow], norm: &FeatureNorm) -> (Array2<f64>, Array1<f64>) {
    let n = rows.len();
    let mut x = Array2::zeros((n, 6));
    let mut y = Array1::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        let h = norm.apply(&r.input);
        for (c, v) in h.iter().enumerate() {
            x[(i, c)] = *v;
        }
        y[i] = r.y;
    }
    (x, y)
}

fn mse_on(df: &DeepFusion, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
    let mut tape = Tape::new();
    let leaves = df.params.register(&mut tape);
    let xn = tape.leaf(x.clone());
    let out = df.forward_on_tape(&mut tape, xn, &leaves);
    let pred = tape.value(out);
    let n = y.len() as f64;
    pred.column(0)
        .iter()
        .zip(y.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

/// Trains the fusion network, retaining the best-validation parameters.
pub fn train_df(
    train: &[FusionRow],
    val: &[FusionRow],
    opt: &DfTrainOptions,
) -> Result<(DeepFusion, Vec<f64>)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Degenerate("empty fusion split".into()));
    }
    let norm = FeatureNorm::fit(&train.iter().map(|r| r.input).collect::<Vec<_>>())?;
    let mut df = DeepFusion::new(opt.seed, norm);
    let (x_train, y_train) = to_matrices(train, &df.norm);
    let (x_val, y_val) = to_matrices(val, &df.norm);

    let mut adam = Adam::new(&df.params, opt.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, df.params.clone());
    let mut val_trace = Vec::with_capacity(opt.epochs);

    for epoch in 0..opt.epochs {
        let progress = if opt.epochs > 1 { epoch as f64 / (opt.epochs - 1) as f64 } else { 0.0 };
        adam.lr = opt.lr * opt.lr_final_factor.powf(progress);
        let mut rng = ChaCha8Rng::seed_from_u64(opt.seed.wrapping_add(1 + epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(opt.batch) {
            let mut xb = Array2::zeros((chunk.len(), 6));
            let mut yb = Array2::zeros((chunk.len(), 1));
            for (i, &ri) in chunk.iter().enumerate() {
                xb.row_mut(i).assign(&x_train.row(ri));
                yb[(i, 0)] = y_train[ri];
            }
            let mut tape = Tape::new();
            let leaves = df.params.register(&mut tape);
            let xn = tape.leaf(xb);
            let out = df.forward_on_tape(&mut tape, xn, &leaves);
            let target = tape.leaf(yb);
            let diff = tape.sub(out, target);
            let sq = tape.mul(diff, diff);
            let sum = tape.sum_all(sq);
            let loss = tape.scale(sum, 1.0 / chunk.len() as f64);
            let grads = tape.backward(loss);
            let collected: Vec<Array2<f64>> = leaves
                .iter()
                .zip(df.params.values())
                .map(|(leaf, p)| {
                    grads
                        .get(*leaf)
                        .cloned()
                        .unwrap_or_else(|| Array2::zeros(p.dim()))
                })
                .collect();
            adam.apply(&mut df.params, &collected);
        }
        let val_mse = mse_on(&df, &x_val, &y_val);
        val_trace.push(val_mse);
        if val_mse < best.0 {
            best = (val_mse, df.params.clone());
        }
        if !val_mse.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: val_mse,
                initial: val_trace[0],
            });
        }
    }
    df.params = best.1;
    log::info!("deep fusion: best val MSE {:.3e}", best.0);
    Ok((df, val_trace))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfCheckpoint {
    pub version: u32,
    pub kind: String,
    pub norm: FeatureNorm,
    pub params: Vec<TensorData>,
}

pub fn save_df(path: &Path, df: &DeepFusion) -> Result<()> {
    write_json(
        path,
        &DfCheckpoint {
            version: CHECKPOINT_VERSION,
            kind: "df".into(),
            norm: df.norm.clone(),
            params: params_to_tensors(&df.params),
        },
    )
}

pub fn load_df(path: &Path) -> Result<DeepFusion> {
    let ckpt: DfCheckpoint = read_json(path)?;
    if ckpt.kind != "df" {
        return Err(Error::Config(format!("expected df checkpoint, got `{}`", ckpt.kind)));
    }
    DeepFusion::from_parts(tensors_to_params(&ckpt.params)?, ckpt.norm)
}
