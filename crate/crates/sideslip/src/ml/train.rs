//! Training loop: Adam over mini-batches of observation windows, best
//! validation checkpointing and a divergence guard.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{studentt_nll, studentt_nll_on_tape};
use super::model::Model;
use super::tape::Tape;
use crate::data::Window;
use crate::error::{Error, Result};
use crate::RAD2DEG;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lr: f64,
    /// The learning rate decays exponentially to `lr * lr_final_factor`
    /// over the run; 1.0 keeps it constant.
    pub lr_final_factor: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Abort when the epoch loss exceeds this multiple of the first epoch's
    /// loss for three consecutive epochs.
    pub divergence_factor: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lr: 1e-4,
            lr_final_factor: 0.1,
            batch: 64,
            epochs: 20,
            seed: 7,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-window training NLL.
    pub train_nll: f64,
    /// Mean per-window validation NLL.
    pub val_nll: f64,
    /// Validation MAE of the window-end estimate, degrees.
    pub val_mae_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_nll: f64,
}

/// Divergence guard: trips after three consecutive epochs above ten times
/// the initial loss (shifted by its magnitude so a negative initial
/// likelihood still gives a meaningful ceiling).
pub struct DivergenceGuard {
    factor: f64,
    initial: Option<f64>,
    streak: usize,
}

impl DivergenceGuard {
    pub fn new(factor: f64) -> Self {
        DivergenceGuard { factor, initial: None, streak: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Result<()> {
        let initial = *self.initial.get_or_insert(loss);
        let threshold = initial + (self.factor - 1.0) * initial.abs().max(1e-3);
        if loss > threshold || !loss.is_finite() {
            self.streak += 1;
            if self.streak >= 3 {
                return Err(Error::TrainingDiverged { epoch, loss, initial });
            }
        } else {
            self.streak = 0;
        }
        Ok(())
    }
}

/// Mean NLL and window-end MAE (degrees) over a window set.
pub fn evaluate_windows(model: &Model, windows: &[Window]) -> Result<(f64, f64)> {
    let mut nll_sum = 0.0;
    let mut abs_sum = 0.0;
    for w in windows {
        let params = model.predict(&w.x)?;
        nll_sum += studentt_nll(&params, w.y.as_slice().expect("contiguous"));
        abs_sum += (params[0].mu - w.y[0]).abs();
    }
    let n = windows.len() as f64;
    Ok((nll_sum / n, abs_sum / n * RAD2DEG))
}

/// Trains the model, keeping the parameters of the best-validation epoch.
/// Returns the log and the optimizer (for checkpointing).
pub fn train_ml(
    model: &mut Model,
    train: &[Window],
    val: &[Window],
    opt: &TrainOptions,
) -> Result<(TrainLog, Adam)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Degenerate("empty training or validation split".into()));
    }
    if opt.batch == 0 || opt.epochs == 0 {
        return Err(Error::Config("batch and epochs must be positive".into()));
    }

    let mut adam = Adam::new(&model.params, opt.lr);
    let mut log = TrainLog { epochs: Vec::new(), best_epoch: 0, best_val_nll: f64::INFINITY };
    let mut best_params = model.params.clone();
    let mut guard = DivergenceGuard::new(opt.divergence_factor);

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..opt.epochs {
        let progress =
            if opt.epochs > 1 { epoch as f64 / (opt.epochs - 1) as f64 } else { 0.0 };
        adam.lr = opt.lr * opt.lr_final_factor.powf(progress);
        let mut rng = ChaCha8Rng::seed_from_u64(opt.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(opt.batch) {
            let mut grads: Vec<Array2<f64>> = model
                .params
                .values()
                .iter()
                .map(|p| Array2::zeros(p.dim()))
                .collect();
            for &wi in batch {
                let w = &train[wi];
                let mut tape = Tape::new();
                let nodes = model.forward(&mut tape, &w.x)?;
                let loss = studentt_nll_on_tape(&mut tape, nodes.mu, nodes.sigma, nodes.nu, &w.y);
                epoch_loss += tape.value(loss)[(0, 0)];
                let g = tape.backward(loss);
                for (i, leaf) in nodes.param_leaves.iter().enumerate() {
                    if let Some(dg) = g.get(*leaf) {
                        grads[i] += dg;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.mapv_inplace(|x| x * scale);
            }
            adam.apply(&mut model.params, &grads);
        }
        let train_nll = epoch_loss / train.len() as f64;
        let (val_nll, val_mae_deg) = evaluate_windows(model, val)?;
        log.epochs.push(EpochStats { epoch, train_nll, val_nll, val_mae_deg });
        log::info!(
            "epoch {epoch}: train NLL {train_nll:.4}, val NLL {val_nll:.4}, val MAE {val_mae_deg:.3} deg"
        );

        if val_nll < log.best_val_nll {
            log.best_val_nll = val_nll;
            log.best_epoch = epoch;
            best_params = model.params.clone();
        }

        guard.observe(epoch, train_nll)?;
    }

    model.params = best_params;
    Ok((log, adam))
}
