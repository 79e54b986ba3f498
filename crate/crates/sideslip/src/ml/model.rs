//! The sequence model: sparse-attention encoder/decoder over an observation
//! window, emitting a Student-t density per output step.
//!
//! Layout: shared up-projection and positional encoding; an encoder of two
//! sparse self-attention blocks with a distillation stage between them; a
//! decoder of one sparse self-attention block and one dense cross-attention
//! block over the encoder features; a three-channel head for (mu, sigma,
//! nu). Future decoder inputs are zeroed - the model never sees labels.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::query_budget;
use super::layers::{distill, positional_encoding, AttnBlock};
use super::params::{Linear, ParamSet};
use super::tape::{NodeId, Tape};
use crate::data::{EstimateWithUncertainty, WindowConfig, INPUT_DIM};
use crate::error::{Error, Result};

/// Student-t density parameters for one predicted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTParams {
    /// Location (rad).
    pub mu: f64,
    /// Scale, strictly positive (rad).
    pub sigma: f64,
    /// Degrees of freedom, at least 3.
    pub nu: f64,
}

/// Converts a Student-t output into an estimate with uncertainty.
///
/// The uncertainty is the distribution variance `nu/(nu-2)·sigma²`. With
/// `floor_variance` the value is clamped below at 1, reproducing a published
/// variant of the rule; the floor swamps every realistic sideslip variance
/// (radians squared!), so it stays off by default.
pub fn predict_with_uncertainty(p: &StudentTParams, floor_variance: bool) -> EstimateWithUncertainty {
    debug_assert!(p.nu >= 3.0 && p.sigma > 0.0);
    let raw = p.nu / (p.nu - 2.0) * p.sigma * p.sigma;
    EstimateWithUncertainty {
        beta: p.mu,
        delta: if floor_variance { raw.max(1.0) } else { raw },
    }
}

/// Model hyperparameters. Desk-scale defaults train on a CPU in minutes;
/// larger settings are legal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Attention heads per block.
    pub heads: usize,
    /// Observation window (encoder steps).
    pub l_obs: usize,
    /// Decoder context steps.
    pub b_ctx: usize,
    /// Forecast steps.
    pub f_horizon: usize,
    /// Top-query budget factor `c` in `u = c·ln(L_Q)`.
    pub u_factor: f64,
    /// Feed-forward width.
    pub d_ff: usize,
    /// Parameter-init seed.
    pub seed: u64,
    /// Clamp the predicted variance below at 1 (compatibility variant).
    #[serde(default)]
    pub delta_floor: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            heads: 2,
            l_obs: 50,
            b_ctx: 12,
            f_horizon: 5,
            u_factor: 5.0,
            d_ff: 64,
            seed: 1,
            delta_floor: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d % self.heads != 0 {
            return Err(Error::Config(format!(
                "embedding dim {} must be a positive multiple of heads {}",
                self.d, self.heads
            )));
        }
        if self.b_ctx > self.l_obs {
            return Err(Error::Config(format!(
                "decoder context {} exceeds observation window {}",
                self.b_ctx, self.l_obs
            )));
        }
        if !(self.u_factor > 0.0) {
            return Err(Error::Config("u_factor must be positive".into()));
        }
        if self.d_ff == 0 {
            return Err(Error::Config("d_ff must be positive".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig {
            l_obs: self.l_obs,
            b_ctx: self.b_ctx,
            f_horizon: self.f_horizon,
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    phi: Linear,
    enc1: AttnBlock,
    conv: Linear,
    enc2: AttnBlock,
    dec_self: AttnBlock,
    dec_cross: AttnBlock,
    head: Linear,
}

/// Tape node handles of one forward pass.
pub struct ForwardNodes {
    pub mu: NodeId,
    pub sigma: NodeId,
    pub nu: NodeId,
    /// Leaf ids of every parameter tensor, index-aligned with the set.
    pub param_leaves: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub params: ParamSet,
    layout: Layout,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut ps = ParamSet::new();
        let d = cfg.d;
        let layout = Layout {
            phi: Linear::init(&mut ps, &mut rng, "phi", INPUT_DIM, d),
            enc1: AttnBlock::init(&mut ps, &mut rng, "enc1", d, cfg.d_ff),
            conv: Linear::init(&mut ps, &mut rng, "distill.conv", 3 * d, d),
            enc2: AttnBlock::init(&mut ps, &mut rng, "enc2", d, cfg.d_ff),
            dec_self: AttnBlock::init(&mut ps, &mut rng, "dec_self", d, cfg.d_ff),
            dec_cross: AttnBlock::init(&mut ps, &mut rng, "dec_cross", d, cfg.d_ff),
            head: Linear::init(&mut ps, &mut rng, "head", d, 3),
        };
        Ok(Model { cfg, params: ps, layout })
    }

    /// Rebuilds a model around a deserialized parameter set.
    pub fn from_params(cfg: ModelConfig, params: ParamSet) -> Result<Self> {
        let fresh = Model::new(cfg)?;
        if fresh.params.len() != params.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, model needs {}",
                params.len(),
                fresh.params.len()
            )));
        }
        for i in 0..params.len() {
            if fresh.params.value(i).dim() != params.value(i).dim() {
                return Err(Error::Config(format!(
                    "tensor `{}` has shape {:?}, expected {:?}",
                    params.name(i),
                    params.value(i).dim(),
                    fresh.params.value(i).dim()
                )));
            }
        }
        Ok(Model { cfg: fresh.cfg, params, layout: fresh.layout })
    }

    /// Decoder input: the last `B+1` observed steps then `F` zero rows.
    fn decoder_input(&self, x: &Array2<f64>) -> Array2<f64> {
        let l = self.cfg.l_obs;
        let b = self.cfg.b_ctx;
        let f = self.cfg.f_horizon;
        let mut dec = Array2::zeros((b + f + 1, INPUT_DIM));
        dec.slice_mut(ndarray::s![0..b + 1, ..])
            .assign(&x.slice(ndarray::s![l - b - 1..l, ..]));
        dec
    }

    /// Runs the network on one observation window, recording onto `tape`.
    pub fn forward(&self, tape: &mut Tape, x: &Array2<f64>) -> Result<ForwardNodes> {
        if x.dim() != (self.cfg.l_obs, INPUT_DIM) {
            return Err(Error::Misaligned {
                what: "observation window".into(),
                left: x.nrows(),
                right: self.cfg.l_obs,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation { layer: "input".into() });
        }
        let leaves = self.params.register(tape);
        let lay = &self.layout;
        let cfg = &self.cfg;

        let check = |tape: &Tape, node: NodeId, layer: &str| -> Result<()> {
            if tape.value(node).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: layer.into() });
            }
            Ok(())
        };

        // encoder
        let x_leaf = tape.leaf(x.clone());
        let emb = lay.phi.apply(tape, &leaves, x_leaf);
        let pe = tape.leaf(positional_encoding(cfg.l_obs, cfg.d));
        let enc_in = tape.add(emb, pe);
        let u_enc1 = query_budget(cfg.l_obs, cfg.u_factor);
        let h1 = lay.enc1.apply(tape, &leaves, enc_in, None, cfg.heads, Some(u_enc1));
        check(tape, h1, "enc1")?;
        let hd = distill(tape, &leaves, &lay.conv, h1);
        let u_enc2 = query_budget(tape.value(hd).nrows(), cfg.u_factor);
        let f_enc = lay.enc2.apply(tape, &leaves, hd, None, cfg.heads, Some(u_enc2));
        check(tape, f_enc, "enc2")?;

        // decoder
        let dec_raw = tape.leaf(self.decoder_input(x));
        let dec_emb = lay.phi.apply(tape, &leaves, dec_raw);
        let dec_pe = tape.leaf(positional_encoding(cfg.b_ctx + cfg.f_horizon + 1, cfg.d));
        let dec_in = tape.add(dec_emb, dec_pe);
        let u_dec = query_budget(cfg.b_ctx + cfg.f_horizon + 1, cfg.u_factor);
        let d1 = lay.dec_self.apply(tape, &leaves, dec_in, None, cfg.heads, Some(u_dec));
        check(tape, d1, "dec_self")?;
        let d2 = lay.dec_cross.apply(tape, &leaves, d1, Some(f_enc), cfg.heads, None);
        check(tape, d2, "dec_cross")?;

        // head over the F+1 output steps
        let out_rows: Vec<usize> = (cfg.b_ctx..=cfg.b_ctx + cfg.f_horizon).collect();
        let picked = tape.select_rows(d2, out_rows);
        let head3 = lay.head.apply(tape, &leaves, picked);
        check(tape, head3, "head")?;

        let mu = tape.select_cols(head3, 0, 1);
        let sigma_raw = tape.select_cols(head3, 1, 2);
        let sigma = tape.softplus(sigma_raw);
        let nu_raw = tape.select_cols(head3, 2, 3);
        let nu_sp = tape.softplus(nu_raw);
        let nu = tape.offset(nu_sp, 3.0);

        Ok(ForwardNodes { mu, sigma, nu, param_leaves: leaves })
    }

    /// Convenience forward pass returning plain per-step parameters.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<StudentTParams>> {
        let mut tape = Tape::new();
        let nodes = self.forward(&mut tape, x)?;
        let mu = tape.value(nodes.mu);
        let sigma = tape.value(nodes.sigma);
        let nu = tape.value(nodes.nu);
        Ok((0..mu.nrows())
            .map(|i| StudentTParams {
                mu: mu[(i, 0)],
                sigma: sigma[(i, 0)],
                nu: nu[(i, 0)],
            })
            .collect())
    }

    /// The estimate used downstream: the first output step, which matches
    /// the final observed time.
    pub fn estimate_at_window_end(&self, x: &Array2<f64>) -> Result<EstimateWithUncertainty> {
        let p = self.predict(x)?;
        Ok(predict_with_uncertainty(&p[0], self.cfg.delta_floor))
    }
}
