//! Network building blocks: attention blocks, the distillation stage and
//! the sinusoidal positional encoding.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::attention::attention_on_tape;
use super::params::{Linear, NormParams, ParamSet};
use super::tape::{NodeId, Tape};

/// One attention block: multi-head attention, residual + layer norm, then a
/// two-layer feed-forward with ELU, residual + layer norm.
#[derive(Debug, Clone, Copy)]
pub struct AttnBlock {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln1: NormParams,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: NormParams,
}

impl AttnBlock {
    pub fn init(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        d: usize,
        d_ff: usize,
    ) -> Self {
        AttnBlock {
            wq: Linear::init(ps, rng, &format!("{name}.wq"), d, d),
            wk: Linear::init(ps, rng, &format!("{name}.wk"), d, d),
            wv: Linear::init(ps, rng, &format!("{name}.wv"), d, d),
            wo: Linear::init(ps, rng, &format!("{name}.wo"), d, d),
            ln1: NormParams::init(ps, &format!("{name}.ln1"), d),
            ff1: Linear::init(ps, rng, &format!("{name}.ff1"), d, d_ff),
            ff2: Linear::init(ps, rng, &format!("{name}.ff2"), d_ff, d),
            ln2: NormParams::init(ps, &format!("{name}.ln2"), d),
        }
    }

    /// Applies the block. `kv` supplies keys/values for cross-attention;
    /// self-attention uses `x` itself. `u` is the per-head top-query budget;
    /// `None` requests dense attention.
    pub fn apply(
        &self,
        tape: &mut Tape,
        leaves: &[NodeId],
        x: NodeId,
        kv: Option<NodeId>,
        heads: usize,
        u: Option<usize>,
    ) -> NodeId {
        let kv = kv.unwrap_or(x);
        let d = tape.value(x).ncols();
        debug_assert_eq!(d % heads, 0);
        let dk = d / heads;

        let q = self.wq.apply(tape, leaves, x);
        let k = self.wk.apply(tape, leaves, kv);
        let v = self.wv.apply(tape, leaves, kv);

        let l_q = tape.value(q).nrows();
        let budget = u.unwrap_or(l_q);
        let mut head_outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.select_cols(q, h * dk, (h + 1) * dk);
            let kh = tape.select_cols(k, h * dk, (h + 1) * dk);
            let vh = tape.select_cols(v, h * dk, (h + 1) * dk);
            head_outs.push(attention_on_tape(tape, qh, kh, vh, budget));
        }
        let cat = tape.concat_cols(head_outs);
        let proj = self.wo.apply(tape, leaves, cat);

        let res1 = tape.add(x, proj);
        let n1 = self.ln1.apply(tape, leaves, res1);

        let f1 = self.ff1.apply(tape, leaves, n1);
        let act = tape.elu(f1);
        let f2 = self.ff2.apply(tape, leaves, act);
        let res2 = tape.add(n1, f2);
        self.ln2.apply(tape, leaves, res2)
    }
}

/// Distillation stage: same-padded temporal convolution (kernel 3), ELU,
/// then stride-2 max pooling. Halves the time dimension; odd inputs are
/// right-padded by repeating the final step first.
pub fn distill(tape: &mut Tape, leaves: &[NodeId], conv: &Linear, x: NodeId) -> NodeId {
    let x = if tape.value(x).nrows() % 2 == 1 {
        tape.pad_repeat_last_row(x, 1)
    } else {
        x
    };
    let unfolded = tape.unfold_time3(x);
    let convolved = conv.apply(tape, leaves, unfolded);
    let activated = tape.elu(convolved);
    tape.max_pool_rows2(activated)
}

/// Sinusoidal positional encoding, `n` positions by `d` channels.
pub fn positional_encoding(n: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((n, d));
    for pos in 0..n {
        for i in 0..d {
            let exponent = 2.0 * (i / 2) as f64 / d as f64;
            let angle = pos as f64 / 10_000f64.powf(exponent);
            pe[(pos, i)] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}
