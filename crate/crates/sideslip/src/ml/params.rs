//! Named parameter tensors with flat indexing for the optimizer and
//! checkpoint code.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{NodeId, Tape};

#[derive(Debug, Clone)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { names: Vec::new(), values: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn value(&self, i: usize) -> &Array2<f64> {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Array2<f64> {
        &mut self.values[i]
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    /// Registers every tensor as a tape leaf, in index order.
    pub fn register(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.values.iter().map(|v| tape.leaf(v.clone())).collect()
    }

    /// Total scalar count.
    pub fn scalar_len(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Reads the scalar at flat position `i` (row-major within tensors).
    pub fn get_flat(&self, mut i: usize) -> f64 {
        for v in &self.values {
            if i < v.len() {
                let cols = v.ncols();
                return v[(i / cols, i % cols)];
            }
            i -= v.len();
        }
        panic!("flat index out of range");
    }

    pub fn set_flat(&mut self, mut i: usize, val: f64) {
        for v in &mut self.values {
            if i < v.len() {
                let cols = v.ncols();
                v[(i / cols, i % cols)] = val;
                return;
            }
            i -= v.len();
        }
        panic!("flat index out of range");
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Affine layer handle: indices of its weight and bias tensors.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    /// Xavier-uniform weight, zero bias.
    pub fn init(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        d_in: usize,
        d_out: usize,
    ) -> Self {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let w = Array2::from_shape_fn((d_in, d_out), |_| rng.gen_range(-limit..limit));
        let b = Array2::zeros((1, d_out));
        Linear {
            w: ps.add(format!("{name}.w"), w),
            b: ps.add(format!("{name}.b"), b),
        }
    }

    pub fn apply(&self, tape: &mut Tape, leaves: &[NodeId], x: NodeId) -> NodeId {
        let wx = tape.matmul(x, leaves[self.w]);
        tape.add_row(wx, leaves[self.b])
    }
}

/// Layer-norm gain/bias handle.
#[derive(Debug, Clone, Copy)]
pub struct NormParams {
    pub gamma: usize,
    pub beta: usize,
}

impl NormParams {
    pub fn init(ps: &mut ParamSet, name: &str, d: usize) -> Self {
        NormParams {
            gamma: ps.add(format!("{name}.gamma"), Array2::ones((1, d))),
            beta: ps.add(format!("{name}.beta"), Array2::zeros((1, d))),
        }
    }

    pub fn apply(&self, tape: &mut Tape, leaves: &[NodeId], x: NodeId) -> NodeId {
        tape.layer_norm(x, leaves[self.gamma], leaves[self.beta])
    }
}
