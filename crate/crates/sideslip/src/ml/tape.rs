//! Reverse-mode gradient engine over `f64` matrices.
//!
//! A tape records matrix-valued primitive operations with cached values;
//! `backward` walks the node list in reverse, accumulating gradients. The
//! op set is exactly what the sequence model and the fusion network need,
//! including log-gamma (whose derivative is the digamma function) for the
//! Student-t likelihood.

use ndarray::{concatenate, Array2, Axis};

use crate::special::{digamma, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

const LAYER_NORM_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    /// `a (n×d) + broadcast rows of b (1×d)`.
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Scale(NodeId, f64),
    Offset(NodeId),
    Relu(NodeId),
    Elu(NodeId),
    Softplus(NodeId),
    Ln(NodeId),
    LnGamma(NodeId),
    SoftmaxRows(NodeId),
    SumAll(NodeId),
    MeanRows(NodeId),
    BroadcastRow(NodeId),
    SelectRows(NodeId, Vec<usize>),
    ScatterRows { base: NodeId, rows: NodeId, idx: Vec<usize> },
    SelectCols(NodeId, usize, usize),
    ConcatCols(Vec<NodeId>),
    UnfoldTime3(NodeId),
    MaxPoolRows2(NodeId),
    PadRepeatLastRow(NodeId, usize),
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId },
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[row.0].value.nrows(), 1);
        let v = &self.nodes[a.0].value + &self.nodes[row.0].value;
        self.push(v, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value / &self.nodes[b.0].value;
        self.push(v, Op::Div(a, b))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a.0].value * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a.0].value + c;
        self.push(v, Op::Offset(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(|x| if x > 0.0 { x } else { x.exp() - 1.0 });
        self.push(v, Op::Elu(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(f64::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn ln_gamma(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.mapv(crate::special::ln_gamma);
        self.push(v, Op::LnGamma(a))
    }

    /// Row-wise softmax with max-subtraction for stability.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a.0].value;
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|e| (e - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|e| e / sum);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Sum of all entries, a 1×1 node.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Array2::from_elem((1, 1), self.nodes[a.0].value.sum());
        self.push(v, Op::SumAll(a))
    }

    /// Column means over rows: n×d -> 1×d.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a.0].value;
        let v = x
            .mean_axis(Axis(0))
            .expect("non-empty matrix")
            .insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    /// Replicates a 1×d row n times.
    pub fn broadcast_row(&mut self, a: NodeId, n: usize) -> NodeId {
        let x = &self.nodes[a.0].value;
        debug_assert_eq!(x.nrows(), 1);
        let v = x.broadcast((n, x.ncols())).expect("broadcast row").to_owned();
        self.push(v, Op::BroadcastRow(a))
    }

    pub fn select_rows(&mut self, a: NodeId, idx: Vec<usize>) -> NodeId {
        let x = &self.nodes[a.0].value;
        let mut v = Array2::zeros((idx.len(), x.ncols()));
        for (out_row, &src) in idx.iter().enumerate() {
            v.row_mut(out_row).assign(&x.row(src));
        }
        self.push(v, Op::SelectRows(a, idx))
    }

    /// Copy of `base` with row `idx[i]` overwritten by row `i` of `rows`.
    /// Indices must be distinct.
    pub fn scatter_rows(&mut self, base: NodeId, rows: NodeId, idx: Vec<usize>) -> NodeId {
        let mut v = self.nodes[base.0].value.clone();
        let src = &self.nodes[rows.0].value;
        debug_assert_eq!(src.nrows(), idx.len());
        for (i, &dst) in idx.iter().enumerate() {
            v.row_mut(dst).assign(&src.row(i));
        }
        self.push(v, Op::ScatterRows { base, rows, idx })
    }

    /// Column slice `[start, end)`.
    pub fn select_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.nodes[a.0].value.slice(ndarray::s![.., start..end]).to_owned();
        self.push(v, Op::SelectCols(a, start, end))
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        let views: Vec<_> = parts.iter().map(|p| self.nodes[p.0].value.view()).collect();
        let v = concatenate(Axis(1), &views).expect("column concat");
        self.push(v, Op::ConcatCols(parts))
    }

    /// Temporal unfold with kernel 3 and zero padding: row t of the result
    /// is `[x[t-1] | x[t] | x[t+1]]`, so a matmul against a (3d)×k weight
    /// implements a same-padded 1-D convolution along time.
    pub fn unfold_time3(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a.0].value;
        let (n, d) = x.dim();
        let mut v = Array2::zeros((n, 3 * d));
        for t in 0..n {
            if t > 0 {
                v.slice_mut(ndarray::s![t, 0..d]).assign(&x.row(t - 1));
            }
            v.slice_mut(ndarray::s![t, d..2 * d]).assign(&x.row(t));
            if t + 1 < n {
                v.slice_mut(ndarray::s![t, 2 * d..3 * d]).assign(&x.row(t + 1));
            }
        }
        self.push(v, Op::UnfoldTime3(a))
    }

    /// Max pool with kernel 2 and stride 2 along rows; requires even count.
    pub fn max_pool_rows2(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a.0].value;
        let (n, d) = x.dim();
        debug_assert_eq!(n % 2, 0, "max pool needs an even row count");
        let mut v = Array2::zeros((n / 2, d));
        for i in 0..n / 2 {
            for c in 0..d {
                v[(i, c)] = x[(2 * i, c)].max(x[(2 * i + 1, c)]);
            }
        }
        self.push(v, Op::MaxPoolRows2(a))
    }

    /// Appends `k` copies of the final row.
    pub fn pad_repeat_last_row(&mut self, a: NodeId, k: usize) -> NodeId {
        let x = &self.nodes[a.0].value;
        let (n, d) = x.dim();
        let mut v = Array2::zeros((n + k, d));
        v.slice_mut(ndarray::s![0..n, ..]).assign(x);
        for i in 0..k {
            v.row_mut(n + i).assign(&x.row(n - 1));
        }
        self.push(v, Op::PadRepeatLastRow(a, k))
    }

    /// Row-wise layer normalization with learnable gain and bias (1×d each).
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let g = &self.nodes[gamma.0].value;
        let b = &self.nodes[beta.0].value;
        let d = xv.ncols() as f64;
        let mut v = Array2::zeros(xv.dim());
        for (i, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / d;
            let var = row.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (c, e) in row.iter().enumerate() {
                v[(i, c)] = (e - mean) * inv * g[(0, c)] + b[(0, c)];
            }
        }
        self.push(v, Op::LayerNorm { x, gamma, beta })
    }

    /// Reverse pass from a scalar (1×1) loss node.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(self.nodes[loss.0].value.dim(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, i: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let val = |id: NodeId| &self.nodes[id.0].value;
        let mut bump = |id: NodeId, delta: Array2<f64>| match &mut grads[id.0] {
            Some(acc) => *acc += &delta,
            slot @ None => *slot = Some(delta),
        };

        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                bump(*a, g.clone());
                bump(*b, g.clone());
            }
            Op::AddRow(a, row) => {
                bump(*a, g.clone());
                bump(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Sub(a, b) => {
                bump(*a, g.clone());
                bump(*b, -g);
            }
            Op::Mul(a, b) => {
                bump(*a, g * val(*b));
                bump(*b, g * val(*a));
            }
            Op::Div(a, b) => {
                let vb = val(*b);
                bump(*a, g / vb);
                bump(*b, -(g * val(*a)) / (vb * vb));
            }
            Op::MatMul(a, b) => {
                bump(*a, g.dot(&val(*b).t()));
                bump(*b, val(*a).t().dot(g));
            }
            Op::Transpose(a) => bump(*a, g.t().to_owned()),
            Op::Scale(a, c) => bump(*a, g * *c),
            Op::Offset(a) => bump(*a, g.clone()),
            Op::Relu(a) => {
                let mask = val(*a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                bump(*a, g * &mask);
            }
            Op::Elu(a) => {
                let deriv = val(*a).mapv(|x| if x > 0.0 { 1.0 } else { x.exp() });
                bump(*a, g * &deriv);
            }
            Op::Softplus(a) => {
                let deriv = val(*a).mapv(sigmoid);
                bump(*a, g * &deriv);
            }
            Op::Ln(a) => bump(*a, g / val(*a)),
            Op::LnGamma(a) => {
                let deriv = val(*a).mapv(digamma);
                bump(*a, g * &deriv);
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[i].value;
                let mut dx = Array2::zeros(y.dim());
                for ((mut dxr, yr), gr) in
                    dx.rows_mut().into_iter().zip(y.rows()).zip(g.rows())
                {
                    let dot: f64 = gr.iter().zip(yr.iter()).map(|(a, b)| a * b).sum();
                    for (c, e) in dxr.iter_mut().enumerate() {
                        *e = (gr[c] - dot) * yr[c];
                    }
                }
                bump(*a, dx);
            }
            Op::SumAll(a) => {
                let scalar = g[(0, 0)];
                bump(*a, Array2::from_elem(val(*a).dim(), scalar));
            }
            Op::MeanRows(a) => {
                let n = val(*a).nrows();
                let expanded = g
                    .broadcast((n, g.ncols()))
                    .expect("broadcast mean grad")
                    .to_owned()
                    / n as f64;
                bump(*a, expanded);
            }
            Op::BroadcastRow(a) => {
                bump(*a, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::SelectRows(a, idx) => {
                let mut da = Array2::zeros(val(*a).dim());
                for (row, &src) in idx.iter().enumerate() {
                    let mut target = da.row_mut(src);
                    target += &g.row(row);
                }
                bump(*a, da);
            }
            Op::ScatterRows { base, rows, idx } => {
                let mut dbase = g.clone();
                let mut drows = Array2::zeros(val(*rows).dim());
                for (i_row, &dst) in idx.iter().enumerate() {
                    drows.row_mut(i_row).assign(&g.row(dst));
                    dbase.row_mut(dst).fill(0.0);
                }
                bump(*base, dbase);
                bump(*rows, drows);
            }
            Op::SelectCols(a, start, end) => {
                let mut da = Array2::zeros(val(*a).dim());
                da.slice_mut(ndarray::s![.., *start..*end]).assign(g);
                bump(*a, da);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = val(*p).ncols();
                    bump(*p, g.slice(ndarray::s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::UnfoldTime3(a) => {
                let (n, d) = val(*a).dim();
                let mut da = Array2::zeros((n, d));
                for t in 0..n {
                    if t > 0 {
                        let mut row = da.row_mut(t - 1);
                        row += &g.slice(ndarray::s![t, 0..d]);
                    }
                    {
                        let mut row = da.row_mut(t);
                        row += &g.slice(ndarray::s![t, d..2 * d]);
                    }
                    if t + 1 < n {
                        let mut row = da.row_mut(t + 1);
                        row += &g.slice(ndarray::s![t, 2 * d..3 * d]);
                    }
                }
                bump(*a, da);
            }
            Op::MaxPoolRows2(a) => {
                let x = val(*a);
                let (n, d) = x.dim();
                let mut da = Array2::zeros((n, d));
                for i in 0..n / 2 {
                    for c in 0..d {
                        let winner = if x[(2 * i, c)] >= x[(2 * i + 1, c)] {
                            2 * i
                        } else {
                            2 * i + 1
                        };
                        da[(winner, c)] += g[(i, c)];
                    }
                }
                bump(*a, da);
            }
            Op::PadRepeatLastRow(a, k) => {
                let n = val(*a).nrows();
                let mut da = g.slice(ndarray::s![0..n, ..]).to_owned();
                for pad in 0..*k {
                    let mut last = da.row_mut(n - 1);
                    last += &g.row(n + pad);
                }
                bump(*a, da);
            }
            Op::LayerNorm { x, gamma, beta } => {
                let xv = val(*x);
                let gv = val(*gamma);
                let d = xv.ncols() as f64;
                let mut dx = Array2::zeros(xv.dim());
                let mut dgamma = Array2::zeros((1, xv.ncols()));
                let mut dbeta = Array2::zeros((1, xv.ncols()));
                for (r, row) in xv.rows().into_iter().enumerate() {
                    let mean = row.sum() / d;
                    let var = row.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / d;
                    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    // dL/dxhat and the two reduction terms
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for c in 0..xv.ncols() {
                        let xhat = (row[c] - mean) * inv;
                        let dxhat = g[(r, c)] * gv[(0, c)];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        dgamma[(0, c)] += g[(r, c)] * xhat;
                        dbeta[(0, c)] += g[(r, c)];
                    }
                    for c in 0..xv.ncols() {
                        let xhat = (row[c] - mean) * inv;
                        let dxhat = g[(r, c)] * gv[(0, c)];
                        dx[(r, c)] =
                            inv * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
                    }
                }
                bump(*x, dx);
                bump(*gamma, dgamma);
                bump(*beta, dbeta);
            }
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads[id.0].as_ref()
    }
}
