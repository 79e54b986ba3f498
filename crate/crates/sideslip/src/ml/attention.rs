//! Sparse attention: exact softmax rows only for queries whose score
//! distribution is far from uniform, the mean of the values elsewhere.

use ndarray::{Array1, Array2};

use super::tape::{NodeId, Tape};

/// Sparsity measure per query: `max_j(q·k/√d) - mean_j(q·k/√d)`.
///
/// Dominant queries concentrate attention mass away from the uniform
/// distribution and score high; lazy queries score near zero.
pub fn sparsity_measure(q: &Array2<f64>, k: &Array2<f64>) -> Array1<f64> {
    assert_eq!(q.ncols(), k.ncols(), "query/key dims differ");
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let scores = q.dot(&k.t()) * scale;
    let l_k = k.nrows() as f64;
    Array1::from_iter(scores.rows().into_iter().map(|row| {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = row.sum() / l_k;
        max - mean
    }))
}

/// Indices of the top-`u` queries by sparsity measure, ascending.
/// Ties resolve by lower index.
pub fn top_u_queries(m: &Array1<f64>, u: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m[b].partial_cmp(&m[a]).unwrap().then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(u).collect();
    chosen.sort_unstable();
    chosen
}

/// Top-query budget `u = min(L_Q, ceil(c·ln L_Q))`, at least one.
pub fn query_budget(l_q: usize, c: f64) -> usize {
    let u = (c * (l_q as f64).ln()).ceil() as usize;
    u.clamp(1, l_q)
}

/// Sparse (or dense, when `u` covers every query) scaled-dot attention on
/// the tape. Rows not in the top-`u` receive the mean of the value rows.
pub fn attention_on_tape(
    tape: &mut Tape,
    q: NodeId,
    k: NodeId,
    v: NodeId,
    u: usize,
) -> NodeId {
    let l_q = tape.value(q).nrows();
    let mean_v = tape.mean_rows(v);
    let base = tape.broadcast_row(mean_v, l_q);
    if u == 0 {
        return base;
    }
    let m = sparsity_measure(tape.value(q), tape.value(k));
    let idx = top_u_queries(&m, u.min(l_q));

    let scale = 1.0 / (tape.value(q).ncols() as f64).sqrt();
    let q_sel = tape.select_rows(q, idx.clone());
    let k_t = tape.transpose(k);
    let scores = tape.matmul(q_sel, k_t);
    let scaled = tape.scale(scores, scale);
    let attn = tape.softmax_rows(scaled);
    let rows = tape.matmul(attn, v);
    if idx.len() == l_q {
        // every query is active; skip the scatter
        rows
    } else {
        tape.scatter_rows(base, rows, idx)
    }
}

/// Standalone sparse attention over plain matrices (same code path as the
/// model: a throwaway tape evaluates the ops).
pub fn probsparse_attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    u: usize,
) -> Array2<f64> {
    assert!(u <= q.nrows(), "u = {} exceeds L_Q = {}", u, q.nrows());
    let mut tape = Tape::new();
    let qn = tape.leaf(q.clone());
    let kn = tape.leaf(k.clone());
    let vn = tape.leaf(v.clone());
    let out = attention_on_tape(&mut tape, qn, kn, vn, u);
    tape.value(out).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    /// Dense attention oracle: plain nested-loop softmax(QKᵀ/√d)V.
    fn dense_oracle(q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
        let scale = 1.0 / (q.ncols() as f64).sqrt();
        let mut out = Array2::zeros((q.nrows(), v.ncols()));
        for i in 0..q.nrows() {
            let mut scores = vec![0.0; k.nrows()];
            for (j, s) in scores.iter_mut().enumerate() {
                *s = q.row(i).dot(&k.row(j)) * scale;
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..k.nrows() {
                let w = exps[j] / z;
                for c in 0..v.ncols() {
                    out[(i, c)] += w * v[(j, c)];
                }
            }
        }
        out
    }

    #[test]
    fn identical_keys_zero_the_sparsity_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = random(&mut rng, 6, 4);
        let row = random(&mut rng, 1, 4);
        let k = row.broadcast((5, 4)).unwrap().to_owned();
        for m in sparsity_measure(&q, &k) {
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn sparsity_measure_is_never_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let rq = rng.gen_range(1..12);
            let rk = rng.gen_range(1..12);
            let q = random(&mut rng, rq, 4);
            let k = random(&mut rng, rk, 4);
            for m in sparsity_measure(&q, &k) {
                assert!(m >= -1e-15);
            }
        }
    }

    // Oracle: dense brute-force max/mean per query.
    #[test]
    fn sparsity_measure_matches_dense_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random(&mut rng, 8, 4);
        let k = random(&mut rng, 8, 4);
        let m = sparsity_measure(&q, &k);
        let scale = 1.0 / 2.0; // sqrt(4)
        for i in 0..8 {
            let scores: Vec<f64> =
                (0..8).map(|j| q.row(i).dot(&k.row(j)) * scale).collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = scores.iter().sum::<f64>() / 8.0;
            assert!((m[i] - (max - mean)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_budget_equals_dense_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let l_q = rng.gen_range(1..20);
            let l_k = rng.gen_range(1..20);
            let dk = rng.gen_range(1..8);
            let dv = rng.gen_range(1..8);
            let q = random(&mut rng, l_q, dk);
            let k = random(&mut rng, l_k, dk);
            let v = random(&mut rng, l_k, dv);
            let sparse = probsparse_attention(&q, &k, &v, l_q);
            let dense = dense_oracle(&q, &k, &v);
            for (a, b) in sparse.iter().zip(dense.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_budget_returns_value_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random(&mut rng, 5, 3);
        let k = random(&mut rng, 7, 3);
        let v = random(&mut rng, 7, 2);
        let out = probsparse_attention(&q, &k, &v, 0);
        let mean = v.mean_axis(ndarray::Axis(0)).unwrap();
        for row in out.rows() {
            for (a, b) in row.iter().zip(mean.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    // Oracle: with one clearly dominant query and u = 1, that row matches
    // dense attention and every other row is the value mean.
    #[test]
    fn single_dominant_query_gets_exact_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q = random(&mut rng, 6, 4);
        for c in 0..4 {
            q[(3, c)] *= 40.0;
        }
        let k = random(&mut rng, 9, 4);
        let v = random(&mut rng, 9, 3);
        let m = sparsity_measure(&q, &k);
        let top = top_u_queries(&m, 1);
        assert_eq!(top, vec![3]);

        let out = probsparse_attention(&q, &k, &v, 1);
        let dense = dense_oracle(&q, &k, &v);
        let mean = v.mean_axis(ndarray::Axis(0)).unwrap();
        for i in 0..6 {
            for c in 0..3 {
                let want = if i == 3 { dense[(i, c)] } else { mean[c] };
                assert!((out[(i, c)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn budget_rule_clamps_to_sequence_length() {
        assert_eq!(query_budget(1, 5.0), 1);
        assert_eq!(query_budget(50, 5.0), 20); // ceil(5 ln 50) = 20
        assert_eq!(query_budget(4, 100.0), 4);
    }
}
