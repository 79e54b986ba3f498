//! Sparse attention in isolation: the sparsity measure ranks queries, the
//! top of the ranking gets exact softmax rows, the rest fall back to the
//! mean value row. With a full budget the result is dense attention.
//!
//! Run with: `cargo run --release --example probsparse_attention`

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sideslip::ml::{probsparse_attention, query_budget, sparsity_measure};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let l = 12;
    let dk = 8;
    let mut q = Array2::from_shape_fn((l, dk), |_| rng.gen_range(-1.0..1.0f64));
    let k = Array2::from_shape_fn((l, dk), |_| rng.gen_range(-1.0..1.0f64));
    let v = Array2::from_shape_fn((l, 4), |_| rng.gen_range(-1.0..1.0f64));

    // make two queries clearly dominant
    for c in 0..dk {
        q[(3, c)] *= 6.0;
        q[(9, c)] *= 5.0;
    }

    let m = sparsity_measure(&q, &k);
    println!("sparsity measure per query:");
    for (i, mi) in m.iter().enumerate() {
        println!("  q{i:<2} {mi:>7.3} {}", "#".repeat((mi * 10.0) as usize));
    }

    let u = query_budget(l, 1.0);
    println!("\nbudget u = ceil(1.0 * ln {l}) = {u}");
    let sparse = probsparse_attention(&q, &k, &v, u);
    let dense = probsparse_attention(&q, &k, &v, l);

    println!("\nrow-wise distance between sparse and dense outputs:");
    for i in 0..l {
        let d: f64 = (0..4).map(|c| (sparse[(i, c)] - dense[(i, c)]).abs()).sum();
        let marker = if d < 1e-12 { "exact" } else { "mean-of-values fallback" };
        println!("  row {i:<2} {d:.2e}  {marker}");
    }

    let max_diff = sparse
        .iter()
        .zip(dense.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("\nsparse vs dense over all rows, max |diff| = {max_diff:.2e}");
}
