//! Small dense symmetric linear algebra for the mixture code: Cholesky
//! factorization, triangular solves and log-determinants.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l: Array2<f64> = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "matrix not positive definite at pivot {i} (value {sum:.3e})"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L z = b` for lower-triangular `L`.
pub fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut z = Array1::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * z[k];
        }
        z[i] = sum / l[(i, i)];
    }
    z
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// Solves `A x = b` through the Cholesky factor of symmetric PD `A`.
pub fn solve_spd(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// `ln det A` from its Cholesky factor.
pub fn log_det_from_cholesky(l: &Array2<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let b = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        let mut a = b.t().dot(&b);
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs_the_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 5, 7] {
            let a = random_spd(&mut rng, n);
            let l = cholesky(&a).unwrap();
            let rec = l.dot(&l.t());
            for (x, y) in a.iter().zip(rec.iter()) {
                assert_relative_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn spd_solve_inverts_the_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(&mut rng, 6);
        let b = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
        let l = cholesky(&a).unwrap();
        let x = solve_spd(&l, &b);
        let back = a.dot(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert_relative_eq!(u, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_det_matches_direct_2x2() {
        let a = array![[2.0, 0.3], [0.3, 1.5]];
        let l = cholesky(&a).unwrap();
        let det: f64 = 2.0 * 1.5 - 0.09;
        assert_relative_eq!(log_det_from_cholesky(&l), det.ln(), epsilon = 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_err());
    }
}
