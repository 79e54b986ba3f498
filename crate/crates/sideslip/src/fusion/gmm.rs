//! Gaussian mixture fitting by expectation-maximization.
//!
//! Initialization seeds means with k-means++ draws, shares the global data
//! covariance across components and keeps every covariance above a small
//! diagonal floor. The per-iteration mean log-likelihood is returned so
//! callers can assert the EM monotonicity guarantee.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, log_det_from_cholesky, solve_lower};
use crate::error::{Error, Result};

/// Diagonal floor added to every covariance; keeps the minimum eigenvalue
/// at or above this value.
pub const COVARIANCE_FLOOR: f64 = 1e-8;

/// Weight below which a component is pruned.
pub const COLLAPSE_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    /// Mixture weights, summing to one.
    pub weights: Vec<f64>,
    /// Component means, K × dim.
    pub means: Vec<Vec<f64>>,
    /// Component covariances, K × dim × dim, symmetric positive definite.
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn mean_array(&self, k: usize) -> Array1<f64> {
        Array1::from(self.means[k].clone())
    }

    pub fn cov_array(&self, k: usize) -> Array2<f64> {
        let d = self.dim();
        Array2::from_shape_fn((d, d), |(i, j)| self.covariances[k][i][j])
    }

    /// Mean log-likelihood of rows under the mixture.
    pub fn mean_log_likelihood(&self, data: &Array2<f64>) -> Result<f64> {
        let factors = self.factorize()?;
        let mut total = 0.0;
        for row in data.rows() {
            let x = row.to_owned();
            total += log_mixture_density(self, &factors, &x);
        }
        Ok(total / data.nrows() as f64)
    }

    fn factorize(&self) -> Result<Vec<(Array2<f64>, f64)>> {
        (0..self.k())
            .map(|k| {
                let l = cholesky(&self.cov_array(k))?;
                let ld = log_det_from_cholesky(&l);
                Ok((l, ld))
            })
            .collect()
    }
}

fn log_gauss(x: &Array1<f64>, mean: &Array1<f64>, l: &Array2<f64>, log_det: f64) -> f64 {
    let d = x.len() as f64;
    let diff = x - mean;
    let z = solve_lower(l, &diff);
    let quad: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

fn log_mixture_density(
    model: &GmmModel,
    factors: &[(Array2<f64>, f64)],
    x: &Array1<f64>,
) -> f64 {
    let logs: Vec<f64> = (0..model.k())
        .map(|k| {
            model.weights[k].ln()
                + log_gauss(x, &model.mean_array(k), &factors[k].0, factors[k].1)
        })
        .collect();
    log_sum_exp(&logs)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Relative change of mean log-likelihood that stops iteration.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { k: 8, seed: 13, max_iter: 200, tol: 1e-7 }
    }
}

/// k-means++ seeding: the first center uniform, the rest sampled with
/// probability proportional to squared distance from the chosen set.
fn kmeans_pp_centers(data: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Array1<f64>> {
    let n = data.nrows();
    let mut centers: Vec<Array1<f64>> = Vec::with_capacity(k);
    centers.push(data.row(rng.gen_range(0..n)).to_owned());
    let mut d2: Vec<f64> = (0..n)
        .map(|i| {
            let diff = &data.row(i) - &centers[0];
            diff.iter().map(|v| v * v).sum()
        })
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut pick = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if pick < *w {
                    chosen = i;
                    break;
                }
                pick -= w;
            }
            chosen
        };
        let c = data.row(next).to_owned();
        for i in 0..n {
            let diff = &data.row(i) - &c;
            let dist: f64 = diff.iter().map(|v| v * v).sum();
            if dist < d2[i] {
                d2[i] = dist;
            }
        }
        centers.push(c);
    }
    centers
}

fn global_covariance(data: &Array2<f64>) -> Array2<f64> {
    let (n, d) = data.dim();
    let mean = data.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let mut cov = Array2::zeros((d, d));
    for row in data.rows() {
        let diff = &row - &mean;
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += diff[i] * diff[j];
            }
        }
    }
    cov /= n as f64;
    for i in 0..d {
        cov[(i, i)] += COVARIANCE_FLOOR;
    }
    cov
}

/// Fits a `k`-component mixture. Returns the model and the per-iteration
/// mean log-likelihood trace (non-decreasing up to numerical tolerance).
pub fn em_fit(data: &Array2<f64>, opt: &EmOptions) -> Result<(GmmModel, Vec<f64>)> {
    let (n, d) = data.dim();
    if opt.k == 0 {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    if n < 10 * opt.k {
        return Err(Error::Degenerate(format!(
            "{n} rows cannot support {} components (need 10 per component)",
            opt.k
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let centers = kmeans_pp_centers(data, opt.k, &mut rng);
    let shared_cov = global_covariance(data);
    let mut model = GmmModel {
        weights: vec![1.0 / opt.k as f64; opt.k],
        means: centers.iter().map(|c| c.to_vec()).collect(),
        covariances: vec![
            (0..d)
                .map(|i| (0..d).map(|j| shared_cov[(i, j)]).collect())
                .collect();
            opt.k
        ],
    };

    let mut trace = Vec::new();
    let mut resp = Array2::zeros((n, model.k()));
    loop {
        if trace.len() >= opt.max_iter {
            break;
        }
        // E step
        let factors = model.factorize()?;
        let mut total_ll = 0.0;
        if resp.ncols() != model.k() {
            resp = Array2::zeros((n, model.k()));
        }
        for (i, row) in data.rows().into_iter().enumerate() {
            let x = row.to_owned();
            let logs: Vec<f64> = (0..model.k())
                .map(|k| {
                    model.weights[k].ln()
                        + log_gauss(&x, &model.mean_array(k), &factors[k].0, factors[k].1)
                })
                .collect();
            let lse = log_sum_exp(&logs);
            total_ll += lse;
            for k in 0..model.k() {
                resp[(i, k)] = (logs[k] - lse).exp();
            }
        }
        trace.push(total_ll / n as f64);
        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            let cur = trace[trace.len() - 1];
            if (cur - prev).abs() <= opt.tol * (1.0 + prev.abs()) {
                break;
            }
        }

        // M step
        let nk: Vec<f64> = (0..model.k())
            .map(|k| resp.column(k).sum())
            .collect();
        let mut new_weights = Vec::with_capacity(model.k());
        let mut new_means = Vec::with_capacity(model.k());
        let mut new_covs = Vec::with_capacity(model.k());
        let mut pruned = 0usize;
        for k in 0..model.k() {
            let w = nk[k] / n as f64;
            if w < COLLAPSE_WEIGHT {
                pruned += 1;
                log::warn!("mixture component {k} collapsed (weight {w:.2e}); pruning");
                continue;
            }
            let mut mean = Array1::<f64>::zeros(d);
            for (i, row) in data.rows().into_iter().enumerate() {
                mean.scaled_add(resp[(i, k)], &row.to_owned());
            }
            mean /= nk[k];
            let mut cov = Array2::<f64>::zeros((d, d));
            for (i, row) in data.rows().into_iter().enumerate() {
                let diff = &row - &mean;
                let r = resp[(i, k)];
                for a in 0..d {
                    for b in 0..d {
                        cov[(a, b)] += r * diff[a] * diff[b];
                    }
                }
            }
            cov /= nk[k];
            for a in 0..d {
                cov[(a, a)] += COVARIANCE_FLOOR;
            }
            new_weights.push(w);
            new_means.push(mean.to_vec());
            new_covs.push((0..d).map(|i| (0..d).map(|j| cov[(i, j)]).collect()).collect());
        }
        if new_weights.is_empty() {
            return Err(Error::Degenerate("every mixture component collapsed".into()));
        }
        if pruned > 0 {
            let total: f64 = new_weights.iter().sum();
            for w in &mut new_weights {
                *w /= total;
            }
        }
        model = GmmModel { weights: new_weights, means: new_means, covariances: new_covs };
    }

    debug_assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    fn blob(
        rng: &mut ChaCha8Rng,
        n: usize,
        mean: &[f64],
        std: f64,
    ) -> Vec<Vec<f64>> {
        let normal = Normal::new(0.0, std).unwrap();
        (0..n)
            .map(|_| mean.iter().map(|m| m + normal.sample(rng)).collect())
            .collect()
    }

    fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
        let d = rows[0].len();
        Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j])
    }

    // Oracle: a single component has the closed-form ML solution - sample
    // mean and (biased) sample covariance.
    #[test]
    fn single_component_matches_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = blob(&mut rng, 400, &[0.5, -1.0, 2.0], 0.7);
        let data = to_matrix(&rows);
        let (model, trace) = em_fit(
            &data,
            &EmOptions { k: 1, seed: 2, max_iter: 50, tol: 1e-12 },
        )
        .unwrap();

        let n = data.nrows() as f64;
        let mean = data.mean_axis(ndarray::Axis(0)).unwrap();
        for (a, b) in model.means[0].iter().zip(mean.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        let mut cov = Array2::<f64>::zeros((3, 3));
        for row in data.rows() {
            let d = &row - &mean;
            for i in 0..3 {
                for j in 0..3 {
                    cov[(i, j)] += d[i] * d[j] / n;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = cov[(i, j)] + if i == j { COVARIANCE_FLOOR } else { 0.0 };
                assert_relative_eq!(model.covariances[0][i][j], want, epsilon = 1e-9);
            }
        }
        assert_eq!(model.weights, vec![1.0]);
        assert!(!trace.is_empty());
    }

    // Oracle: generative recovery of a well-separated two-component mixture.
    #[test]
    fn two_component_recovery_within_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu_a = [2.0, -2.0, 1.0, 0.5, -1.5, 2.5, 0.8];
        let mu_b = [-2.0, 2.0, -1.0, -0.5, 1.5, -2.5, -0.8];
        let mut rows = blob(&mut rng, 700, &mu_a, 0.4);
        rows.extend(blob(&mut rng, 700, &mu_b, 0.4));
        let data = to_matrix(&rows);
        let (model, _) = em_fit(&data, &EmOptions { k: 2, ..EmOptions::default() }).unwrap();

        // match components to truth by the sign of the first coordinate
        let (fit_a, fit_b) = if model.means[0][0] > 0.0 {
            (&model.means[0], &model.means[1])
        } else {
            (&model.means[1], &model.means[0])
        };
        for (truth, fitted) in [(&mu_a[..], fit_a), (&mu_b[..], fit_b)] {
            for (t, f) in truth.iter().zip(fitted.iter()) {
                assert!(
                    (t - f).abs() <= 0.05 * t.abs().max(1.0),
                    "mean component {t} recovered as {f}"
                );
            }
        }
        for w in &model.weights {
            assert_relative_eq!(w, &0.5, max_relative = 0.1);
        }
    }

    #[test]
    fn log_likelihood_is_monotone_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = blob(&mut rng, 300, &[0.0, 0.0], 1.0);
        rows.extend(blob(&mut rng, 300, &[3.0, -2.0], 0.5));
        rows.extend(blob(&mut rng, 200, &[-3.0, 2.0], 0.8));
        let data = to_matrix(&rows);
        let (_, trace) = em_fit(
            &data,
            &EmOptions { k: 3, seed: 5, max_iter: 100, tol: 1e-12 },
        )
        .unwrap();
        assert!(trace.len() > 3);
        for pair in trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "log-likelihood decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn fit_is_deterministic_for_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows = blob(&mut rng, 250, &[1.0, 2.0], 1.2);
        let data = to_matrix(&rows);
        let opt = EmOptions { k: 2, seed: 9, max_iter: 60, tol: 1e-10 };
        let (a, ta) = em_fit(&data, &opt).unwrap();
        let (b, tb) = em_fit(&data, &opt).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let data = Array2::zeros((19, 2));
        assert!(em_fit(&data, &EmOptions { k: 2, ..EmOptions::default() }).is_err());
    }
}
