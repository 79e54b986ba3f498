//! Gaussian mixture regression: condition the fitted joint density on the
//! six observed channels and report the mode of the resulting 1-D mixture.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::gmm::{log_sum_exp, GmmModel};
use super::linalg::{cholesky, log_det_from_cholesky, solve_lower, solve_spd};
use super::FeatureNorm;
use crate::data::FusionInput;
use crate::error::{Error, Result};
use crate::ml::checkpoint::{read_json, write_json, CHECKPOINT_VERSION};

/// Mode-finding grid resolution over the conditional support.
const MODE_GRID: usize = 512;
/// Weight concentration above which the dominant component's conditional
/// mean is returned directly.
const CONCENTRATION: f64 = 0.999;

/// A fitted joint mixture over `(h, y)` with the input standardization used
/// during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFusion {
    pub gmm: GmmModel,
    pub norm: FeatureNorm,
}

/// Per-component conditional pieces of `p(y | h)`.
struct Conditional {
    /// Posterior component weights given `h`, summing to one.
    weights: Vec<f64>,
    /// Conditional means.
    means: Vec<f64>,
    /// Conditional standard deviations.
    stds: Vec<f64>,
}

fn condition(model: &GmmModel, h: &[f64; 6]) -> Result<Conditional> {
    let d = model.dim();
    if d != 7 {
        return Err(Error::Config(format!(
            "regression expects a 7-dimensional joint mixture, got {d}"
        )));
    }
    let hx = Array1::from(h.to_vec());
    let mut log_w = Vec::with_capacity(model.k());
    let mut means = Vec::with_capacity(model.k());
    let mut vars = Vec::with_capacity(model.k());
    for k in 0..model.k() {
        let mean = model.mean_array(k);
        let cov = model.cov_array(k);
        let mu_h = mean.slice(ndarray::s![0..6]).to_owned();
        let mu_y = mean[6];
        let sigma_hh = cov.slice(ndarray::s![0..6, 0..6]).to_owned();
        let sigma_hy = cov.slice(ndarray::s![0..6, 6]).to_owned();
        let sigma_yy = cov[(6, 6)];

        let l = cholesky(&sigma_hh)?;
        let diff = &hx - &mu_h;
        // marginal density of h under this component
        let z = solve_lower(&l, &diff);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        let log_det = log_det_from_cholesky(&l);
        log_w.push(
            model.weights[k].ln()
                - 0.5 * (6.0 * (2.0 * std::f64::consts::PI).ln() + log_det + quad),
        );
        // conditional moments
        let solved = solve_spd(&l, &sigma_hy);
        means.push(mu_y + solved.dot(&diff));
        vars.push((sigma_yy - solved.dot(&sigma_hy)).max(1e-12));
    }
    let lse = log_sum_exp(&log_w);
    if !lse.is_finite() {
        return Err(Error::Numerical(
            "all mixture responsibilities underflowed while conditioning".into(),
        ));
    }
    Ok(Conditional {
        weights: log_w.iter().map(|lw| (lw - lse).exp()).collect(),
        means,
        stds: vars.iter().map(|v| v.sqrt()).collect(),
    })
}

fn log_normal_pdf(y: f64, mean: f64, std: f64) -> f64 {
    let z = (y - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Conditional density `p(y | h)` of an already-standardized input.
pub fn conditional_density(model: &GmmModel, h: &[f64; 6], y: f64) -> Result<f64> {
    let c = condition(model, h)?;
    let logs: Vec<f64> = (0..c.weights.len())
        .map(|k| c.weights[k].ln() + log_normal_pdf(y, c.means[k], c.stds[k]))
        .collect();
    Ok(log_sum_exp(&logs).exp())
}

/// Mode of the 1-D conditional mixture.
///
/// Candidates are every component's conditional mean plus a fixed grid over
/// the span of those means widened by three of the largest conditional
/// standard deviations; when the posterior weight concentrates on a single
/// component its conditional mean is returned directly.
pub fn gf_fuse(model: &GmmModel, h: &[f64; 6]) -> Result<f64> {
    let c = condition(model, h)?;
    let k = c.weights.len();
    let (best_k, best_w) = c
        .weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("at least one component");
    if *best_w > CONCENTRATION || k == 1 {
        return Ok(c.means[best_k]);
    }

    let density = |y: f64| -> f64 {
        let logs: Vec<f64> = (0..k)
            .map(|j| c.weights[j].ln() + log_normal_pdf(y, c.means[j], c.stds[j]))
            .collect();
        log_sum_exp(&logs)
    };

    let lo_mean = c.means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_mean = c.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_std = c.stds.iter().cloned().fold(0.0f64, f64::max);
    let lo = lo_mean - 3.0 * max_std;
    let hi = hi_mean + 3.0 * max_std;

    let mut best = (f64::NEG_INFINITY, c.means[best_k]);
    let mut consider = |y: f64| {
        let p = density(y);
        if p > best.0 {
            best = (p, y);
        }
    };
    for m in &c.means {
        consider(*m);
    }
    for i in 0..MODE_GRID {
        let y = lo + (hi - lo) * i as f64 / (MODE_GRID - 1) as f64;
        consider(y);
    }
    Ok(best.1)
}

/// Full prediction from a raw fusion input: standardize, condition, take
/// the mode.
pub fn gf_predict(gf: &GaussianFusion, h: &FusionInput) -> Result<f64> {
    gf_fuse(&gf.gmm, &gf.norm.apply(h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GfCheckpoint {
    pub version: u32,
    pub kind: String,
    pub model: GaussianFusion,
}

pub fn save_gf(path: &Path, gf: &GaussianFusion) -> Result<()> {
    write_json(
        path,
        &GfCheckpoint { version: CHECKPOINT_VERSION, kind: "gf".into(), model: gf.clone() },
    )
}

pub fn load_gf(path: &Path) -> Result<GaussianFusion> {
    let ckpt: GfCheckpoint = read_json(path)?;
    if ckpt.kind != "gf" {
        return Err(Error::Config(format!("expected gf checkpoint, got `{}`", ckpt.kind)));
    }
    Ok(ckpt.model)
}

/// Assembles the joint data matrix `(standardized h, y)` for mixture
/// fitting.
pub fn joint_matrix(rows: &[(FusionInput, f64)], norm: &FeatureNorm) -> Array2<f64> {
    let n = rows.len();
    let mut m = Array2::zeros((n, 7));
    for (i, (h, y)) in rows.iter().enumerate() {
        let hs = norm.apply(h);
        for (c, v) in hs.iter().enumerate() {
            m[(i, c)] = *v;
        }
        m[(i, 6)] = *y;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::gmm::{em_fit, EmOptions};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn single_gaussian_model(rng: &mut ChaCha8Rng) -> GmmModel {
        // random SPD covariance in 7 dims
        let b = Array2::from_shape_fn((7, 7), |_| rng.gen_range(-0.4..0.4));
        let mut cov = b.t().dot(&b);
        for i in 0..7 {
            cov[(i, i)] += 0.8;
        }
        GmmModel {
            weights: vec![1.0],
            means: vec![(0..7).map(|_| rng.gen_range(-1.0..1.0)).collect()],
            covariances: vec![
                (0..7).map(|i| (0..7).map(|j| cov[(i, j)]).collect()).collect()
            ],
        }
    }

    // Oracle: closed-form Gaussian conditioning for K = 1.
    #[test]
    fn single_component_equals_conditional_mean_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let model = single_gaussian_model(&mut rng);
            let h: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));

            let mean = model.mean_array(0);
            let cov = model.cov_array(0);
            let mu_h = mean.slice(ndarray::s![0..6]).to_owned();
            let sigma_hh = cov.slice(ndarray::s![0..6, 0..6]).to_owned();
            let sigma_hy = cov.slice(ndarray::s![0..6, 6]).to_owned();
            let l = cholesky(&sigma_hh).unwrap();
            let diff = &Array1::from(h.to_vec()) - &mu_h;
            let want = mean[6] + solve_spd(&l, &sigma_hy).dot(&diff);

            assert_relative_eq!(gf_fuse(&model, &h).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_components_reduce_to_the_single_component_answer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let single = single_gaussian_model(&mut rng);
        let tripled = GmmModel {
            weights: vec![1.0 / 3.0; 3],
            means: vec![single.means[0].clone(); 3],
            covariances: vec![single.covariances[0].clone(); 3],
        };
        let h: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
        assert_relative_eq!(
            gf_fuse(&tripled, &h).unwrap(),
            gf_fuse(&single, &h).unwrap(),
            epsilon = 1e-9
        );
    }

    // Oracle: dense 1-D scan of the conditional density.
    #[test]
    fn unimodal_conditional_mode_matches_density_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // two nearby components produce a (typically) unimodal conditional
        let base = single_gaussian_model(&mut rng);
        let mut second = base.means[0].clone();
        second[6] += 0.05;
        let model = GmmModel {
            weights: vec![0.6, 0.4],
            means: vec![base.means[0].clone(), second],
            covariances: vec![base.covariances[0].clone(); 2],
        };
        let h: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
        let mode = gf_fuse(&model, &h).unwrap();

        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..40_000 {
            let y = -4.0 + 8.0 * i as f64 / 39_999.0;
            let p = conditional_density(&model, &h, y).unwrap();
            if p > best.0 {
                best = (p, y);
            }
        }
        assert!(
            (mode - best.1).abs() < 1e-2,
            "grid mode {mode:.5} vs scan {:.5}",
            best.1
        );
        // and the conditional mean of a unimodal mixture is close by
        let c_density = conditional_density(&model, &h, mode).unwrap();
        assert!(c_density > 0.0);
    }

    // Quadrature: the conditional density must integrate to one.
    #[test]
    fn conditional_density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        // fit a small mixture on synthetic joint data
        let n = 600;
        let mut data = Array2::zeros((n, 7));
        for i in 0..n {
            let cluster = i % 2;
            for j in 0..6 {
                data[(i, j)] =
                    normal.sample(&mut rng) * 0.5 + if cluster == 0 { 1.0 } else { -1.0 };
            }
            data[(i, 6)] = 0.3 * data[(i, 0)] + 0.1 * normal.sample(&mut rng);
        }
        let (model, _) = em_fit(&data, &EmOptions { k: 2, ..EmOptions::default() }).unwrap();
        let h: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));

        // trapezoid over +-10 of the largest conditional scale
        let c = condition(&model, &h).unwrap();
        let lo = c.means.iter().cloned().fold(f64::INFINITY, f64::min)
            - 10.0 * c.stds.iter().cloned().fold(0.0f64, f64::max);
        let hi = c.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            + 10.0 * c.stds.iter().cloned().fold(0.0f64, f64::max);
        let steps = 20_000;
        let dx = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        let mut prev = conditional_density(&model, &h, lo).unwrap();
        for i in 1..=steps {
            let y = lo + i as f64 * dx;
            let cur = conditional_density(&model, &h, y).unwrap();
            integral += 0.5 * (prev + cur) * dx;
            prev = cur;
        }
        assert!(
            (integral - 1.0).abs() < 1e-6,
            "conditional density integrates to {integral}"
        );
    }
}
