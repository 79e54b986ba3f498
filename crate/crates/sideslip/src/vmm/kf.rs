//! Kalman filter refining the wheel-speed sideslip estimate.
//!
//! System model: linear single-track dynamics in (sideslip, yaw rate),
//! discretized by forward Euler each step with the current speed. Both
//! states are measured directly (wheel-speed sideslip and the onboard yaw
//! rate), so the measurement map is the identity.

use serde::{Deserialize, Serialize};

use super::vmm2_raw;
use crate::data::{EstimateWithUncertainty, Scenario};
use crate::error::{Error, Result};
use crate::sim::VehicleGeometry;

pub type Mat2 = [[f64; 2]; 2];
pub type Vec2 = [f64; 2];

/// Filter state: estimate vector and covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KfState {
    /// `[beta (rad), yaw_rate (rad/s)]`.
    pub s: Vec2,
    /// Covariance, kept symmetric positive semi-definite.
    pub p: Mat2,
}

/// Filter configuration: plant parameters for `A(v)`/`B(v)` plus the noise
/// covariances and the step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfConfig {
    pub geometry: VehicleGeometry,
    pub dt: f64,
    pub q: Mat2,
    pub r: Mat2,
}

/// Speed below which the transition matrix is frozen; the single-track
/// coefficients blow up as v -> 0.
const MIN_MODEL_SPEED: f64 = 1.0;

impl KfConfig {
    pub fn new(geometry: VehicleGeometry, rate_hz: f64, q: Mat2, r: Mat2) -> Self {
        KfConfig { geometry, dt: 1.0 / rate_hz, q, r }
    }

    /// Discrete transition matrix at longitudinal speed `v`.
    pub fn a_matrix(&self, v: f64) -> Mat2 {
        let g = &self.geometry;
        let v = v.max(MIN_MODEL_SPEED);
        let (cf, cr, m, iz) = (g.c_f, g.c_r, g.mass, g.i_z);
        let (lf, lr) = (g.l_f(), g.l_r);
        let a11 = -(cf + cr) / (m * v);
        let a12 = (cr * lr - cf * lf) / (m * v * v) - 1.0;
        let a21 = (cr * lr - cf * lf) / iz;
        let a22 = -(cf * lf * lf + cr * lr * lr) / (iz * v);
        [
            [1.0 + self.dt * a11, self.dt * a12],
            [self.dt * a21, 1.0 + self.dt * a22],
        ]
    }

    /// Discrete control gain on the Ackermann angle at speed `v`.
    pub fn b_vector(&self, v: f64) -> Vec2 {
        let g = &self.geometry;
        let v = v.max(MIN_MODEL_SPEED);
        [
            self.dt * g.c_f / (g.mass * v),
            self.dt * g.c_f * g.l_f() / g.i_z,
        ]
    }

    /// Initial state from the first measurement.
    pub fn initial_state(&self, z: Vec2) -> KfState {
        KfState { s: z, p: self.r }
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn symmetrize(a: &Mat2) -> Mat2 {
    let off = 0.5 * (a[0][1] + a[1][0]);
    [[a[0][0], off], [off, a[1][1]]]
}

fn mat_vec(a: &Mat2, v: &Vec2) -> Vec2 {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}

fn invert(a: &Mat2) -> Result<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let (lo, hi) = sym_eigenvalues(a);
    if det <= 0.0 || lo <= 0.0 || hi / lo > 1e14 {
        return Err(Error::SingularInnovation {
            cond: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    Ok([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

/// Intermediate quantities of one predict/update cycle.
pub struct KfStepDetail {
    pub state: KfState,
    /// Predicted state before the update.
    pub predicted: KfState,
    /// Innovation `z - s_pred`.
    pub innovation: Vec2,
    /// Predicted innovation covariance `P_pred + R`.
    pub innovation_cov: Mat2,
}

/// One predict/update cycle with full detail (used by the whiteness checks).
pub fn kf_step_detail(
    state: &KfState,
    cfg: &KfConfig,
    v: f64,
    theta_a: f64,
    z: Vec2,
) -> Result<KfStepDetail> {
    if !(z[0].is_finite() && z[1].is_finite()) {
        return Err(Error::Numerical(format!("non-finite measurement {z:?}")));
    }
    let a = cfg.a_matrix(v);
    let b = cfg.b_vector(v);

    // predict
    let s_pred = [
        mat_vec(&a, &state.s)[0] + b[0] * theta_a,
        mat_vec(&a, &state.s)[1] + b[1] * theta_a,
    ];
    let p_pred = symmetrize(&mat_add(&mat_mul(&mat_mul(&a, &state.p), &transpose(&a)), &cfg.q));

    // update with identity measurement map
    let s_cov = mat_add(&p_pred, &cfg.r);
    let s_inv = invert(&s_cov)?;
    let k = mat_mul(&p_pred, &s_inv);
    let innovation = [z[0] - s_pred[0], z[1] - s_pred[1]];
    let s_post = [
        s_pred[0] + mat_vec(&k, &innovation)[0],
        s_pred[1] + mat_vec(&k, &innovation)[1],
    ];
    // Joseph form keeps P PSD under roundoff
    let i_k = [[1.0 - k[0][0], -k[0][1]], [-k[1][0], 1.0 - k[1][1]]];
    let p_post = symmetrize(&mat_add(
        &mat_mul(&mat_mul(&i_k, &p_pred), &transpose(&i_k)),
        &mat_mul(&mat_mul(&k, &cfg.r), &transpose(&k)),
    ));

    Ok(KfStepDetail {
        state: KfState { s: s_post, p: p_post },
        predicted: KfState { s: s_pred, p: p_pred },
        innovation,
        innovation_cov: s_cov,
    })
}

/// One predict/update cycle. `z = [beta_wheel, yaw_obd]`.
pub fn kf_step(state: &KfState, cfg: &KfConfig, v: f64, theta_a: f64, z: Vec2) -> Result<KfState> {
    Ok(kf_step_detail(state, cfg, v, theta_a, z)?.state)
}

/// Posterior output of the filtered wheel-speed model at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vmm2Output {
    /// Sideslip estimate (rad).
    pub beta: f64,
    /// Yaw-rate estimate (rad/s).
    pub yaw_rate: f64,
    /// Sideslip variance `P[0][0]`.
    pub delta: f64,
}

impl Vmm2Output {
    pub fn estimate(&self) -> EstimateWithUncertainty {
        EstimateWithUncertainty::new(self.beta, self.delta)
    }
}

/// Runs the filtered wheel-speed model over a full scenario, exposing both
/// posterior states.
///
/// Below 0.5 m/s the raw sideslip estimate is undefined; the filter then
/// re-emits the last valid estimate with its uncertainty inflated tenfold
/// so fusion steers away from it.
pub fn run_vmm2_full(scenario: &Scenario, cfg: &KfConfig) -> Result<Vec<Vmm2Output>> {
    let mut out = Vec::with_capacity(scenario.len());
    let mut state: Option<KfState> = None;
    let mut last_valid: Option<Vmm2Output> = None;

    for frame in &scenario.frames {
        let theta_a = frame.theta_sw / cfg.geometry.r_s;
        match vmm2_raw(frame) {
            Ok(beta_wheel) => {
                let z = [beta_wheel, frame.yaw_rate_obd];
                let next = match &state {
                    None => cfg.initial_state(z),
                    Some(s) => kf_step(s, cfg, frame.v_s, theta_a, z)?,
                };
                let est = Vmm2Output {
                    beta: next.s[0],
                    yaw_rate: next.s[1],
                    delta: next.p[0][0],
                };
                state = Some(next);
                last_valid = Some(est);
                out.push(est);
            }
            Err(Error::Standstill { .. }) => {
                let held = last_valid.unwrap_or(Vmm2Output {
                    beta: 0.0,
                    yaw_rate: frame.yaw_rate_obd,
                    delta: cfg.r[0][0],
                });
                out.push(Vmm2Output { delta: held.delta * 10.0, ..held });
            }
            Err(e) => return Err(e),
        }
    }
    debug_assert_eq!(out.len(), scenario.len());
    Ok(out)
}

/// Sideslip estimates with uncertainty from the filtered wheel-speed model.
pub fn run_vmm2(scenario: &Scenario, cfg: &KfConfig) -> Result<Vec<EstimateWithUncertainty>> {
    Ok(run_vmm2_full(scenario, cfg)?.iter().map(Vmm2Output::estimate).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cfg(q: f64, r: f64) -> KfConfig {
        KfConfig::new(
            VehicleGeometry::default(),
            50.0,
            [[q, 0.0], [0.0, q]],
            [[r, 0.0], [0.0, r]],
        )
    }

    // Oracle: scalar-filter limit. With Q = 0, R -> 0 and a diffuse prior,
    // the gain goes to one and the posterior lands on the measurement.
    #[test]
    fn tiny_r_trusts_the_measurement() {
        let cfg = cfg(0.0, 1e-12);
        let state = KfState { s: [0.0, 0.0], p: [[1.0, 0.0], [0.0, 1.0]] };
        let z = [0.05, 0.3];
        let next = kf_step(&state, &cfg, 15.0, 0.01, z).unwrap();
        assert_relative_eq!(next.s[0], z[0], epsilon = 1e-8);
        assert_relative_eq!(next.s[1], z[1], epsilon = 1e-8);
    }

    #[test]
    fn huge_r_keeps_the_prior() {
        let cfg = cfg(0.0, 1e9);
        let state = KfState { s: [0.02, 0.1], p: [[1e-6, 0.0], [0.0, 1e-6]] };
        let detail = kf_step_detail(&state, &cfg, 15.0, 0.0, [0.5, -0.5]).unwrap();
        assert_relative_eq!(detail.state.s[0], detail.predicted.s[0], epsilon = 1e-9);
        assert_relative_eq!(detail.state.s[1], detail.predicted.s[1], epsilon = 1e-9);
    }

    #[test]
    fn update_never_inflates_covariance() {
        let cfg = cfg(1e-6, 1e-4);
        let mut state = cfg.initial_state([0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let detail = kf_step_detail(
                &state,
                &cfg,
                12.0,
                rng.gen_range(-0.05..0.05),
                [rng.gen_range(-0.1..0.1), rng.gen_range(-0.5..0.5)],
            )
            .unwrap();
            let tr_post = detail.state.p[0][0] + detail.state.p[1][1];
            let tr_pred = detail.predicted.p[0][0] + detail.predicted.p[1][1];
            assert!(tr_post <= tr_pred + 1e-15);
            state = detail.state;
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd_over_many_steps() {
        let cfg = cfg(1e-7, 1e-4);
        let mut state = cfg.initial_state([0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..20_000 {
            let v = 5.0 + 10.0 * ((i as f64) * 0.001).sin().abs();
            state = kf_step(
                &state,
                &cfg,
                v,
                rng.gen_range(-0.1..0.1),
                [rng.gen_range(-0.2..0.2), rng.gen_range(-0.8..0.8)],
            )
            .unwrap();
            assert_eq!(state.p[0][1], state.p[1][0]);
            let (lo, _) = sym_eigenvalues(&state.p);
            assert!(lo >= -1e-15, "covariance lost PSD: min eig {lo:.3e}");
        }
    }

    // Whiteness: drive the filter with data generated by its own model and
    // compare sample innovation variance against the predicted covariance.
    #[test]
    fn innovations_are_white_on_self_consistent_data() {
        let cfg = cfg(1e-6, 4e-4);
        let v = 15.0;
        let a = cfg.a_matrix(v);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let q_std = 1e-3;
        let r_std = 2e-2;

        let mut truth = [0.0, 0.0];
        let mut state = cfg.initial_state([0.0, 0.0]);
        let mut innovations: Vec<Vec2> = Vec::new();
        let mut predicted_var = [0.0, 0.0];
        for i in 0..40_000 {
            truth = [
                a[0][0] * truth[0] + a[0][1] * truth[1] + q_std * normal.sample(&mut rng),
                a[1][0] * truth[0] + a[1][1] * truth[1] + q_std * normal.sample(&mut rng),
            ];
            let z = [
                truth[0] + r_std * normal.sample(&mut rng),
                truth[1] + r_std * normal.sample(&mut rng),
            ];
            let detail = kf_step_detail(&state, &cfg, v, 0.0, z).unwrap();
            state = detail.state;
            if i >= 2000 {
                innovations.push(detail.innovation);
                predicted_var = [detail.innovation_cov[0][0], detail.innovation_cov[1][1]];
            }
        }
        for dim in 0..2 {
            let n = innovations.len() as f64;
            let mean = innovations.iter().map(|x| x[dim]).sum::<f64>() / n;
            let var = innovations.iter().map(|x| (x[dim] - mean).powi(2)).sum::<f64>() / n;
            assert!(
                (var - predicted_var[dim]).abs() <= 0.10 * predicted_var[dim],
                "dim {dim}: sample var {var:.4e} vs predicted {:.4e}",
                predicted_var[dim]
            );
            assert!(mean.abs() < 3.0 * (var / n).sqrt() + 1e-6);
        }
    }

    #[test]
    fn singular_innovation_reports_condition_number() {
        let cfg = KfConfig::new(
            VehicleGeometry::default(),
            50.0,
            [[0.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 0.0]],
        );
        let state = KfState { s: [0.0, 0.0], p: [[0.0; 2]; 2] };
        match kf_step(&state, &cfg, 10.0, 0.0, [0.0, 0.0]) {
            Err(Error::SingularInnovation { .. }) => {}
            other => panic!("expected singular innovation, got {other:?}"),
        }
    }
}
