//! Noise-covariance estimation for the wheel-speed filter.
//!
//! `R` comes from measurement-error statistics on the training split. The
//! sideslip component compares the raw wheel-speed estimate against ground
//! truth; the yaw component has no stored ground truth, so the sensor noise
//! is estimated from the residual of a centered moving average (variance
//! corrected for the window's own noise content). `Q` is diagonal and picked
//! by a coarse grid search minimizing validation MAE.

use serde::{Deserialize, Serialize};

use super::kf::{run_vmm2, KfConfig, Mat2};
use super::vmm2_raw;
use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::sim::VehicleGeometry;
use crate::RAD2DEG;

/// Centered moving-average window for yaw-noise estimation (samples).
const YAW_SMOOTH_WINDOW: usize = 11;

/// Estimates the 2x2 measurement covariance on the training split.
pub fn estimate_measurement_noise(scenarios: &[Scenario]) -> Result<Mat2> {
    let half = YAW_SMOOTH_WINDOW / 2;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for s in scenarios {
        let yaw: Vec<f64> = s.frames.iter().map(|f| f.yaw_rate_obd).collect();
        for i in half..s.len().saturating_sub(half) {
            let Ok(beta_wheel) = vmm2_raw(&s.frames[i]) else { continue };
            let e_beta = beta_wheel - s.beta_gt[i];
            let window = &yaw[i - half..=i + half];
            let avg = window.iter().sum::<f64>() / window.len() as f64;
            pairs.push((e_beta, yaw[i] - avg));
        }
    }
    if pairs.len() < 100 {
        return Err(Error::Degenerate(format!(
            "only {} samples available for measurement-noise estimation",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_b = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut var_b = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for (b, y) in &pairs {
        var_b += (b - mean_b) * (b - mean_b);
        var_y += (y - mean_y) * (y - mean_y);
        cov += (b - mean_b) * (y - mean_y);
    }
    var_b /= n;
    var_y /= n;
    cov /= n;
    // the moving-average residual retains (w-1)/w of the noise variance
    let w = YAW_SMOOTH_WINDOW as f64;
    var_y *= w / (w - 1.0);

    let floor = 1e-12;
    Ok([[var_b.max(floor), cov], [cov, var_y.max(floor)]])
}

/// Candidate grid for the diagonal process noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub q_beta: Vec<f64>,
    pub q_yaw: Vec<f64>,
}

impl Default for QGrid {
    fn default() -> Self {
        QGrid {
            q_beta: vec![1e-8, 1e-7, 1e-6, 1e-5, 1e-4],
            q_yaw: vec![1e-7, 1e-6, 1e-5, 1e-4, 1e-3],
        }
    }
}

/// Picks the diagonal `Q` minimizing sideslip MAE on the validation split.
/// Returns the fitted filter configuration and the winning MAE in degrees.
pub fn fit_process_noise(
    geometry: &VehicleGeometry,
    rate_hz: f64,
    r: Mat2,
    grid: &QGrid,
    val: &[Scenario],
) -> Result<(KfConfig, f64)> {
    if val.is_empty() {
        return Err(Error::Degenerate("empty validation split for Q fit".into()));
    }
    let mut best: Option<(KfConfig, f64)> = None;
    for &qb in &grid.q_beta {
        for &qy in &grid.q_yaw {
            let cfg = KfConfig::new(*geometry, rate_hz, [[qb, 0.0], [0.0, qy]], r);
            let mut abs_sum = 0.0;
            let mut count = 0usize;
            for s in val {
                let est = run_vmm2(s, &cfg)?;
                for (e, gt) in est.iter().zip(&s.beta_gt) {
                    abs_sum += (e.beta - gt).abs();
                    count += 1;
                }
            }
            let mae_deg = abs_sum / count as f64 * RAD2DEG;
            let better = match &best {
                None => true,
                Some((_, b)) => mae_deg < *b,
            };
            if better {
                best = Some((cfg, mae_deg));
            }
        }
    }
    let (cfg, mae) = best.expect("non-empty grid");
    log::info!(
        "process-noise fit: Q = diag({:.1e}, {:.1e}), val MAE {:.3} deg",
        cfg.q[0][0],
        cfg.q[1][1],
        mae
    );
    Ok((cfg, mae))
}
