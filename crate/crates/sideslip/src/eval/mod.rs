//! Evaluation: error metrics in degrees, speed/lateral-acceleration
//! conditioning, binned error curves, residual-correlation statistics and
//! machine-readable reports.
//!
//! All evaluation happens at the window-end time step only; forecast steps
//! exist for training but never enter the reported numbers.

pub mod ablate;
pub mod svg;
pub mod trace;

pub use ablate::{run_ablation, AblationRow};
pub use trace::{write_trace_csv, TraceSeries};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::t_test_p_value;
use crate::vmm::ResidualRecord;
use crate::{KMH2MS, RAD2DEG};

/// Aggregate error metrics, reported in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae_deg: f64,
    pub mse_deg2: f64,
    pub me_deg: f64,
}

/// MAE, MSE and maximum error between predictions and ground truth, both in
/// radians; the report converts to degrees.
pub fn compute_metrics(pred: &[f64], gt: &[f64]) -> Result<Metrics> {
    if pred.len() != gt.len() {
        return Err(Error::Misaligned {
            what: "metric inputs".into(),
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Degenerate("empty metric input".into()));
    }
    let n = pred.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut max_abs: f64 = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        let e = (p - g) * RAD2DEG;
        abs_sum += e.abs();
        sq_sum += e * e;
        max_abs = max_abs.max(e.abs());
    }
    Ok(Metrics { mae_deg: abs_sum / n, mse_deg2: sq_sum / n, me_deg: max_abs })
}

/// The four operating conditions: speed against 20 km/h, lateral
/// acceleration magnitude against 3 m/s².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    LowSpeedLowAy,
    LowSpeedHighAy,
    HighSpeedLowAy,
    HighSpeedHighAy,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::LowSpeedLowAy,
        Condition::LowSpeedHighAy,
        Condition::HighSpeedLowAy,
        Condition::HighSpeedHighAy,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Condition::LowSpeedLowAy => "v<=20km/h & |a_y|<=3",
            Condition::LowSpeedHighAy => "v<=20km/h & |a_y|>3",
            Condition::HighSpeedLowAy => "v>20km/h & |a_y|<=3",
            Condition::HighSpeedHighAy => "v>20km/h & |a_y|>3",
        }
    }

    pub fn classify(v_s_ms: f64, a_y: f64) -> Condition {
        let slow = v_s_ms <= 20.0 * KMH2MS;
        let gentle = a_y.abs() <= 3.0;
        match (slow, gentle) {
            (true, true) => Condition::LowSpeedLowAy,
            (true, false) => Condition::LowSpeedHighAy,
            (false, true) => Condition::HighSpeedLowAy,
            (false, false) => Condition::HighSpeedHighAy,
        }
    }
}

/// Exclusive membership masks for the four conditions; together they
/// partition the sample set.
pub fn conditional_bins(v_s_ms: &[f64], a_y: &[f64]) -> [Vec<bool>; 4] {
    debug_assert_eq!(v_s_ms.len(), a_y.len());
    let mut masks = [
        vec![false; v_s_ms.len()],
        vec![false; v_s_ms.len()],
        vec![false; v_s_ms.len()],
        vec![false; v_s_ms.len()],
    ];
    for (i, (&v, &a)) in v_s_ms.iter().zip(a_y).enumerate() {
        let c = Condition::classify(v, a);
        let idx = Condition::ALL.iter().position(|x| *x == c).expect("one of four");
        masks[idx][i] = true;
    }
    masks
}

/// One bin of the error-vs-ground-truth curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    /// Lower edge of the bin (degrees); bins are anchored at zero.
    pub lo_deg: f64,
    pub mae_deg: f64,
    /// Share of all samples falling in this bin, percent.
    pub share_pct: f64,
    pub count: usize,
}

/// MAE per ground-truth bin (default width 0.125°). Empty bins are absent
/// from the result rather than reported as zero.
pub fn binned_mae_curve(pred: &[f64], gt: &[f64], bin_width_deg: f64) -> Result<Vec<BinStat>> {
    if pred.len() != gt.len() {
        return Err(Error::Misaligned {
            what: "binned curve inputs".into(),
            left: pred.len(),
            right: gt.len(),
        });
    }
    if !(bin_width_deg > 0.0) {
        return Err(Error::Config("bin width must be positive".into()));
    }
    use std::collections::BTreeMap;
    let mut bins: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gt) {
        let g_deg = g * RAD2DEG;
        let idx = (g_deg / bin_width_deg).floor() as i64;
        let err = ((p - g) * RAD2DEG).abs();
        let e = bins.entry(idx).or_insert((0.0, 0));
        e.0 += err;
        e.1 += 1;
    }
    let total: usize = bins.values().map(|(_, c)| c).sum();
    Ok(bins
        .into_iter()
        .map(|(idx, (sum, count))| BinStat {
            lo_deg: idx as f64 * bin_width_deg,
            mae_deg: sum / count as f64,
            share_pct: 100.0 * count as f64 / total as f64,
            count,
        })
        .collect())
}

/// Pearson correlation between the two residual channels with its t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStats {
    pub r: f64,
    pub t_star: f64,
    pub n: usize,
    pub p_value: f64,
    pub reject_at_99: bool,
}

/// Correlation between sideslip and yaw-rate residual magnitudes, with a
/// two-sided t-test of the no-correlation hypothesis.
pub fn residual_correlation(records: &[ResidualRecord]) -> Result<CorrelationStats> {
    let n = records.len();
    if n < 30 {
        return Err(Error::Degenerate(format!(
            "need at least 30 residual records, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_b = records.iter().map(|r| r.e_beta).sum::<f64>() / nf;
    let mean_y = records.iter().map(|r| r.e_yaw).sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_b = 0.0;
    let mut var_y = 0.0;
    for r in records {
        let db = r.e_beta - mean_b;
        let dy = r.e_yaw - mean_y;
        cov += db * dy;
        var_b += db * db;
        var_y += dy * dy;
    }
    let floor_b = (mean_b.abs() * 1e-9).powi(2) * nf;
    let floor_y = (mean_y.abs() * 1e-9).powi(2) * nf;
    if var_b <= floor_b || var_y <= floor_y {
        return Err(Error::Degenerate("zero variance in a residual channel".into()));
    }
    let r = cov / (var_b.sqrt() * var_y.sqrt());
    let df = nf - 2.0;
    let t_star = r * df.sqrt() / (1.0 - r * r).max(f64::EPSILON).sqrt();
    let p_value = t_test_p_value(t_star, df);
    Ok(CorrelationStats { r, t_star, n, p_value, reject_at_99: p_value < 0.01 })
}

/// Per-model metrics row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub metrics: Metrics,
}

/// Per-condition MAE row: one value per model, aligned with `models`.
/// Conditions with no samples report `None` per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: String,
    pub count: usize,
    pub mae_deg: Vec<Option<f64>>,
}

/// Binned curve of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurve {
    pub model: String,
    pub bins: Vec<BinStat>,
}

/// The machine-readable evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sample_count: usize,
    pub models: Vec<ModelMetrics>,
    pub conditions: Vec<ConditionRow>,
    pub curves: Vec<ModelCurve>,
    pub hypothesis: Option<CorrelationStats>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEG2RAD;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_scores_zero() {
        let gt = vec![0.01, -0.02, 0.005];
        let m = compute_metrics(&gt, &gt).unwrap();
        assert_eq!((m.mae_deg, m.mse_deg2, m.me_deg), (0.0, 0.0, 0.0));
    }

    // Oracle: hand evaluation with errors of +1 and -3 degrees.
    #[test]
    fn hand_worked_metric_values() {
        let gt = vec![0.0, 0.0];
        let pred = vec![1.0 * DEG2RAD, -3.0 * DEG2RAD];
        let m = compute_metrics(&pred, &gt).unwrap();
        assert_relative_eq!(m.mae_deg, 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.mse_deg2, 5.0, epsilon = 1e-12);
        assert_relative_eq!(m.me_deg, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn max_error_dominates_mae_and_metric_inequalities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let n = rng.gen_range(1..200);
            let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let pred: Vec<f64> =
                gt.iter().map(|g| g + rng.gen_range(-0.05..0.05)).collect();
            let m = compute_metrics(&pred, &gt).unwrap();
            assert!(m.me_deg >= m.mae_deg - 1e-12);
            assert!(m.mae_deg * m.mae_deg <= m.mse_deg2 + 1e-9);
            assert!(m.mse_deg2 <= m.me_deg * m.me_deg + 1e-9);
        }
    }

    // Oracle: naive re-implementation on random vectors.
    #[test]
    fn metrics_match_a_naive_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 500;
        let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let m = compute_metrics(&pred, &gt).unwrap();

        let errs: Vec<f64> = pred
            .iter()
            .zip(&gt)
            .map(|(p, g)| (p - g) * RAD2DEG)
            .collect();
        let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / n as f64;
        let mse = errs.iter().map(|e| e * e).sum::<f64>() / n as f64;
        let me = errs.iter().map(|e| e.abs()).fold(0.0f64, f64::max);
        assert_relative_eq!(m.mae_deg, mae, epsilon = 1e-12);
        assert_relative_eq!(m.mse_deg2, mse, epsilon = 1e-12);
        assert_relative_eq!(m.me_deg, me, epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_metrics(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn table_condition_predicates() {
        // 10 km/h, 1 m/s^2 -> condition 1
        assert_eq!(
            Condition::classify(10.0 * KMH2MS, 1.0),
            Condition::LowSpeedLowAy
        );
        // 30 km/h, 5 m/s^2 -> condition 4
        assert_eq!(
            Condition::classify(30.0 * KMH2MS, 5.0),
            Condition::HighSpeedHighAy
        );
        // sign-symmetric lateral acceleration
        assert_eq!(
            Condition::classify(10.0 * KMH2MS, -5.0),
            Condition::LowSpeedHighAy
        );
    }

    #[test]
    fn condition_masks_partition_the_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 300;
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..30.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let masks = conditional_bins(&v, &a);
        for i in 0..n {
            let members = masks.iter().filter(|m| m[i]).count();
            assert_eq!(members, 1, "sample {i} in {members} conditions");
        }
        let total: usize = masks.iter().map(|m| m.iter().filter(|x| **x).count()).sum();
        assert_eq!(total, n);
    }

    #[test]
    fn single_bin_curve_and_share_normalization() {
        let gt = vec![0.01; 40];
        let pred: Vec<f64> = (0..40).map(|i| 0.01 + 1e-4 * i as f64).collect();
        let curve = binned_mae_curve(&pred, &gt, 0.125).unwrap();
        assert_eq!(curve.len(), 1);
        assert_relative_eq!(curve[0].share_pct, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn shares_sum_to_one_hundred_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt: Vec<f64> = (0..700).map(|_| rng.gen_range(-0.15..0.15)).collect();
        let pred: Vec<f64> = gt.iter().map(|g| g + rng.gen_range(-0.01..0.01)).collect();
        let curve = binned_mae_curve(&pred, &gt, 0.125).unwrap();
        let total: f64 = curve.iter().map(|b| b.share_pct).sum();
        assert_relative_eq!(total, 100.0, epsilon = 1e-9);
        assert!(curve.iter().all(|b| b.count > 0), "empty bins must be absent");
    }

    // Oracle: constant |error| puts the same MAE in every bin.
    #[test]
    fn constant_error_gives_flat_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt: Vec<f64> = (0..500).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let e = 0.5 * DEG2RAD;
        let pred: Vec<f64> = gt.iter().map(|g| g + e).collect();
        for bin in binned_mae_curve(&pred, &gt, 0.125).unwrap() {
            assert_relative_eq!(bin.mae_deg, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn proportional_residuals_give_perfect_correlation() {
        let records: Vec<ResidualRecord> = (0..100)
            .map(|i| ResidualRecord { e_beta: 2.0 * i as f64 * 1e-3, e_yaw: i as f64 * 1e-3 })
            .collect();
        let c = residual_correlation(&records).unwrap();
        assert_relative_eq!(c.r, 1.0, epsilon = 1e-9);
        assert!(c.reject_at_99);
    }

    // Oracle: formula evaluation, r = 0.5, n = 402.
    #[test]
    fn t_statistic_matches_the_formula() {
        let r: f64 = 0.5;
        let n = 402.0;
        let t = r * (n - 2.0f64).sqrt() / (1.0 - r * r).sqrt();
        assert_relative_eq!(t, 11.547005383792515, epsilon = 1e-12);
    }

    // Oracle: Monte-Carlo; independent residuals rarely reject. Seeds are
    // fixed, so this is deterministic despite its statistical content.
    #[test]
    fn independent_residuals_rarely_reject() {
        let mut rejections = 0;
        let mut big_r = 0;
        let trials = 60;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let records: Vec<ResidualRecord> = (0..10_000)
                .map(|_| ResidualRecord {
                    e_beta: rng.gen_range(0.0..1.0) + rng.gen_range(0.0..1.0),
                    e_yaw: rng.gen_range(0.0..1.0) + rng.gen_range(0.0..1.0),
                })
                .collect();
            let c = residual_correlation(&records).unwrap();
            if c.reject_at_99 {
                rejections += 1;
            }
            if c.r.abs() >= 0.05 {
                big_r += 1;
            }
        }
        assert_eq!(big_r, 0, "|r| reached 0.05 on independent data");
        assert!(
            rejections <= trials / 20,
            "{rejections}/{trials} seeds rejected independence"
        );
    }

    #[test]
    fn degenerate_residuals_are_rejected() {
        let records: Vec<ResidualRecord> =
            (0..50).map(|_| ResidualRecord { e_beta: 0.1, e_yaw: 0.1 }).collect();
        assert!(residual_correlation(&records).is_err());
        assert!(residual_correlation(&records[..10]).is_err());
    }
}
