//! Uncertainty-aware fusion of the three sideslip branches.
//!
//! Branch uncertainties live on different scales (a learned Student-t
//! variance, a yaw-rate residual, a filter covariance), so the rule-based
//! expert fusion consumes a rank-normalized confidence while the learned
//! fusers standardize their inputs from training statistics.

pub mod dataset;
pub mod deep;
pub mod gmm;
pub mod gmr;
mod linalg;

pub use dataset::{build_fusion_dataset, load_fusion_csv, write_fusion_csv, FusionRow};
pub use deep::{df_forward, train_df, DeepFusion, DfTrainOptions};
pub use gmm::{em_fit, EmOptions, GmmModel};
pub use gmr::{gf_fuse, gf_predict, GaussianFusion};

use serde::{Deserialize, Serialize};

use crate::data::FusionInput;
use crate::error::{Error, Result};
use crate::KMH2MS;

/// Empirical-CDF calibration of the learned branch's raw uncertainty,
/// fitted on the validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyCalibration {
    sorted: Vec<f64>,
}

impl UncertaintyCalibration {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("no values to calibrate on".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Degenerate("calibration values must be finite and >= 0".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(UncertaintyCalibration { sorted })
    }

    /// Mid-rank empirical CDF in [0, 1]: values below the fitted minimum map
    /// to 0, the median maps to 0.5, and the map is monotone non-decreasing.
    pub fn normalize(&self, delta_raw: f64) -> f64 {
        let n = self.sorted.len();
        let less = self.sorted.partition_point(|v| *v < delta_raw);
        let le = self.sorted.partition_point(|v| *v <= delta_raw);
        let rank = (less as f64 + 0.5 * (le - less) as f64) / n as f64;
        rank.clamp(0.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

/// Thresholds for the rule-based fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertFusionConfig {
    /// Normalized-uncertainty threshold in (0, 1); the default equals the
    /// 90th percentile of validation uncertainty by construction of the
    /// rank normalization.
    pub delta_th: f64,
    /// Speed threshold (m/s) choosing between the motion models.
    pub v_th: f64,
}

impl Default for ExpertFusionConfig {
    fn default() -> Self {
        ExpertFusionConfig { delta_th: 0.9, v_th: 20.0 * KMH2MS }
    }
}

impl ExpertFusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_th > 0.0 && self.delta_th < 1.0) {
            return Err(Error::Config(format!(
                "delta_th must lie in (0,1), got {}",
                self.delta_th
            )));
        }
        if !(self.v_th > 0.0) {
            return Err(Error::Config(format!("v_th must be positive, got {}", self.v_th)));
        }
        Ok(())
    }
}

/// Which branch of the expert rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EfBranch {
    /// Low uncertainty: pass the learned estimate through.
    MlOnly,
    /// Uncertain at low speed: blend with the geometric model.
    BlendVm1,
    /// Uncertain at high speed: blend with the wheel-speed model.
    BlendVm2,
}

/// Rule-based fusion. `input.delta_ml` must already be normalized to [0, 1].
///
/// Uncertain estimates are blended convexly: the motion model receives the
/// normalized uncertainty as weight, the learned branch the remainder; the
/// speed threshold picks which motion model is trusted.
pub fn expert_fuse_detailed(
    input: &FusionInput,
    v_s: f64,
    cfg: &ExpertFusionConfig,
) -> (f64, EfBranch) {
    let d = input.delta_ml;
    debug_assert!((0.0..=1.0).contains(&d), "delta_ml must be normalized");
    if d <= cfg.delta_th {
        (input.beta_ml, EfBranch::MlOnly)
    } else if v_s <= cfg.v_th {
        (input.beta_vm1 * d + input.beta_ml * (1.0 - d), EfBranch::BlendVm1)
    } else {
        (input.beta_vm2 * d + input.beta_ml * (1.0 - d), EfBranch::BlendVm2)
    }
}

pub fn expert_fuse(input: &FusionInput, v_s: f64, cfg: &ExpertFusionConfig) -> f64 {
    expert_fuse_detailed(input, v_s, cfg).0
}

/// Column standardization for the learned fusers: the three uncertainty
/// channels are shifted/scaled by training statistics, the sideslip
/// channels pass through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

impl FeatureNorm {
    pub fn identity() -> Self {
        FeatureNorm { mean: [0.0; 6], std: [1.0; 6] }
    }

    /// Fits standardization of the delta columns (1, 3, 5) on training rows.
    pub fn fit(inputs: &[FusionInput]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Degenerate("no rows to fit feature normalization".into()));
        }
        let mut norm = FeatureNorm::identity();
        let n = inputs.len() as f64;
        for col in [1usize, 3, 5] {
            let mean = inputs.iter().map(|h| h.as_array()[col]).sum::<f64>() / n;
            let var = inputs
                .iter()
                .map(|h| {
                    let v = h.as_array()[col] - mean;
                    v * v
                })
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            norm.mean[col] = mean;
            // an all-constant column (e.g. zero-masked in ablation) keeps
            // scale one so it stays exactly constant after standardization
            norm.std[col] = if std > 1e-12 { std } else { 1.0 };
        }
        Ok(norm)
    }

    pub fn apply(&self, h: &FusionInput) -> [f64; 6] {
        let raw = h.as_array();
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}
