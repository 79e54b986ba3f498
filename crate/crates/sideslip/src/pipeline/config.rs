//! Run configuration: a plain-text TOML file with full schema validation.
//! Every tunable has a recorded default; a saved file reproduces the run
//! bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{SplitRatios, WindowConfig};
use crate::error::{Error, Result};
use crate::fusion::{DfTrainOptions, EmOptions, ExpertFusionConfig};
use crate::ml::{ModelConfig, TrainOptions};
use crate::sim::{ManeuverMix, NoiseSpec, SimConfig, VehicleGeometry};
use crate::vmm::QGrid;
use crate::KMH2MS;

/// Noise standard deviations; the per-scenario noise seed derives from the
/// master seed and never appears in the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub v_s: f64,
    pub theta_sw: f64,
    pub yaw_rate: f64,
    pub a_y: f64,
    pub p_br: f64,
    pub wheel_speed: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        NoiseSection {
            v_s: n.v_s,
            theta_sw: n.theta_sw,
            yaw_rate: n.yaw_rate,
            a_y: n.a_y,
            p_br: n.p_br,
            wheel_speed: n.wheel_speed,
        }
    }
}

impl NoiseSection {
    pub fn to_spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            v_s: self.v_s,
            theta_sw: self.theta_sw,
            yaw_rate: self.yaw_rate,
            a_y: self.a_y,
            p_br: self.p_br,
            wheel_speed: self.wheel_speed,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub hours: f64,
    pub mix: ManeuverMix,
    pub geometry: VehicleGeometry,
    pub noise: NoiseSection,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            hours: 0.5,
            mix: ManeuverMix::default(),
            geometry: VehicleGeometry::default(),
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlSection {
    pub d: usize,
    pub heads: usize,
    pub u_factor: f64,
    pub d_ff: usize,
    pub lr: f64,
    pub lr_final_factor: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Every n-th training window enters an epoch; windows remain stride-1
    /// for evaluation and fusion.
    pub train_stride: usize,
    pub val_stride: usize,
    pub delta_floor: bool,
}

impl Default for MlSection {
    fn default() -> Self {
        MlSection {
            d: 32,
            heads: 2,
            u_factor: 5.0,
            d_ff: 64,
            lr: 1e-3,
            lr_final_factor: 0.1,
            batch: 64,
            epochs: 8,
            train_stride: 12,
            val_stride: 4,
            delta_floor: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfSection {
    pub q_beta_grid: Vec<f64>,
    pub q_yaw_grid: Vec<f64>,
}

impl Default for KfSection {
    fn default() -> Self {
        let g = QGrid::default();
        KfSection { q_beta_grid: g.q_beta, q_yaw_grid: g.q_yaw }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub delta_th: f64,
    pub v_th_kmh: f64,
    pub df_lr: f64,
    pub df_lr_final_factor: f64,
    pub df_batch: usize,
    pub df_epochs: usize,
    pub gmm_k: usize,
    pub gmm_select_k: bool,
    pub gmm_k_candidates: Vec<usize>,
    pub em_max_iter: usize,
    pub em_tol: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            delta_th: 0.9,
            v_th_kmh: 20.0,
            df_lr: 3e-3,
            df_lr_final_factor: 1e-4,
            df_batch: 256,
            df_epochs: 250,
            gmm_k: 8,
            gmm_select_k: true,
            gmm_k_candidates: vec![2, 4, 8, 16],
            em_max_iter: 200,
            em_tol: 1e-7,
        }
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub split: SplitRatios,
    pub window: WindowSection,
    pub sim: SimSection,
    pub ml: MlSection,
    pub kf: KfSection,
    pub fusion: FusionSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub l_obs: usize,
    pub b_ctx: usize,
    pub f_horizon: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection { l_obs: 50, b_ctx: 12, f_horizon: 5 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 51,
            split: SplitRatios::default(),
            window: WindowSection::default(),
            sim: SimSection::default(),
            ml: MlSection::default(),
            kf: KfSection::default(),
            fusion: FusionSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.window_config().validate()?;
        self.model_config().validate()?;
        self.sim.mix.validate()?;
        self.sim.geometry.validate()?;
        self.noise_spec(0).validate()?;
        self.expert_config().validate()?;
        if self.ml.train_stride == 0 || self.ml.val_stride == 0 {
            return Err(Error::Config("window strides must be positive".into()));
        }
        if self.fusion.gmm_k == 0 {
            return Err(Error::Config("gmm_k must be positive".into()));
        }
        if self.fusion.gmm_select_k && self.fusion.gmm_k_candidates.is_empty() {
            return Err(Error::Config("gmm_k_candidates must not be empty".into()));
        }
        Ok(())
    }

    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            l_obs: self.window.l_obs,
            b_ctx: self.window.b_ctx,
            f_horizon: self.window.f_horizon,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            d: self.ml.d,
            heads: self.ml.heads,
            l_obs: self.window.l_obs,
            b_ctx: self.window.b_ctx,
            f_horizon: self.window.f_horizon,
            u_factor: self.ml.u_factor,
            d_ff: self.ml.d_ff,
            seed: crate::sim::derive_seed(self.seed, "ml-init"),
            delta_floor: self.ml.delta_floor,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            lr: self.ml.lr,
            lr_final_factor: self.ml.lr_final_factor,
            batch: self.ml.batch,
            epochs: self.ml.epochs,
            seed: crate::sim::derive_seed(self.seed, "ml-train"),
            divergence_factor: 10.0,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            hours: self.sim.hours,
            seed: crate::sim::derive_seed(self.seed, "sim"),
            mix: self.sim.mix.clone(),
            geometry: self.sim.geometry,
            noise: self.noise_spec(crate::sim::derive_seed(self.seed, "noise")),
        }
    }

    pub fn noise_spec(&self, seed: u64) -> NoiseSpec {
        self.sim.noise.to_spec(seed)
    }

    pub fn q_grid(&self) -> QGrid {
        QGrid { q_beta: self.kf.q_beta_grid.clone(), q_yaw: self.kf.q_yaw_grid.clone() }
    }

    pub fn expert_config(&self) -> ExpertFusionConfig {
        ExpertFusionConfig {
            delta_th: self.fusion.delta_th,
            v_th: self.fusion.v_th_kmh * KMH2MS,
        }
    }

    pub fn df_options(&self) -> DfTrainOptions {
        DfTrainOptions {
            lr: self.fusion.df_lr,
            lr_final_factor: self.fusion.df_lr_final_factor,
            batch: self.fusion.df_batch,
            epochs: self.fusion.df_epochs,
            seed: crate::sim::derive_seed(self.seed, "df-train"),
        }
    }

    pub fn em_options(&self, k: usize) -> EmOptions {
        EmOptions {
            k,
            seed: crate::sim::derive_seed(self.seed, "gf-em"),
            max_iter: self.fusion.em_max_iter,
            tol: self.fusion.em_tol,
        }
    }

    pub fn split_seed(&self) -> u64 {
        crate::sim::derive_seed(self.seed, "split")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("bad run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = RunConfig::default().to_toml();
        text.push_str("\n[mystery]\nvalue = 1\n");
        assert!(RunConfig::from_toml(&text).is_err());
        let bad = "seed = 1\ntypo_key = 2\n";
        assert!(RunConfig::from_toml(bad).is_err());
    }

    #[test]
    fn partial_files_pick_up_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[sim]\nhours = 0.1\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sim.hours, 0.1);
        assert_eq!(cfg.ml.d, 32);
    }

    #[test]
    fn derived_seeds_differ_by_purpose() {
        let cfg = RunConfig::default();
        let a = cfg.sim_config().seed;
        let b = cfg.train_options().seed;
        let c = cfg.split_seed();
        assert_ne!(a, b);
        assert_ne!(b, c);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_sections_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.fusion.delta_th = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.split.test = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.ml.d = 33;
        assert!(cfg.validate().is_err());
    }
}
