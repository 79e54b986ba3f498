//! Domain types shared by every estimation branch: sensor frames, labeled
//! scenarios, sliding windows and scenario-level dataset splits.
//!
//! Everything here is immutable after construction and safe to share across
//! workers; windowing and splitting are pure functions.

mod io;
mod split;
mod window;

pub use io::{load_dataset, load_scenario_csv, write_dataset, write_scenario_csv, ManifestEntry};
pub use split::{scenario_split, SplitRatios};
pub use window::{make_windows, Window};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One time step of the onboard measurement vector.
///
/// `t` is carried for bookkeeping; the model input consists of the nine
/// measurement channels (see [`SensorFrame::features`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Time in seconds, strictly increasing within a scenario.
    pub t: f64,
    /// Speedometer speed (m/s).
    pub v_s: f64,
    /// Steering-wheel angle (rad).
    pub theta_sw: f64,
    /// Yaw rate from the onboard gyro (rad/s).
    pub yaw_rate_obd: f64,
    /// Lateral acceleration (m/s²).
    pub a_y: f64,
    /// Brake pressure (bar).
    pub p_br: f64,
    /// Wheel speeds, front-left/front-right/rear-left/rear-right (m/s).
    pub v_fl: f64,
    pub v_fr: f64,
    pub v_rl: f64,
    pub v_rr: f64,
}

/// Number of measurement channels in the model input vector.
pub const INPUT_DIM: usize = 9;

impl SensorFrame {
    /// The nine-channel input vector, excluding time.
    pub fn features(&self) -> [f64; INPUT_DIM] {
        [
            self.v_s,
            self.theta_sw,
            self.yaw_rate_obd,
            self.a_y,
            self.p_br,
            self.v_fl,
            self.v_fr,
            self.v_rl,
            self.v_rr,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.features().iter().all(|v| v.is_finite()) && self.t.is_finite()
    }

    fn wheels_non_negative(&self) -> bool {
        self.v_fl >= 0.0 && self.v_fr >= 0.0 && self.v_rl >= 0.0 && self.v_rr >= 0.0
    }
}

/// Driving maneuver class of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    Slalom,
    ConstantRadius,
    StepSteer,
    SineWithDwell,
    DoubleLaneChange,
    FigureEight,
}

impl Maneuver {
    pub const ALL: [Maneuver; 6] = [
        Maneuver::Slalom,
        Maneuver::ConstantRadius,
        Maneuver::StepSteer,
        Maneuver::SineWithDwell,
        Maneuver::DoubleLaneChange,
        Maneuver::FigureEight,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Maneuver::Slalom => "slalom",
            Maneuver::ConstantRadius => "constant_radius",
            Maneuver::StepSteer => "step_steer",
            Maneuver::SineWithDwell => "sine_with_dwell",
            Maneuver::DoubleLaneChange => "double_lane_change",
            Maneuver::FigureEight => "figure_eight",
        }
    }

    pub fn parse(s: &str) -> Result<Maneuver> {
        Maneuver::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown maneuver `{s}`")))
    }
}

impl std::fmt::Display for Maneuver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A contiguous, labeled time series of sensor frames with ground-truth
/// sideslip angle per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub maneuver: Maneuver,
    pub frames: Vec<SensorFrame>,
    /// Ground-truth sideslip angle (rad), same length as `frames`.
    pub beta_gt: Vec<f64>,
    /// Sampling rate (Hz).
    pub rate_hz: f64,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Validates finiteness, wheel-speed sign, label alignment and uniform
    /// time spacing (within 1e-6 s).
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidScenario { id: self.id.clone(), reason })
        };
        if self.frames.len() != self.beta_gt.len() {
            return fail(format!(
                "{} frames vs {} labels",
                self.frames.len(),
                self.beta_gt.len()
            ));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return fail(format!("rate_hz = {}", self.rate_hz));
        }
        let dt = 1.0 / self.rate_hz;
        for (i, f) in self.frames.iter().enumerate() {
            if !f.is_finite() {
                return fail(format!("non-finite frame at index {i}"));
            }
            if !f.wheels_non_negative() {
                return fail(format!("negative wheel speed at index {i}"));
            }
            if i > 0 {
                let step = f.t - self.frames[i - 1].t;
                if step <= 0.0 {
                    return fail(format!("time not strictly increasing at index {i}"));
                }
                if (step - dt).abs() > 1e-6 {
                    return fail(format!(
                        "non-uniform time spacing at index {i}: {step} vs {dt}"
                    ));
                }
            }
        }
        if let Some(i) = self.beta_gt.iter().position(|b| !b.is_finite()) {
            return fail(format!("non-finite ground truth at index {i}"));
        }
        Ok(())
    }
}

/// Sliding-window configuration for the sequence model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Observation steps.
    pub l_obs: usize,
    /// Decoder context steps.
    pub b_ctx: usize,
    /// Forecast steps.
    pub f_horizon: usize,
}

impl WindowConfig {
    pub fn new(l_obs: usize, b_ctx: usize, f_horizon: usize) -> Result<Self> {
        let cfg = WindowConfig { l_obs, b_ctx, f_horizon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_obs == 0 {
            return Err(Error::Config("window l_obs must be positive".into()));
        }
        if self.b_ctx > self.l_obs {
            return Err(Error::Config(format!(
                "decoder context b_ctx = {} exceeds l_obs = {}",
                self.b_ctx, self.l_obs
            )));
        }
        Ok(())
    }

    /// Minimum scenario length that yields at least one window.
    pub fn min_scenario_len(&self) -> usize {
        self.l_obs + self.f_horizon + 1
    }
}

/// A sideslip estimate together with a non-negative, model-specific
/// uncertainty scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithUncertainty {
    /// Sideslip estimate (rad).
    pub beta: f64,
    /// Non-negative uncertainty on the emitting model's own scale.
    pub delta: f64,
}

impl EstimateWithUncertainty {
    pub fn new(beta: f64, delta: f64) -> Self {
        debug_assert!(beta.is_finite() && delta >= 0.0);
        EstimateWithUncertainty { beta, delta }
    }
}

/// The six-channel fusion input `[beta_ml, delta_ml, beta_vm1, delta_vm1,
/// beta_vm2, delta_vm2]` at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionInput {
    pub beta_ml: f64,
    pub delta_ml: f64,
    pub beta_vm1: f64,
    pub delta_vm1: f64,
    pub beta_vm2: f64,
    pub delta_vm2: f64,
}

impl FusionInput {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.beta_ml,
            self.delta_ml,
            self.beta_vm1,
            self.delta_vm1,
            self.beta_vm2,
            self.delta_vm2,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        FusionInput {
            beta_ml: a[0],
            delta_ml: a[1],
            beta_vm1: a[2],
            delta_vm1: a[3],
            beta_vm2: a[4],
            delta_vm2: a[5],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
            && self.delta_ml >= 0.0
            && self.delta_vm1 >= 0.0
            && self.delta_vm2 >= 0.0
    }
}
