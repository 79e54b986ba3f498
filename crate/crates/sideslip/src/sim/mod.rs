//! Synthetic ground-truth generation: a nonlinear single-track plant driven
//! through a library of test maneuvers, plus onboard sensor synthesis.
//!
//! The plant is deliberately richer than the linear model the Kalman filter
//! assumes (saturating tires, speed modulation), so every downstream branch
//! sees realistic model mismatch.

mod dataset;
mod maneuver;
mod plant;
mod sensors;

pub use dataset::{derive_seed, generate_dataset, ManeuverMix, SimConfig};
pub use maneuver::SteeringProgram;
pub use plant::{simulate_maneuver, simulate_plant, PlantSample, PlantTrace};
pub use sensors::{sensor_channels, synthesize_sensors};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar vehicle geometry and axle parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    /// Wheelbase (m).
    pub l: f64,
    /// Rear-axle-to-CoG distance (m).
    pub l_r: f64,
    /// Track width (m).
    pub track_w: f64,
    /// Steering ratio (steering-wheel angle / road-wheel angle).
    pub r_s: f64,
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Yaw inertia (kg·m²).
    pub i_z: f64,
    /// Front cornering stiffness (N/rad).
    pub c_f: f64,
    /// Rear cornering stiffness (N/rad).
    pub c_r: f64,
    /// Lateral-force saturation level (fraction of weight).
    pub mu_sat: f64,
}

impl Default for VehicleGeometry {
    /// Small city car, comparable to the class of vehicle the estimator
    /// targets. All values configurable.
    fn default() -> Self {
        VehicleGeometry {
            l: 1.87,
            l_r: 1.02,
            track_w: 1.28,
            r_s: 21.0,
            mass: 880.0,
            i_z: 800.0,
            c_f: 45_000.0,
            c_r: 60_000.0,
            mu_sat: 0.9,
        }
    }
}

impl VehicleGeometry {
    /// Front-axle-to-CoG distance (m).
    pub fn l_f(&self) -> f64 {
        self.l - self.l_r
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_r > 0.0 && self.l_r < self.l) {
            return Err(Error::Config(format!(
                "need 0 < l_r < l, got l_r = {}, l = {}",
                self.l_r, self.l
            )));
        }
        for (name, v) in [
            ("r_s", self.r_s),
            ("mass", self.mass),
            ("i_z", self.i_z),
            ("c_f", self.c_f),
            ("c_r", self.c_r),
            ("track_w", self.track_w),
            ("mu_sat", self.mu_sat),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Lever arm and angular rate needed to move a velocity measurement from a
/// mounting point to the center of gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountingConfig {
    /// Lever arm from CoG to the point of interest (m).
    pub r_lever: [f64; 3],
    /// Angular velocity of the body at this step (rad/s).
    pub omega: [f64; 3],
}

impl MountingConfig {
    /// Transforms a velocity measured at the mounting point to the CoG.
    pub fn to_cog(&self, v_poi: [f64; 3]) -> Result<([f64; 3], f64)> {
        transform_to_cog(v_poi, self.omega, self.r_lever)
    }
}

/// Rigid-body transform of a velocity vector from a point of interest to the
/// CoG: `v_cog = v_poi + omega × r`, with the sideslip angle recomputed at
/// the CoG. Fails below 0.1 m/s longitudinal speed where the angle is
/// undefined.
pub fn transform_to_cog(
    v_poi: [f64; 3],
    omega: [f64; 3],
    r_lever: [f64; 3],
) -> Result<([f64; 3], f64)> {
    let cross = [
        omega[1] * r_lever[2] - omega[2] * r_lever[1],
        omega[2] * r_lever[0] - omega[0] * r_lever[2],
        omega[0] * r_lever[1] - omega[1] * r_lever[0],
    ];
    let v_cog = [v_poi[0] + cross[0], v_poi[1] + cross[1], v_poi[2] + cross[2]];
    if v_cog[0].abs() < 0.1 {
        return Err(Error::Standstill { v: v_cog[0] });
    }
    let beta = v_cog[1].atan2(v_cog[0]);
    Ok((v_cog, beta))
}

/// Additive Gaussian noise per sensor channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub v_s: f64,
    pub theta_sw: f64,
    pub yaw_rate: f64,
    pub a_y: f64,
    pub p_br: f64,
    pub wheel_speed: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            v_s: 0.05,
            theta_sw: 0.002,
            yaw_rate: 0.005,
            a_y: 0.05,
            p_br: 0.05,
            wheel_speed: 0.05,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn zero(seed: u64) -> Self {
        NoiseSpec {
            v_s: 0.0,
            theta_sw: 0.0,
            yaw_rate: 0.0,
            a_y: 0.0,
            p_br: 0.0,
            wheel_speed: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_s", self.v_s),
            ("theta_sw", self.theta_sw),
            ("yaw_rate", self.yaw_rate),
            ("a_y", self.a_y),
            ("p_br", self.p_br),
            ("wheel_speed", self.wheel_speed),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "noise std {name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}
