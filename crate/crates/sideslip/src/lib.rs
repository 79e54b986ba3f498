//! Virtual sensor for vehicle sideslip angle (VSA) estimation.
//!
//! The crate combines three estimation branches and fuses them with
//! uncertainty weighting:
//!
//! - a geometric kinematic motion model ([`vmm::vmm1_estimate`]),
//! - a wheel-speed motion model refined by a Kalman filter on a linear
//!   single-track model ([`vmm::kf`]),
//! - a sparse-attention encoder/decoder network with a Student-t output
//!   head trained on its own reverse-mode gradient engine ([`ml`]).
//!
//! Fusion strategies live in [`fusion`]: a rule-based expert blend, a small
//! feed-forward network, and Gaussian mixture regression. A nonlinear
//! single-track simulator ([`sim`]) generates labeled driving scenarios so
//! the whole pipeline runs without recorded data, and [`eval`] reproduces
//! the metric tables, binned error curves and residual-correlation checks
//! used to validate the design. [`pipeline`] chains the stages behind the
//! `sideslip` command-line tool.
//!
//! See the `examples/` directory for a runnable tour of each capability.

pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod ml;
pub mod pipeline;
pub mod sim;
pub mod special;
pub mod vmm;

pub use error::{Error, Result};

/// Radians to degrees; reports are in degrees, internals in radians.
pub const RAD2DEG: f64 = 180.0 / std::f64::consts::PI;
/// Degrees to radians.
pub const DEG2RAD: f64 = std::f64::consts::PI / 180.0;
/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;
/// km/h to m/s.
pub const KMH2MS: f64 = 1.0 / 3.6;
