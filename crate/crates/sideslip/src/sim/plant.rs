//! Nonlinear single-track plant and its fixed-step integrator.
//!
//! States are sideslip angle, yaw rate and heading (the latter carried as an
//! integrator-accuracy witness). Axle forces are linear in slip angle with a
//! smooth tanh saturation at `mu_sat * mass * g / 2` per axle. Integration
//! runs RK4 at 200 Hz internally and decimates to the 50 Hz output rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::maneuver::SteeringProgram;
use super::sensors::sensor_channels;
use super::VehicleGeometry;
use crate::data::Maneuver;
use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::GRAVITY;

/// Internal integration rate (Hz).
pub const INTERNAL_RATE_HZ: f64 = 200.0;
/// Output sampling rate (Hz).
pub const OUTPUT_RATE_HZ: f64 = 50.0;

/// One decimated plant sample, noise-free.
#[derive(Debug, Clone, Copy)]
pub struct PlantSample {
    pub t: f64,
    /// Sideslip angle at the CoG (rad).
    pub beta: f64,
    /// Yaw rate (rad/s).
    pub yaw_rate: f64,
    /// Integrated heading (rad), for consistency checks.
    pub heading: f64,
    /// Speed (m/s).
    pub v: f64,
    /// Longitudinal acceleration (m/s²).
    pub v_dot: f64,
    /// Steering-wheel command (rad).
    pub theta_sw: f64,
    /// Lateral acceleration v·(ψ̇ + β̇) from the plant's own derivative.
    pub a_y: f64,
}

#[derive(Debug, Clone)]
pub struct PlantTrace {
    pub samples: Vec<PlantSample>,
}

#[derive(Clone, Copy)]
struct State {
    beta: f64,
    yaw_rate: f64,
    heading: f64,
}

#[derive(Clone, Copy)]
struct Deriv {
    beta_dot: f64,
    yaw_acc: f64,
    heading_dot: f64,
}

fn dynamics(s: &State, v: f64, delta: f64, g: &VehicleGeometry) -> Deriv {
    let v = v.max(0.1);
    let vx = v * s.beta.cos();
    let vy = v * s.beta.sin();
    let alpha_f = delta - (vy + g.l_f() * s.yaw_rate).atan2(vx);
    let alpha_r = -(vy - g.l_r * s.yaw_rate).atan2(vx);

    let f_max = g.mu_sat * g.mass * GRAVITY / 2.0;
    let f_front = f_max * (g.c_f * alpha_f / f_max).tanh();
    let f_rear = f_max * (g.c_r * alpha_r / f_max).tanh();

    Deriv {
        beta_dot: (f_front * (delta - s.beta).cos() + f_rear * s.beta.cos()) / (g.mass * v)
            - s.yaw_rate,
        yaw_acc: (g.l_f() * f_front * delta.cos() - g.l_r * f_rear) / g.i_z,
        heading_dot: s.yaw_rate,
    }
}

fn advance(s: &State, d: &Deriv, h: f64) -> State {
    State {
        beta: s.beta + h * d.beta_dot,
        yaw_rate: s.yaw_rate + h * d.yaw_acc,
        heading: s.heading + h * d.heading_dot,
    }
}

/// Integrates the plant under a steering-wheel command and speed profile.
///
/// Fails with the offending output step if the sideslip magnitude exceeds
/// π/2, which indicates a spun vehicle or an unstable parameter set.
pub fn simulate_plant(
    geometry: &VehicleGeometry,
    steering_sw: &dyn Fn(f64) -> f64,
    speed: &dyn Fn(f64) -> f64,
    duration_s: f64,
) -> Result<PlantTrace> {
    geometry.validate()?;
    let h = 1.0 / INTERNAL_RATE_HZ;
    let decim = (INTERNAL_RATE_HZ / OUTPUT_RATE_HZ) as usize;
    let steps = (duration_s * INTERNAL_RATE_HZ).round() as usize;

    let eval = |s: &State, t: f64| {
        let delta = steering_sw(t) / geometry.r_s;
        dynamics(s, speed(t), delta, geometry)
    };
    let record = |samples: &mut Vec<PlantSample>, s: &State, t: f64| {
        let d = eval(s, t);
        let v = speed(t);
        let dv = 1e-3;
        let t_lo = (t - dv).max(0.0);
        samples.push(PlantSample {
            t,
            beta: s.beta,
            yaw_rate: s.yaw_rate,
            heading: s.heading,
            v,
            v_dot: (speed(t + dv) - speed(t_lo)) / (t + dv - t_lo),
            theta_sw: steering_sw(t),
            a_y: v * (s.yaw_rate + d.beta_dot),
        });
    };

    let mut state = State { beta: 0.0, yaw_rate: 0.0, heading: 0.0 };
    let mut samples = Vec::with_capacity(steps / decim + 1);
    record(&mut samples, &state, 0.0);

    for step in 1..=steps {
        let t0 = (step - 1) as f64 * h;
        let k1 = eval(&state, t0);
        let k2 = eval(&advance(&state, &k1, h / 2.0), t0 + h / 2.0);
        let k3 = eval(&advance(&state, &k2, h / 2.0), t0 + h / 2.0);
        let k4 = eval(&advance(&state, &k3, h), t0 + h);

        state.beta +=
            h / 6.0 * (k1.beta_dot + 2.0 * k2.beta_dot + 2.0 * k3.beta_dot + k4.beta_dot);
        state.yaw_rate += h / 6.0 * (k1.yaw_acc + 2.0 * k2.yaw_acc + 2.0 * k3.yaw_acc + k4.yaw_acc);
        state.heading += h / 6.0
            * (k1.heading_dot + 2.0 * k2.heading_dot + 2.0 * k3.heading_dot + k4.heading_dot);

        if state.beta.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::SimulationUnstable { step: step / decim, beta: state.beta });
        }
        if step % decim == 0 {
            record(&mut samples, &state, step as f64 * h);
        }
    }
    Ok(PlantTrace { samples })
}

/// Simulates one maneuver and packages the result as a noise-free scenario.
///
/// The seed draws the maneuver's amplitude/frequency parameters, so repeated
/// calls with identical arguments are bit-identical.
pub fn simulate_maneuver(
    maneuver: Maneuver,
    duration_s: f64,
    geometry: &VehicleGeometry,
    speed: &dyn Fn(f64) -> f64,
    seed: u64,
) -> Result<Scenario> {
    if duration_s < 5.0 {
        return Err(Error::Config(format!(
            "maneuver duration must be at least 5 s, got {duration_s}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let program = SteeringProgram::sample(maneuver, &mut rng);
    let trace = simulate_plant(geometry, &|t| program.theta_sw(t), speed, duration_s)?;

    let mut frames = Vec::with_capacity(trace.samples.len());
    let mut beta_gt = Vec::with_capacity(trace.samples.len());
    for s in &trace.samples {
        frames.push(sensor_channels(s, geometry));
        beta_gt.push(s.beta);
    }
    Ok(Scenario {
        id: format!("{}_{seed:08x}", maneuver.name()),
        maneuver,
        frames,
        beta_gt,
        rate_hz: OUTPUT_RATE_HZ,
    })
}
