//! Vehicle motion models with uncertainty quantification.
//!
//! Two analytic branches estimate sideslip from onboard data alone:
//!
//! - the geometric kinematic model ([`vmm1_estimate`]) with an uncertainty
//!   proxy built from the yaw-rate residual, and
//! - the wheel-speed estimate ([`vmm2_raw`]) refined by a Kalman filter on a
//!   linear single-track model ([`kf`]).

pub mod fit;
pub mod kf;
mod residual;

pub use fit::{estimate_measurement_noise, fit_process_noise, QGrid};
pub use kf::{kf_step, kf_step_detail, run_vmm2, run_vmm2_full, KfConfig, KfState, KfStepDetail, Vmm2Output};
pub use residual::{collect_residuals_vmm1, collect_residuals_vmm2, ResidualRecord};

use crate::data::SensorFrame;
use crate::error::{Error, Result};
use crate::sim::VehicleGeometry;

/// Speed below which the wheel-speed sideslip estimate is undefined.
pub const VMM2_MIN_SPEED: f64 = 0.5;

/// Geometric kinematic estimate of sideslip and yaw rate.
///
/// `beta = atan(l_r/l * tan(theta_A))`, `yaw = v * tan(theta_A) / l` with
/// the Ackermann angle `theta_A = theta_sw / r_s`.
pub fn vmm1_estimate(frame: &SensorFrame, geom: &VehicleGeometry) -> Result<(f64, f64)> {
    let theta_a = frame.theta_sw / geom.r_s;
    if theta_a.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::SteeringDomain { theta: theta_a });
    }
    let beta = (geom.l_r / geom.l * theta_a.tan()).atan();
    let yaw = frame.v_s * theta_a.tan() / geom.l;
    Ok((beta, yaw))
}

/// Yaw-rate-residual uncertainty for the geometric model.
///
/// The absolute value of the residual is used; an uncertainty must be
/// non-negative.
pub fn vmm1_uncertainty(yaw_rate_vm1: f64, yaw_rate_obd: f64) -> f64 {
    (yaw_rate_vm1 - yaw_rate_obd).abs()
}

/// Raw wheel-speed sideslip estimate.
///
/// Longitudinal speed is the mean of all four wheels; the left/right speed
/// difference provides a rough lateral-velocity proxy.
pub fn vmm2_raw(frame: &SensorFrame) -> Result<f64> {
    let v_x = (frame.v_fl + frame.v_fr + frame.v_rl + frame.v_rr) / 4.0;
    if v_x <= VMM2_MIN_SPEED {
        return Err(Error::Standstill { v: v_x });
    }
    let v_y = (frame.v_fr - frame.v_fl + frame.v_rr - frame.v_rl) / 2.0;
    Ok((v_y / v_x).atan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{DEG2RAD, RAD2DEG};
    use approx::assert_relative_eq;

    fn frame(v: f64, sw: f64, wheels: [f64; 4]) -> SensorFrame {
        SensorFrame {
            t: 0.0,
            v_s: v,
            theta_sw: sw,
            yaw_rate_obd: 0.0,
            a_y: 0.0,
            p_br: 0.0,
            v_fl: wheels[0],
            v_fr: wheels[1],
            v_rl: wheels[2],
            v_rr: wheels[3],
        }
    }

    #[test]
    fn zero_steering_gives_zero_estimates() {
        let g = VehicleGeometry::default();
        let (b, y) = vmm1_estimate(&frame(10.0, 0.0, [10.0; 4]), &g).unwrap();
        assert_eq!(b, 0.0);
        assert_eq!(y, 0.0);
    }

    // Oracle: direct evaluation of the geometric formulas.
    #[test]
    fn vmm1_matches_direct_formula() {
        let g = VehicleGeometry {
            l: 2.5,
            l_r: 1.25,
            r_s: 1.0,
            ..VehicleGeometry::default()
        };
        let (b, _) = vmm1_estimate(&frame(10.0, 1.0 * DEG2RAD, [10.0; 4]), &g).unwrap();
        assert_relative_eq!(b * RAD2DEG, 0.50003808007737817, epsilon = 1e-12);

        let (_, y) = vmm1_estimate(&frame(10.0, 0.1, [10.0; 4]), &g).unwrap();
        assert_relative_eq!(y, 10.0 * 0.1_f64.tan() / 2.5, epsilon = 1e-12);
        assert_relative_eq!(y, 0.40133, max_relative = 1e-4);
    }

    #[test]
    fn vmm1_beta_is_odd_in_steering() {
        let g = VehicleGeometry::default();
        for sw in [0.1, 0.5, 1.4, 6.0] {
            let (b_pos, _) = vmm1_estimate(&frame(8.0, sw, [8.0; 4]), &g).unwrap();
            let (b_neg, _) = vmm1_estimate(&frame(8.0, -sw, [8.0; 4]), &g).unwrap();
            assert_relative_eq!(b_pos, -b_neg, epsilon = 1e-15);
        }
    }

    #[test]
    fn vmm1_rejects_steering_past_quarter_turn_of_the_wheels() {
        let g = VehicleGeometry { r_s: 1.0, ..VehicleGeometry::default() };
        match vmm1_estimate(&frame(5.0, 1.6, [5.0; 4]), &g) {
            Err(Error::SteeringDomain { .. }) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn vmm1_uncertainty_examples() {
        assert_eq!(vmm1_uncertainty(0.3, 0.3), 0.0);
        assert_relative_eq!(vmm1_uncertainty(0.5, 0.3), 0.2, epsilon = 1e-15);
        assert_eq!(vmm1_uncertainty(0.5, 0.3), vmm1_uncertainty(0.3, 0.5));
    }

    #[test]
    fn symmetric_wheels_give_zero_sideslip() {
        assert_eq!(vmm2_raw(&frame(10.0, 0.0, [10.0; 4])).unwrap(), 0.0);
    }

    // Oracle: direct evaluation, v_x = 10, v_y = 2.
    #[test]
    fn vmm2_matches_direct_formula() {
        let b = vmm2_raw(&frame(10.0, 0.0, [9.0, 11.0, 9.0, 11.0])).unwrap();
        assert_relative_eq!(b * RAD2DEG, 11.309932474020213, epsilon = 1e-12);
    }

    #[test]
    fn swapping_sides_flips_the_sign() {
        let b1 = vmm2_raw(&frame(10.0, 0.0, [9.0, 11.0, 9.5, 10.5])).unwrap();
        let b2 = vmm2_raw(&frame(10.0, 0.0, [11.0, 9.0, 10.5, 9.5])).unwrap();
        assert_relative_eq!(b1, -b2, epsilon = 1e-15);
    }

    #[test]
    fn standstill_is_an_error() {
        match vmm2_raw(&frame(0.1, 0.0, [0.1, 0.1, 0.1, 0.1])) {
            Err(Error::Standstill { .. }) => {}
            other => panic!("expected standstill, got {other:?}"),
        }
    }
}
