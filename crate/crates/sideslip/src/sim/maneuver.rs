//! Steering-wheel programs for the maneuver library.
//!
//! Each program is a smooth function of time with parameters drawn once per
//! scenario, so a seed fully determines the excitation.

use rand::Rng;

use crate::data::Maneuver;

/// A parameterized steering-wheel command (rad) over time.
#[derive(Debug, Clone)]
pub enum SteeringProgram {
    Slalom { amp: f64, freq_hz: f64, ramp_s: f64 },
    ConstantRadius { amp: f64, ramp_s: f64 },
    StepSteer { amp: f64, t_step: f64 },
    SineWithDwell { amp: f64, freq_hz: f64, dwell_s: f64, period_s: f64 },
    DoubleLaneChange { amp: f64, pulse_s: f64, gap_s: f64, period_s: f64 },
    FigureEight { amp: f64, period_s: f64, sharpness: f64 },
}

/// Smooth 0 -> 1 -> 0 bump on u in [0, 1].
fn bump(u: f64) -> f64 {
    if (0.0..=1.0).contains(&u) {
        0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos())
    } else {
        0.0
    }
}

impl SteeringProgram {
    /// Draws maneuver parameters. Amplitudes are kept in ranges where the
    /// default geometry stays well below spin while still exercising tire
    /// saturation on the aggressive maneuvers.
    pub fn sample(maneuver: Maneuver, rng: &mut impl Rng) -> Self {
        let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        match maneuver {
            Maneuver::Slalom => SteeringProgram::Slalom {
                amp: dir * rng.gen_range(0.6..2.2),
                freq_hz: rng.gen_range(0.2..0.45),
                ramp_s: 1.5,
            },
            Maneuver::ConstantRadius => SteeringProgram::ConstantRadius {
                amp: dir * rng.gen_range(0.6..2.4),
                ramp_s: 2.0,
            },
            Maneuver::StepSteer => SteeringProgram::StepSteer {
                amp: dir * rng.gen_range(0.6..2.0),
                t_step: rng.gen_range(1.5..3.0),
            },
            Maneuver::SineWithDwell => SteeringProgram::SineWithDwell {
                amp: dir * rng.gen_range(0.8..2.6),
                freq_hz: 0.7,
                dwell_s: 0.5,
                period_s: rng.gen_range(6.0..9.0),
            },
            Maneuver::DoubleLaneChange => SteeringProgram::DoubleLaneChange {
                amp: dir * rng.gen_range(0.8..2.2),
                pulse_s: 1.4,
                gap_s: rng.gen_range(0.2..0.6),
                period_s: rng.gen_range(8.0..11.0),
            },
            Maneuver::FigureEight => SteeringProgram::FigureEight {
                amp: dir * rng.gen_range(6.3..7.5),
                period_s: rng.gen_range(9.0..13.0),
                sharpness: 3.0,
            },
        }
    }

    /// Steering-wheel angle (rad) at time `t` seconds.
    pub fn theta_sw(&self, t: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            SteeringProgram::Slalom { amp, freq_hz, ramp_s } => {
                let ramp = (t / ramp_s).clamp(0.0, 1.0);
                amp * ramp * (2.0 * PI * freq_hz * t).sin()
            }
            SteeringProgram::ConstantRadius { amp, ramp_s } => {
                amp * (t / ramp_s).clamp(0.0, 1.0)
            }
            SteeringProgram::StepSteer { amp, t_step } => {
                if t < t_step {
                    0.0
                } else {
                    amp
                }
            }
            SteeringProgram::SineWithDwell { amp, freq_hz, dwell_s, period_s } => {
                let cycle = 1.0 / freq_hz;
                let tau = t % period_s;
                let three_quarter = 0.75 * cycle;
                if tau < three_quarter {
                    amp * (2.0 * PI * freq_hz * tau).sin()
                } else if tau < three_quarter + dwell_s {
                    -amp
                } else if tau < cycle + dwell_s {
                    amp * (2.0 * PI * freq_hz * (tau - dwell_s)).sin()
                } else {
                    0.0
                }
            }
            SteeringProgram::DoubleLaneChange { amp, pulse_s, gap_s, period_s } => {
                let tau = t % period_s;
                let start = 1.0;
                amp * bump((tau - start) / pulse_s)
                    - amp * bump((tau - start - pulse_s - gap_s) / pulse_s)
            }
            SteeringProgram::FigureEight { amp, period_s, sharpness } => {
                amp * (sharpness * (2.0 * PI * t / period_s).sin()).tanh()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn programs_start_near_zero_steer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in Maneuver::ALL {
            let p = SteeringProgram::sample(m, &mut rng);
            assert!(
                p.theta_sw(0.0).abs() < 1e-9,
                "{m} starts at {}",
                p.theta_sw(0.0)
            );
        }
    }

    #[test]
    fn sine_with_dwell_holds_the_trough() {
        let p = SteeringProgram::SineWithDwell {
            amp: 2.0,
            freq_hz: 0.7,
            dwell_s: 0.5,
            period_s: 8.0,
        };
        let cycle = 1.0 / 0.7;
        let t0 = 0.75 * cycle;
        for k in 0..10 {
            let t = t0 + 0.05 * k as f64;
            assert_eq!(p.theta_sw(t), -2.0);
        }
        // completes the cycle after the dwell
        assert!(p.theta_sw(cycle + 0.45).abs() < 2.0);
    }

    #[test]
    fn double_lane_change_returns_to_center() {
        let p = SteeringProgram::DoubleLaneChange {
            amp: 1.5,
            pulse_s: 1.4,
            gap_s: 0.4,
            period_s: 9.0,
        };
        // after both pulses the command is zero until the period repeats
        for k in 0..8 {
            let t = 1.0 + 2.0 * 1.4 + 0.4 + 0.2 + 0.1 * k as f64;
            assert!(p.theta_sw(t).abs() < 1e-12);
        }
    }

    #[test]
    fn figure_eight_alternates_direction() {
        let p = SteeringProgram::FigureEight { amp: 6.0, period_s: 10.0, sharpness: 3.0 };
        assert!(p.theta_sw(2.5) > 5.0);
        assert!(p.theta_sw(7.5) < -5.0);
    }
}
