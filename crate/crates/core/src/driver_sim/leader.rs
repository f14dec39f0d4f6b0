use std::f64::consts::PI;

/// Speed profile of the lead vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedProfile {
    /// Sinusoidal slowdown from `v0` by `dv` over `duration`, constant after.
    Sinusoidal {
        v0: f64,
        dv: f64,
        duration: f64,
    },
    Constant {
        v: f64,
    },
}

/// Lead-vehicle trajectory, with position measured from the ego's start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderProfile {
    pub profile: SpeedProfile,
    pub initial_position: f64,
    /// Earliest time the vehicle is in the ego's lane (cut-ins appear at 0).
    pub appears_at: f64,
}

impl LeaderProfile {
    /// Position and speed at time `t`; before zero the initial speed is extrapolated.
    pub fn state(&self, t: f64) -> (f64, f64) {
        let x0 = self.initial_position;
        match self.profile {
            SpeedProfile::Constant { v } => (x0 + v * t, v),
            SpeedProfile::Sinusoidal { v0, dv, duration } => {
                if t <= 0.0 {
                    (x0 + v0 * t, v0)
                } else if t < duration {
                    let w = PI / duration;
                    let v = v0 - 0.5 * dv * (1.0 - (w * t).cos());
                    let x = x0 + v0 * t - 0.5 * dv * (t - (w * t).sin() / w);
                    (x, v)
                } else {
                    let x_end = x0 + v0 * duration - 0.5 * dv * duration;
                    (x_end + (v0 - dv) * (t - duration), v0 - dv)
                }
            }
        }
    }

    pub fn present_at(&self, t: f64) -> bool {
        t >= self.appears_at
    }

    /// Time after which the leader drives at constant speed.
    pub fn activity_end(&self) -> f64 {
        match self.profile {
            SpeedProfile::Sinusoidal { duration, .. } => duration,
            SpeedProfile::Constant { .. } => 0.0,
        }
    }

    /// Acceleration at `t` (analytic derivative of the speed profile).
    pub fn acceleration(&self, t: f64) -> f64 {
        match self.profile {
            SpeedProfile::Sinusoidal { dv, duration, .. } if t > 0.0 && t < duration => {
                let w = PI / duration;
                -0.5 * dv * w * (w * t).sin()
            }
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvd(v0: f64, ratio: f64, abar: f64) -> LeaderProfile {
        let dv = ratio * v0;
        LeaderProfile {
            profile: SpeedProfile::Sinusoidal {
                v0,
                dv,
                duration: dv / abar,
            },
            initial_position: 30.0,
            appears_at: f64::NEG_INFINITY,
        }
    }

    #[test]
    fn endpoint_speed_and_mean_deceleration() {
        let p = lvd(25.0, 0.4, 2.0);
        let td = p.activity_end();
        assert!((p.state(td).1 - 15.0).abs() < 1e-12);
        assert!(((p.state(0.0).1 - p.state(td).1) / td - 2.0).abs() < 1e-12);
        assert_eq!(p.state(td + 3.0).1, 15.0);
    }

    #[test]
    fn peak_deceleration_at_midpoint() {
        let abar = 3.0;
        let p = lvd(30.0, 0.5, abar);
        let td = p.activity_end();
        assert!((p.acceleration(td / 2.0) + 0.5 * PI * abar).abs() < 1e-12);
        // finite-difference check of the speed profile at the midpoint
        let e = 1e-6;
        let fd = (p.state(td / 2.0 + e).1 - p.state(td / 2.0 - e).1) / (2.0 * e);
        assert!((fd + 0.5 * PI * abar).abs() < 1e-6);
    }

    #[test]
    fn position_is_continuous_and_integrates_speed() {
        let p = lvd(20.0, 0.6, 1.5);
        let td = p.activity_end();
        let a = p.state(td - 1e-9).0;
        let b = p.state(td + 1e-9).0;
        assert!((a - b).abs() < 1e-6);
        // trapezoid integral of speed over [0, td] matches the position change
        let n = 100_000;
        let h = td / n as f64;
        let integral: f64 = (0..n)
            .map(|k| 0.5 * h * (p.state(k as f64 * h).1 + p.state((k + 1) as f64 * h).1))
            .sum();
        assert!((integral - (p.state(td).0 - p.state(0.0).0)).abs() < 1e-6);
    }
}
