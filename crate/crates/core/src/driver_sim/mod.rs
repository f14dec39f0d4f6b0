//! Longitudinal simulation of a skilled and attentive driver.
//!
//! The ego vehicle follows IDM+ with a reaction delay drawn once per run from
//! a log-normal distribution. The driver perceives the scene as it was `τ`
//! seconds ago: both the leader's state and the ego's own speed are read from
//! a delay buffer. Before the scenario starts, the pre-event steady state is
//! extrapolated at constant speed.
//!
//! Each step holds the acceleration sampled at its midpoint, which the delay
//! buffer already covers when `τ ≥ Δt/2`; the step is split where the delayed
//! cut-in leader first becomes visible. Positions advance by the exact
//! constant-acceleration formula, stopping at zero speed.

mod idm;
mod leader;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::scenario_store::ScenarioFamily;

pub use idm::{desired_gap, equilibrium_gap, idm_plus, Leader};
pub use leader::{LeaderProfile, SpeedProfile};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid {family} scenario {theta:?}: {reason}")]
    InvalidSpec {
        family: ScenarioFamily,
        theta: Vec<f64>,
        reason: String,
    },
    #[error("invalid driver configuration: {0}")]
    InvalidDriver(String),
    #[error("invalid simulation settings: {0}")]
    InvalidSettings(String),
    #[error("trajectory output: {0}")]
    Io(#[from] std::io::Error),
}

/// IDM+ parameters and the reaction-time distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverConfig {
    /// Desired time headway `T` (s).
    pub desired_headway: f64,
    /// Maximum acceleration `a` (m/s²).
    pub max_accel: f64,
    /// Comfortable deceleration `b` (m/s²).
    pub comfortable_decel: f64,
    /// Acceleration exponent `δ`.
    pub accel_exponent: f64,
    /// Jam distance `s₀` (m).
    pub jam_distance: f64,
    /// Largest deceleration the driver can apply (m/s²).
    pub braking_cap: f64,
    /// Leaders further than this (m) are ignored.
    pub perception_range: f64,
    /// Mean of the log-normal reaction time (s).
    pub reaction_mean: f64,
    /// Standard deviation of the log-normal reaction time (s); zero gives a fixed delay.
    pub reaction_std: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            desired_headway: 1.2,
            max_accel: 0.73,
            comfortable_decel: 1.67,
            accel_exponent: 4.0,
            jam_distance: 2.0,
            braking_cap: 6.0,
            perception_range: 150.0,
            reaction_mean: 0.92,
            reaction_std: 0.28,
        }
    }
}

impl DriverConfig {
    /// Driver without reaction delay or braking limit.
    pub fn ideal() -> Self {
        DriverConfig {
            braking_cap: f64::INFINITY,
            reaction_mean: 0.0,
            reaction_std: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("desired_headway", self.desired_headway),
            ("max_accel", self.max_accel),
            ("comfortable_decel", self.comfortable_decel),
            ("accel_exponent", self.accel_exponent),
            ("jam_distance", self.jam_distance),
            ("braking_cap", self.braking_cap),
            ("perception_range", self.perception_range),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(SimError::InvalidDriver(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.braking_cap < self.comfortable_decel {
            return Err(SimError::InvalidDriver(format!(
                "braking_cap {} is below comfortable_decel {}",
                self.braking_cap, self.comfortable_decel
            )));
        }
        if !(self.reaction_mean >= 0.0 && self.reaction_mean.is_finite()) {
            return Err(SimError::InvalidDriver(format!(
                "reaction_mean must be >= 0, got {}",
                self.reaction_mean
            )));
        }
        if !(self.reaction_std >= 0.0 && self.reaction_std.is_finite()) {
            return Err(SimError::InvalidDriver(format!(
                "reaction_std must be >= 0, got {}",
                self.reaction_std
            )));
        }
        if self.reaction_std > 0.0 && self.reaction_mean == 0.0 {
            return Err(SimError::InvalidDriver(
                "a random reaction time needs a positive mean".into(),
            ));
        }
        Ok(())
    }

    /// `(μ, σ)` of the normal underlying the reaction-time distribution.
    pub fn reaction_log_params(&self) -> (f64, f64) {
        let cv = self.reaction_std / self.reaction_mean;
        let var = (1.0 + cv * cv).ln();
        (self.reaction_mean.ln() - 0.5 * var, var.sqrt())
    }

    /// Draws one reaction time.
    pub fn sample_reaction<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.reaction_std == 0.0 {
            return self.reaction_mean;
        }
        let (mu, sigma) = self.reaction_log_params();
        LogNormal::new(mu, sigma)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// One concrete scenario: a family and its raw parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: ScenarioFamily,
    pub theta: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(family: ScenarioFamily, theta: Vec<f64>) -> Result<Self, SimError> {
        let spec = ScenarioSpec { family, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.family
            .validate(&self.theta)
            .map_err(|reason| SimError::InvalidSpec {
                family: self.family,
                theta: self.theta.clone(),
                reason,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub ego_position: f64,
    pub ego_speed: f64,
    pub ego_desired_speed: f64,
    pub leader_position: f64,
    pub leader_speed: f64,
}

/// Lead-vehicle trajectory of a scenario.
pub fn leader_profile(spec: &ScenarioSpec, driver: &DriverConfig) -> LeaderProfile {
    let init = initial_conditions(spec, driver);
    let t = &spec.theta;
    match spec.family {
        ScenarioFamily::Lvd => {
            let dv = t[1] * t[0];
            LeaderProfile {
                profile: SpeedProfile::Sinusoidal {
                    v0: t[0],
                    dv,
                    duration: dv / t[2],
                },
                initial_position: init.leader_position,
                appears_at: f64::NEG_INFINITY,
            }
        }
        ScenarioFamily::CutIn => LeaderProfile {
            profile: SpeedProfile::Constant {
                v: init.leader_speed,
            },
            initial_position: init.leader_position,
            appears_at: 0.0,
        },
        ScenarioFamily::Asv => LeaderProfile {
            profile: SpeedProfile::Constant {
                v: init.leader_speed,
            },
            initial_position: init.leader_position,
            appears_at: f64::NEG_INFINITY,
        },
    }
}

/// State at `t = 0`; the ego starts at position zero.
pub fn initial_conditions(spec: &ScenarioSpec, driver: &DriverConfig) -> InitialConditions {
    let t = &spec.theta;
    let (ego_speed, gap, leader_speed) = match spec.family {
        ScenarioFamily::Lvd => (t[0], equilibrium_gap(driver, t[0]), t[0]),
        ScenarioFamily::CutIn => (t[1], t[0], t[2] * t[1]),
        ScenarioFamily::Asv => (t[0], driver.perception_range, t[1] * t[0]),
    };
    InitialConditions {
        ego_position: 0.0,
        ego_speed,
        ego_desired_speed: ego_speed,
        leader_position: gap,
        leader_speed,
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub dt: f64,
    pub horizon: f64,
    /// End the run once the leader has finished its manoeuvre and both
    /// vehicles drive at constant, equal speed (nothing can change after).
    pub stop_when_settled: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            dt: 0.01,
            horizon: 60.0,
            stop_when_settled: true,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidSettings(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::InvalidSettings(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub collision: bool,
    /// Smallest time-to-collision over the run (s); `+∞` if never approaching.
    #[serde(with = "infinite_as_null")]
    pub min_ttc: f64,
    /// Gap at the end of the run (m); non-positive after a collision.
    pub final_gap: f64,
    pub reaction_delay_used: f64,
    pub collision_time: Option<f64>,
    /// Simulated time (s).
    pub duration: f64,
}

/// JSON has no infinity; `+∞` is written as `null`.
mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub ego_pos: f64,
    pub ego_v: f64,
    pub ego_a: f64,
    pub lead_pos: f64,
    pub lead_v: f64,
    pub gap: f64,
    pub ttc: f64,
}

/// Simulates with the default integration settings.
pub fn simulate(
    spec: &ScenarioSpec,
    driver: &DriverConfig,
    seed: u64,
) -> Result<SimulationOutcome, SimError> {
    simulate_with(spec, driver, &SimSettings::default(), seed, None)
}

/// Simulates one run; `trace` collects every integration step when given.
pub fn simulate_with(
    spec: &ScenarioSpec,
    driver: &DriverConfig,
    settings: &SimSettings,
    seed: u64,
    trace: Option<&mut Vec<TracePoint>>,
) -> Result<SimulationOutcome, SimError> {
    spec.validate()?;
    driver.validate()?;
    settings.validate()?;
    let tau = driver.sample_reaction(&mut rng_from_seed(seed));
    Ok(run(spec, driver, settings, tau, trace))
}

/// Simulates with a given reaction delay instead of a sampled one.
pub fn simulate_with_delay(
    spec: &ScenarioSpec,
    driver: &DriverConfig,
    settings: &SimSettings,
    reaction_delay: f64,
    trace: Option<&mut Vec<TracePoint>>,
) -> Result<SimulationOutcome, SimError> {
    spec.validate()?;
    driver.validate()?;
    settings.validate()?;
    if !(reaction_delay >= 0.0 && reaction_delay.is_finite()) {
        return Err(SimError::InvalidSettings(format!(
            "reaction delay must be >= 0, got {reaction_delay}"
        )));
    }
    Ok(run(spec, driver, settings, reaction_delay, trace))
}

fn run(
    spec: &ScenarioSpec,
    driver: &DriverConfig,
    settings: &SimSettings,
    tau: f64,
    mut trace: Option<&mut Vec<TracePoint>>,
) -> SimulationOutcome {
    const SETTLED: f64 = 1e-6;

    let init = initial_conditions(spec, driver);
    let leader = leader_profile(spec, driver);
    let dt = settings.dt;
    let steps = (settings.horizon / dt).round() as usize;
    let v_des = init.ego_desired_speed;
    let settle_after = leader.activity_end() + tau;

    // Ego position and speed at every step, for the delay buffer.
    let mut history: Vec<(f64, f64)> = Vec::with_capacity(steps.min(1 << 16) + 1);
    let (mut x, mut v) = (init.ego_position, init.ego_speed);
    history.push((x, v));

    let ego_at = |history: &[(f64, f64)], t: f64| -> (f64, f64) {
        if t <= 0.0 {
            return (init.ego_position + init.ego_speed * t, init.ego_speed);
        }
        let f = t / dt;
        let k = (f.floor() as usize).min(history.len() - 1);
        let w = f - k as f64;
        if k + 1 >= history.len() || w <= 0.0 {
            return history[k];
        }
        let (a, b) = (history[k], history[k + 1]);
        (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1))
    };

    // Acceleration commanded at time `t`, from the state perceived at `t − τ`.
    let accel_at = |history: &[(f64, f64)], t: f64| -> (f64, f64) {
        let (xp, vp) = ego_at(history, t - tau);
        let perceived = leader
            .present_at(t - tau)
            .then(|| {
                let (xlp, vlp) = leader.state(t - tau);
                Leader {
                    gap: xlp - xp,
                    approach_rate: vp - vlp,
                }
            })
            .filter(|l| l.gap <= driver.perception_range);
        let acc =
            idm_plus(driver, vp, v_des, perceived).clamp(-driver.braking_cap, driver.max_accel);
        (acc, vp)
    };
    // Midpoint sampling needs the delayed state half a step ahead.
    let midpoint = tau >= 0.5 * dt;
    let perceived_from = leader.appears_at + tau;

    let mut min_ttc = f64::INFINITY;
    let mut collision_time = None;
    let mut gap = f64::INFINITY;
    let mut t = 0.0;
    for k in 0..=steps {
        t = k as f64 * dt;
        let (xl, vl) = leader.state(t);
        let present = leader.present_at(t);
        gap = if present { xl - x } else { f64::INFINITY };
        let ttc = if present && gap > 0.0 && v > vl {
            gap / (v - vl)
        } else {
            f64::INFINITY
        };
        min_ttc = min_ttc.min(ttc);
        if gap <= 0.0 {
            collision_time = Some(t);
        }

        let (acc, vp) = accel_at(&history, t);
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(TracePoint {
                t,
                ego_pos: x,
                ego_v: v,
                ego_a: acc,
                lead_pos: xl,
                lead_v: vl,
                gap,
                ttc,
            });
        }
        if collision_time.is_some() || k == steps {
            break;
        }
        if settings.stop_when_settled
            && t > settle_after
            && present
            && (v - vl).abs() < SETTLED
            && (vp - vl).abs() < SETTLED
            && acc.abs() < SETTLED
        {
            break;
        }

        // piecewise-constant acceleration over the step, split where the
        // delayed leader first becomes visible
        let pieces: Vec<(f64, f64)> = if !midpoint {
            vec![(acc, dt)]
        } else if perceived_from > t && perceived_from < t + dt {
            let s1 = perceived_from - t;
            let s2 = dt - s1;
            vec![
                (accel_at(&history, t + 0.5 * s1).0, s1),
                (accel_at(&history, perceived_from + 0.5 * s2).0, s2),
            ]
        } else {
            vec![(accel_at(&history, t + 0.5 * dt).0, dt)]
        };
        for (a, span) in pieces {
            let v_next = v + a * span;
            if v_next >= 0.0 {
                x += 0.5 * (v + v_next) * span;
                v = v_next;
            } else {
                // comes to rest inside the piece
                x += 0.5 * v * (v / -a);
                v = 0.0;
            }
        }
        history.push((x, v));
    }

    SimulationOutcome {
        collision: collision_time.is_some(),
        min_ttc,
        final_gap: gap,
        reaction_delay_used: tau,
        collision_time,
        duration: t,
    }
}

/// Writes a trajectory as CSV with columns `t,ego_pos,ego_v,ego_a,lead_pos,lead_v,gap,ttc`.
pub fn write_trace<W: Write>(writer: W, trace: &[TracePoint]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in trace {
        w.serialize(p)
            .map_err(|e| SimError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn spec(family: ScenarioFamily, theta: &[f64]) -> ScenarioSpec {
        ScenarioSpec::new(family, theta.to_vec()).unwrap()
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ScenarioSpec::new(ScenarioFamily::Lvd, vec![20.0, 1.0, 2.0]).is_err());
        assert!(ScenarioSpec::new(ScenarioFamily::Asv, vec![20.0, 1.0]).is_err());
        assert!(ScenarioSpec::new(ScenarioFamily::CutIn, vec![-1.0, 20.0, 0.5]).is_err());
        let bad = ScenarioSpec {
            family: ScenarioFamily::Lvd,
            theta: vec![20.0],
        };
        assert!(simulate(&bad, &DriverConfig::default(), 0).is_err());
    }

    #[test]
    fn invalid_driver_is_rejected() {
        let d = DriverConfig {
            braking_cap: 1.0,
            ..Default::default()
        };
        assert!(d.validate().is_err());
        let d = DriverConfig {
            desired_headway: 0.0,
            ..Default::default()
        };
        assert!(d.validate().is_err());
        assert!(DriverConfig::ideal().validate().is_ok());
    }

    #[test]
    fn initial_conditions_per_family() {
        let d = DriverConfig::default();
        let lvd = initial_conditions(&spec(ScenarioFamily::Lvd, &[20.0, 0.5, 2.0]), &d);
        assert!((lvd.leader_position - 26.0).abs() < 1e-12);
        assert_eq!((lvd.ego_speed, lvd.leader_speed), (20.0, 20.0));
        let asv = initial_conditions(&spec(ScenarioFamily::Asv, &[30.0, 0.2]), &d);
        assert_eq!(asv.leader_position, 150.0);
        assert!((asv.leader_speed - 6.0).abs() < 1e-12);
        let cut = initial_conditions(&spec(ScenarioFamily::CutIn, &[12.5, 25.0, 0.8]), &d);
        assert_eq!(cut.leader_position, 12.5);
        assert_eq!(cut.ego_desired_speed, 25.0);
        assert!((cut.leader_speed - 20.0).abs() < 1e-12);
    }

    #[test]
    fn reaction_time_moments() {
        let d = DriverConfig::default();
        let (mu, sigma) = d.reaction_log_params();
        let s2 = (1.0 + (0.28f64 / 0.92).powi(2)).ln();
        assert!((sigma * sigma - s2).abs() < 1e-15);
        assert!((mu - (0.92f64.ln() - s2 / 2.0)).abs() < 1e-15);
        // analytic moments of the log-normal
        let mean = (mu + sigma * sigma / 2.0).exp();
        let var = (sigma * sigma).exp_m1() * (2.0 * mu + sigma * sigma).exp();
        assert!((mean - 0.92).abs() < 1e-12);
        assert!((var.sqrt() - 0.28).abs() < 1e-12);
        // sample moments
        let mut rng = crate::rng::StreamRng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample_reaction(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((m - 0.92).abs() < 0.005, "{m}");
        assert!((sd - 0.28).abs() < 0.005, "{sd}");
    }

    #[test]
    fn steady_lvd_without_deceleration_never_approaches() {
        let s = spec(ScenarioFamily::Lvd, &[20.0, 1e-9, 2.0]);
        let out = simulate(&s, &DriverConfig::default(), 1).unwrap();
        assert!(!out.collision);
        assert!(out.min_ttc > 1e6);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec(ScenarioFamily::Lvd, &[30.0, 0.8, 5.0]);
        let d = DriverConfig::default();
        assert_eq!(simulate(&s, &d, 42).unwrap(), simulate(&s, &d, 42).unwrap());
        assert_ne!(
            simulate(&s, &d, 42).unwrap().reaction_delay_used,
            simulate(&s, &d, 43).unwrap().reaction_delay_used
        );
    }

    #[test]
    fn hard_stop_in_front_collides() {
        // leader stopping from 30 m/s at 9 m/s² is beyond the braking cap
        let s = spec(ScenarioFamily::Lvd, &[30.0, 0.99, 9.0]);
        let out = simulate_with_delay(
            &s,
            &DriverConfig::default(),
            &SimSettings::default(),
            1.5,
            None,
        )
        .unwrap();
        assert!(out.collision);
        assert!(out.final_gap <= 0.0);
        assert!(out.min_ttc > 0.0 && out.min_ttc.is_finite());
    }

    #[test]
    fn distant_stationary_vehicle_is_avoided() {
        let s = spec(ScenarioFamily::Asv, &[20.0, 0.0]);
        let out = simulate(&s, &DriverConfig::default(), 9).unwrap();
        assert!(!out.collision, "{out:?}");
        assert!(out.final_gap > 0.0);
    }

    #[test]
    fn far_cut_in_is_unperceived_until_in_range() {
        let s = spec(ScenarioFamily::CutIn, &[400.0, 20.0, 0.5]);
        let mut trace = Vec::new();
        simulate_with_delay(
            &s,
            &DriverConfig::default(),
            &SimSettings::default(),
            0.0,
            Some(&mut trace),
        )
        .unwrap();
        for p in &trace {
            if p.gap > 151.0 {
                assert!(p.ego_a >= 0.0, "{p:?}");
            }
        }
        assert!(trace.iter().any(|p| p.ego_a < 0.0));
    }

    #[test]
    fn speeds_never_negative_and_trace_written() {
        let s = spec(ScenarioFamily::Asv, &[40.0, 0.0]);
        let mut trace = Vec::new();
        let d = DriverConfig {
            braking_cap: 2.0,
            ..Default::default()
        };
        simulate_with(&s, &d, &SimSettings::default(), 5, Some(&mut trace)).unwrap();
        assert!(trace.iter().all(|p| p.ego_v >= 0.0));
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,ego_pos,ego_v,ego_a,lead_pos,lead_v,gap,ttc\n"));
        assert_eq!(text.lines().count(), trace.len() + 1);
    }

    #[test]
    fn outcome_json_round_trip_with_infinite_ttc() {
        let out = SimulationOutcome {
            collision: false,
            min_ttc: f64::INFINITY,
            final_gap: 26.0,
            reaction_delay_used: 0.9,
            collision_time: None,
            duration: 60.0,
        };
        let json = serde_json::to_string(&out).unwrap();
        assert!(json.contains("\"min_ttc\":null"));
        assert_eq!(
            serde_json::from_str::<SimulationOutcome>(&json).unwrap(),
            out
        );
    }
}
