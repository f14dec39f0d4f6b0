//! Collision-probability estimation.
//!
//! Category level: crude Monte Carlo over the scenario density, followed by
//! importance sampling from a density fitted to the most critical pilot runs.
//! Scenario level: a sequential binomial test per parameter vector, and the
//! boundary where the collision probability crosses a threshold on a grid.

mod grid;
mod sequential;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityError, KdeModel};
use crate::driver_sim::{simulate_with, DriverConfig, ScenarioSpec, SimError, SimSettings};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scenario_store::ScenarioFamily;

pub use grid::{grid_boundary, BoundaryCurve, Crossing, GridAxis, GridNode, GridSpec};
pub use sequential::{
    binomial_tails, sequential_probability, SequentialOptions, SequentialResult, Verdict,
};

/// Draws rejected by the simulator's validity check before giving up.
const MAX_INVALID_DRAWS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum PreventableError {
    #[error("{name} must lie in (0, 1), got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("run cap must be at least 1")]
    InvalidCap,
    #[error("at least one run is required")]
    NoRuns,
    #[error(
        "need 3 <= n_critical < pilot size, got n_critical = {n_critical} with {pilot} pilot runs"
    )]
    InvalidCriticalCount { n_critical: usize, pilot: usize },
    #[error("importance density must share the transformed space of the scenario density")]
    SpaceMismatch,
    #[error("no valid scenario after {0} draws")]
    NoValidDraw(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Result of one simulation as needed by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub collision: bool,
    pub min_ttc: f64,
    pub final_gap: f64,
}

impl RunOutcome {
    pub fn from_collision(collision: bool) -> Self {
        RunOutcome {
            collision,
            min_ttc: f64::INFINITY,
            final_gap: f64::NAN,
        }
    }
}

/// Anything that maps a parameter vector and a seed to a collision outcome.
pub trait CollisionModel: Sync {
    fn run(&self, theta: &[f64], seed: u64) -> Result<RunOutcome, PreventableError>;

    /// Whether `theta` can be simulated; invalid draws are resampled.
    fn accepts(&self, _theta: &[f64]) -> bool {
        true
    }
}

impl<F> CollisionModel for F
where
    F: Fn(&[f64], u64) -> RunOutcome + Sync,
{
    fn run(&self, theta: &[f64], seed: u64) -> Result<RunOutcome, PreventableError> {
        Ok(self(theta, seed))
    }
}

/// The IDM+ driver simulator for one scenario family.
#[derive(Debug, Clone, Copy)]
pub struct DriverSimulator {
    pub family: ScenarioFamily,
    pub driver: DriverConfig,
    pub settings: SimSettings,
}

impl DriverSimulator {
    pub fn new(family: ScenarioFamily, driver: DriverConfig) -> Self {
        DriverSimulator {
            family,
            driver,
            settings: SimSettings::default(),
        }
    }
}

impl CollisionModel for DriverSimulator {
    fn run(&self, theta: &[f64], seed: u64) -> Result<RunOutcome, PreventableError> {
        let spec = ScenarioSpec {
            family: self.family,
            theta: theta.to_vec(),
        };
        let out = simulate_with(&spec, &self.driver, &self.settings, seed, None)?;
        Ok(RunOutcome {
            collision: out.collision,
            min_ttc: out.min_ttc,
            final_gap: out.final_gap,
        })
    }

    fn accepts(&self, theta: &[f64]) -> bool {
        self.family.validate(theta).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Crude,
    Importance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
    pub estimator: Estimator,
}

impl RiskEstimate {
    /// Mean of the terms and `(1/N)·sqrt(Σ (termᵢ − mean)²)`.
    fn from_terms(terms: &[f64], estimator: Estimator) -> Self {
        let n = terms.len() as f64;
        let mean = terms.iter().sum::<f64>() / n;
        let ss: f64 = terms.iter().map(|t| (t - mean).powi(2)).sum();
        RiskEstimate {
            mean,
            std: ss.sqrt() / n,
            n_runs: terms.len(),
            estimator,
        }
    }
}

/// One pilot run: the sampled parameters and what happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotRun {
    pub theta: Vec<f64>,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct CrudeResult {
    pub estimate: RiskEstimate,
    pub runs: Vec<PilotRun>,
}

/// Draws one valid parameter vector from `density` and simulates it.
/// Run `i` of stream `seed` always sees the same random numbers.
fn draw_and_run<M: CollisionModel + ?Sized>(
    density: &KdeModel,
    model: &M,
    seed: u64,
    i: usize,
) -> Result<PilotRun, PreventableError> {
    let mut rng = rng_from_seed(derive_seed(seed, i as u64));
    for _ in 0..MAX_INVALID_DRAWS {
        let theta = density.sample_one(&mut rng)?;
        if model.accepts(&theta) {
            let sim_seed: u64 = rng.random();
            let outcome = model.run(&theta, sim_seed)?;
            return Ok(PilotRun { theta, outcome });
        }
    }
    Err(PreventableError::NoValidDraw(MAX_INVALID_DRAWS))
}

/// Crude Monte Carlo: `n` draws from the scenario density, one simulation each.
pub fn crude_mc<M: CollisionModel + ?Sized>(
    density: &KdeModel,
    model: &M,
    n: usize,
    seed: u64,
) -> Result<CrudeResult, PreventableError> {
    if n == 0 {
        return Err(PreventableError::NoRuns);
    }
    let runs: Vec<PilotRun> = (0..n)
        .into_par_iter()
        .map(|i| draw_and_run(density, model, seed, i))
        .collect::<Result<_, _>>()?;
    let terms: Vec<f64> = runs
        .iter()
        .map(|r| if r.outcome.collision { 1.0 } else { 0.0 })
        .collect();
    Ok(CrudeResult {
        estimate: RiskEstimate::from_terms(&terms, Estimator::Crude),
        runs,
    })
}

/// Orders runs from most to least critical: collisions first, then by
/// smallest minimum TTC, then by smallest final gap.
pub fn rank_by_criticality(runs: &[PilotRun]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..runs.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&runs[a].outcome, &runs[b].outcome);
        y.collision
            .cmp(&x.collision)
            .then(x.min_ttc.total_cmp(&y.min_ttc))
            .then(x.final_gap.total_cmp(&y.final_gap))
    });
    idx
}

/// Fits a density over the `n_critical` most critical pilot runs, in the same
/// transformed space as `density` but with its own bandwidth.
pub fn build_importance_density(
    density: &KdeModel,
    pilot: &[PilotRun],
    n_critical: usize,
) -> Result<KdeModel, PreventableError> {
    if n_critical < 3 || n_critical >= pilot.len() {
        return Err(PreventableError::InvalidCriticalCount {
            n_critical,
            pilot: pilot.len(),
        });
    }
    let chosen: Vec<Vec<f64>> = rank_by_criticality(pilot)[..n_critical]
        .iter()
        .map(|&i| pilot[i].theta.clone())
        .collect();
    Ok(KdeModel::fit_in_space_of(density, &chosen)?)
}

/// Default number of critical runs: 10% of the pilot, at least 3.
pub fn default_critical_count(pilot_len: usize) -> usize {
    (pilot_len / 10).max(3)
}

/// Importance sampling: draws from `q`, weights collisions by `f/q`.
pub fn importance_mc<M: CollisionModel + ?Sized>(
    density: &KdeModel,
    importance: &KdeModel,
    model: &M,
    n: usize,
    seed: u64,
) -> Result<RiskEstimate, PreventableError> {
    if n == 0 {
        return Err(PreventableError::NoRuns);
    }
    if density.transforms() != importance.transforms() || density.dim() != importance.dim() {
        return Err(PreventableError::SpaceMismatch);
    }
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let run = draw_and_run(importance, model, seed, i)?;
            if !run.outcome.collision {
                return Ok(0.0);
            }
            let y = density.to_transformed(&run.theta);
            let q = importance.pdf_transformed(&y);
            Ok(if q > 0.0 {
                density.pdf_transformed(&y) / q
            } else {
                0.0
            })
        })
        .collect::<Result<_, PreventableError>>()?;
    Ok(RiskEstimate::from_terms(&terms, Estimator::Importance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::ParamTransform;
    use crate::special::norm_cdf;

    fn one_d_model() -> KdeModel {
        let raw: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin() * 2.0 + i as f64 * 0.05])
            .collect();
        KdeModel::fit(&raw, &[ParamTransform::Identity], &[]).unwrap()
    }

    fn tail_prob(model: &KdeModel, c: f64) -> f64 {
        let s = model.standardization()[0];
        let z = (c - s.mean) / s.std;
        let h = model.bandwidth();
        let pts = model.standardized_points();
        pts.iter()
            .map(|p| 1.0 - norm_cdf((z - p[0]) / h))
            .sum::<f64>()
            / pts.len() as f64
    }

    #[test]
    fn never_colliding_gives_zero() {
        let f = one_d_model();
        let stub = |_: &[f64], _: u64| RunOutcome::from_collision(false);
        let r = crude_mc(&f, &stub, 500, 1).unwrap();
        assert_eq!((r.estimate.mean, r.estimate.std), (0.0, 0.0));
        assert_eq!(r.estimate.estimator, Estimator::Crude);
    }

    #[test]
    fn crude_matches_analytic_tail() {
        let f = one_d_model();
        let c = 2.5;
        let stub = move |t: &[f64], _: u64| RunOutcome::from_collision(t[0] > c);
        let r = crude_mc(&f, &stub, 20_000, 2).unwrap().estimate;
        let truth = tail_prob(&f, c);
        assert!(
            (r.mean - truth).abs() < 4.0 * r.std,
            "{} vs {truth} ± {}",
            r.mean,
            r.std
        );
        // mean is k/n
        assert!((r.mean * 20_000.0 - (r.mean * 20_000.0).round()).abs() < 1e-9);
    }

    #[test]
    fn identical_importance_density_reproduces_crude() {
        let f = one_d_model();
        let stub = |t: &[f64], _: u64| RunOutcome::from_collision(t[0] > 1.0);
        let crude = crude_mc(&f, &stub, 2000, 7).unwrap().estimate;
        let is = importance_mc(&f, &f, &stub, 2000, 7).unwrap();
        assert!((crude.mean - is.mean).abs() < 1e-12);
        assert!((crude.std - is.std).abs() < 1e-12);
    }

    #[test]
    fn importance_reduces_variance() {
        let f = one_d_model();
        let c = 3.0;
        let stub = move |t: &[f64], _: u64| RunOutcome {
            collision: t[0] > c,
            min_ttc: (c + 1.0 - t[0]).max(0.01),
            final_gap: 1.0,
        };
        let pilot = crude_mc(&f, &stub, 2000, 11).unwrap();
        let q = build_importance_density(&f, &pilot.runs, 200).unwrap();
        let is = importance_mc(&f, &q, &stub, 2000, 12).unwrap();
        let truth = tail_prob(&f, c);
        assert!(
            (is.mean - truth).abs() < 4.0 * is.std,
            "{} vs {truth}",
            is.mean
        );
        assert!(is.std < pilot.estimate.std);
    }

    #[test]
    fn ranking_prefers_collisions_then_ttc_then_gap() {
        let run = |collision, min_ttc, final_gap| PilotRun {
            theta: vec![0.0],
            outcome: RunOutcome {
                collision,
                min_ttc,
                final_gap,
            },
        };
        let runs = vec![
            run(false, 3.0, 10.0),
            run(false, f64::INFINITY, 5.0),
            run(true, 4.0, -0.1),
            run(false, 1.0, 8.0),
            run(false, f64::INFINITY, 2.0),
        ];
        assert_eq!(rank_by_criticality(&runs), vec![2, 3, 0, 4, 1]);
    }

    #[test]
    fn critical_count_bounds() {
        let f = one_d_model();
        let stub = |t: &[f64], _: u64| RunOutcome {
            collision: false,
            min_ttc: t[0].abs() + 0.1,
            final_gap: 1.0,
        };
        let pilot = crude_mc(&f, &stub, 10, 3).unwrap().runs;
        assert!(build_importance_density(&f, &pilot, 2).is_err());
        assert!(build_importance_density(&f, &pilot, 10).is_err());
        let q = build_importance_density(&f, &pilot, 9).unwrap();
        assert_eq!(q.len(), 9);
        assert_eq!(q.standardization(), f.standardization());
    }

    #[test]
    fn importance_density_centres_on_smallest_ttc() {
        let f = one_d_model();
        let pilot: Vec<PilotRun> = [5.0, -1.0, 0.5, 7.0, 0.6, 0.4, 9.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| PilotRun {
                theta: vec![x],
                outcome: RunOutcome {
                    collision: false,
                    min_ttc: if x < 1.0 { 0.1 * i as f64 } else { 10.0 + x },
                    final_gap: 1.0,
                },
            })
            .collect();
        let q = build_importance_density(&f, &pilot, 3).unwrap();
        let mut pts: Vec<f64> = q.raw_points().into_iter().map(|p| p[0]).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, vec![-1.0, 0.5, 0.6]);
    }

    #[test]
    fn all_infinite_ttc_falls_back_to_final_gap() {
        let pilot: Vec<PilotRun> = [4.0, 1.0, 3.0, 0.5, 2.0]
            .iter()
            .map(|&g| PilotRun {
                theta: vec![g],
                outcome: RunOutcome {
                    collision: false,
                    min_ttc: f64::INFINITY,
                    final_gap: g,
                },
            })
            .collect();
        assert_eq!(rank_by_criticality(&pilot)[..3], [3, 1, 4]);
    }

    #[test]
    fn simulator_model_rejects_invalid_theta() {
        let sim = DriverSimulator::new(ScenarioFamily::Lvd, DriverConfig::default());
        assert!(!sim.accepts(&[20.0, 1.2, 1.0]));
        assert!(sim.accepts(&[20.0, 0.2, 1.0]));
        assert!(!sim.run(&[20.0, 0.2, 1.0], 0).unwrap().collision);
    }
}
