//! Peaks-over-threshold tail modelling with the generalized Pareto distribution.
//!
//! Values are first oriented so that the tail of interest is the upper one:
//! lower tails are handled by negating the data (and negating bounds back).
//! Excesses `y = x − u` over the threshold `u` follow, asymptotically,
//!
//! ```text
//! F(y) = 1 − (1 + ξ y / σ)^(−1/ξ)    ξ ≠ 0
//! F(y) = 1 − exp(−y / σ)             ξ = 0
//! ```
//!
//! with support `y ≥ 0` (and `y ≤ −σ/ξ` when ξ < 0).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimize::NelderMead;

/// Shapes with |ξ| below this use the exponential branch.
pub const SHAPE_ZERO_EPS: f64 = 1e-9;
pub const MIN_EXCESSES: usize = 10;
pub const MAX_FIT_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum EvtError {
    #[error("no values to build an excess set from")]
    Empty,
    #[error("non-finite value in tail data")]
    NonFinite,
    #[error("exceed fraction must be in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("only {found} excesses above the threshold, need at least {MIN_EXCESSES}")]
    TooFewExcesses { found: usize },
    #[error("maximum likelihood fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("y = {y} outside the GPD support")]
    OutsideSupport { y: f64 },
    #[error("invalid scale {0}: must be positive and finite")]
    InvalidScale(f64),
    #[error("truncation limit {limit} leaves no tail mass above the threshold")]
    InvalidTruncation { limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Upper,
    Lower,
}

impl Orientation {
    /// Maps a raw value into the oriented space (and back; the map is an involution).
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Orientation::Upper => x,
            Orientation::Lower => -x,
        }
    }
}

/// Threshold exceedances of one oriented sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessSet {
    pub threshold: f64,
    pub excesses: Vec<f64>,
    pub total_count: usize,
    pub exceed_prob: f64,
    pub orientation: Orientation,
    /// The whole oriented sample, ascending; needed by the empirical fallback.
    #[serde(skip)]
    pub oriented_sample: Vec<f64>,
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of an ascending sample.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Builds the excess set using the empirical `1 − exceed_fraction` quantile
/// of the oriented sample as threshold.
pub fn build_excess_set(
    values: &[f64],
    orientation: Orientation,
    exceed_fraction: f64,
) -> Result<ExcessSet, EvtError> {
    if values.is_empty() {
        return Err(EvtError::Empty);
    }
    if !(exceed_fraction > 0.0 && exceed_fraction < 1.0) {
        return Err(EvtError::InvalidFraction(exceed_fraction));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvtError::NonFinite);
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| orientation.apply(*v)).collect();
    sorted.sort_by(f64::total_cmp);
    let threshold = empirical_quantile(&sorted, 1.0 - exceed_fraction);
    let excesses: Vec<f64> = sorted
        .iter()
        .filter(|x| **x > threshold)
        .map(|x| x - threshold)
        .collect();
    if excesses.len() < MIN_EXCESSES {
        return Err(EvtError::TooFewExcesses {
            found: excesses.len(),
        });
    }
    Ok(ExcessSet {
        threshold,
        exceed_prob: excesses.len() as f64 / values.len() as f64,
        total_count: values.len(),
        excesses,
        orientation,
        oriented_sample: sorted,
    })
}

/// Feasibility limit in raw units, e.g. a ratio that must stay positive.
/// The fitted excess distribution is truncated at the corresponding excess
/// and renormalized by its mass below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub raw_limit: f64,
    pub max_excess: f64,
    pub renormalization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    #[serde(rename = "u")]
    pub threshold: f64,
    #[serde(rename = "xi")]
    pub shape: f64,
    #[serde(rename = "sigma")]
    pub scale: f64,
    #[serde(rename = "n")]
    pub total_count: usize,
    pub exceed_prob: f64,
    pub orientation: Orientation,
    pub truncation: Option<Truncation>,
    #[serde(skip)]
    pub source: Option<ExcessSet>,
}

fn is_zero_shape(xi: f64) -> bool {
    xi.abs() < SHAPE_ZERO_EPS
}

/// GPD log-likelihood of `excesses`; `-inf` outside the support.
pub fn log_likelihood(shape: f64, scale: f64, excesses: &[f64]) -> f64 {
    if !(scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = excesses.len() as f64;
    if is_zero_shape(shape) {
        return -n * scale.ln() - excesses.iter().sum::<f64>() / scale;
    }
    let mut acc = 0.0;
    for &y in excesses {
        let t = shape * y / scale;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += t.ln_1p();
    }
    -n * scale.ln() - (1.0 + 1.0 / shape) * acc
}

fn moment_start(excesses: &[f64]) -> (f64, f64) {
    let n = excesses.len() as f64;
    let mean = excesses.iter().sum::<f64>() / n;
    let var = excesses
        .iter()
        .map(|y| (y - mean) * (y - mean))
        .sum::<f64>()
        / (n - 1.0);
    let r = mean * mean / var;
    let shape = 0.5 * (1.0 - r);
    let scale = 0.5 * mean * (1.0 + r);
    let max = excesses.iter().copied().fold(0.0, f64::max);
    if shape < 0.0 && max >= -scale / shape {
        (0.0, mean)
    } else {
        (shape, scale)
    }
}

/// Maximum likelihood fit of (ξ, σ) by Nelder–Mead over (ξ, ln σ), started
/// from the method-of-moments estimate.
pub fn fit_gpd(excess: &ExcessSet) -> Result<GpdFit, EvtError> {
    let ys = &excess.excesses;
    if ys.len() < MIN_EXCESSES {
        return Err(EvtError::TooFewExcesses { found: ys.len() });
    }
    let max_y = ys.iter().copied().fold(0.0, f64::max);
    let objective = |p: &[f64]| {
        let (xi, scale) = (p[0], p[1].exp());
        // ξ ≤ −1 makes the likelihood unbounded at the support edge
        if xi <= -1.0 || (xi < 0.0 && max_y >= -scale / xi) {
            return f64::INFINITY;
        }
        let ll = log_likelihood(xi, scale, ys);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let (xi0, sigma0) = moment_start(ys);
    let nm = NelderMead {
        max_iter: MAX_FIT_ITERATIONS,
        ..Default::default()
    };
    let mut start = vec![xi0, sigma0.ln()];
    let mut total = 0;
    let mut result = None;
    // restart from the optimum once: a collapsed simplex can stall early
    for _ in 0..2 {
        let r = nm.minimize(objective, &start, &[0.1, 0.1]);
        total += r.iterations;
        if !r.converged {
            return Err(EvtError::NoConvergence { iterations: total });
        }
        start = r.x.clone();
        result = Some(r);
    }
    let r = result.expect("at least one pass");
    Ok(GpdFit {
        threshold: excess.threshold,
        shape: r.x[0],
        scale: r.x[1].exp(),
        total_count: excess.total_count,
        exceed_prob: excess.exceed_prob,
        orientation: excess.orientation,
        truncation: None,
        source: Some(excess.clone()),
    })
}

impl GpdFit {
    /// A fit from known parameters, e.g. published estimates.
    pub fn from_parameters(
        threshold: f64,
        shape: f64,
        scale: f64,
        exceed_prob: f64,
        orientation: Orientation,
    ) -> Result<Self, EvtError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(EvtError::InvalidScale(scale));
        }
        if !(exceed_prob > 0.0 && exceed_prob <= 1.0) {
            return Err(EvtError::InvalidFraction(exceed_prob));
        }
        Ok(GpdFit {
            threshold,
            shape,
            scale,
            total_count: 0,
            exceed_prob,
            orientation,
            truncation: None,
            source: None,
        })
    }

    /// Upper end of the excess support (`+∞` unless ξ < 0).
    pub fn support_end(&self) -> f64 {
        if self.shape < 0.0 && !is_zero_shape(self.shape) {
            -self.scale / self.shape
        } else {
            f64::INFINITY
        }
    }

    /// Truncates the fitted tail at a raw feasibility limit: raw values must
    /// stay below `raw_limit` for upper orientation, above it for lower.
    pub fn with_truncation(mut self, raw_limit: f64) -> Result<Self, EvtError> {
        let max_excess = self.orientation.apply(raw_limit) - self.threshold;
        if !(max_excess > 0.0) {
            return Err(EvtError::InvalidTruncation { limit: raw_limit });
        }
        let renormalization = if max_excess >= self.support_end() {
            1.0
        } else {
            self.cdf_unchecked(max_excess)
        };
        self.truncation = Some(Truncation {
            raw_limit,
            max_excess,
            renormalization,
        });
        Ok(self)
    }

    fn cdf_unchecked(&self, y: f64) -> f64 {
        if is_zero_shape(self.shape) {
            -(-y / self.scale).exp_m1()
        } else {
            -(-(self.shape * y / self.scale).ln_1p() / self.shape).exp_m1()
        }
    }

    fn check_support(&self, y: f64) -> Result<(), EvtError> {
        if !(y >= 0.0) || y > self.support_end() {
            Err(EvtError::OutsideSupport { y })
        } else {
            Ok(())
        }
    }

    /// GPD CDF of the excess `y` (untruncated).
    pub fn cdf(&self, y: f64) -> Result<f64, EvtError> {
        self.check_support(y)?;
        Ok(self.cdf_unchecked(y))
    }

    /// Survival function `1 − F(y)`, computed without cancellation.
    pub fn sf(&self, y: f64) -> Result<f64, EvtError> {
        self.check_support(y)?;
        Ok(if is_zero_shape(self.shape) {
            (-y / self.scale).exp()
        } else {
            (-(self.shape * y / self.scale).ln_1p() / self.shape).exp()
        })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if self.check_support(y).is_err() {
            return 0.0;
        }
        if is_zero_shape(self.shape) {
            (-y / self.scale).exp() / self.scale
        } else {
            let t = self.shape * y / self.scale;
            (-(1.0 + 1.0 / self.shape) * t.ln_1p()).exp() / self.scale
        }
    }

    /// Excess `y` with `F(y) = p`; `p` is clamped to `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return self.support_end();
        }
        if is_zero_shape(self.shape) {
            -self.scale * (-p).ln_1p()
        } else {
            self.scale / self.shape * (-self.shape * (-p).ln_1p()).exp_m1()
        }
    }

    /// Density of the raw variable implied by the tail model, for x in the tail.
    pub fn raw_tail_pdf(&self, raw: f64) -> f64 {
        let y = self.orientation.apply(raw) - self.threshold;
        let scale = match self.truncation {
            Some(t) if y > t.max_excess => return 0.0,
            Some(t) => 1.0 / t.renormalization,
            None => 1.0,
        };
        self.exceed_prob * self.pdf(y) * scale
    }
}

/// Free-function forms matching the module vocabulary.
pub fn gpd_cdf(fit: &GpdFit, y: f64) -> Result<f64, EvtError> {
    fit.cdf(y)
}

pub fn tail_quantile(fit: &GpdFit, target_excess_cdf: f64) -> f64 {
    fit.quantile(target_excess_cdf)
}
