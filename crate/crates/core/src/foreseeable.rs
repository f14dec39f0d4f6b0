//! Reasonably-foreseeable parameter ranges.
//!
//! Given an exposure `E` (encounters per hour) and a threshold `λ` (per hour),
//! the range `[lower, upper]` is chosen so that scenarios outside it occur at
//! rate `λ`, i.e. `E · (1 − P(θ ∈ [lower, upper])) = λ`.
//!
//! Many boxes satisfy this. [`solve_range_kde`] picks one by moving every
//! expanding bound along the KDE marginal quantiles with a single shared
//! parameter `t ∈ [0, 1]` (`t = 0`: marginal median, `t = 1`: ±∞) and
//! bisecting on `t`. [`solve_range_evt`] bounds a single oriented parameter
//! from a fitted tail model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{Hyperrectangle, KdeModel};
use crate::evt::{empirical_quantile, GpdFit, Orientation};
use crate::scenario_store::ExposureEstimate;

pub const BISECTION_TOL: f64 = 1e-6;
pub const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Error)]
pub enum ForeseeableError {
    #[error("threshold exceeds exposure: lambda_fs = {lambda}/h >= exposure {rate}/h")]
    ThresholdExceedsExposure { lambda: f64, rate: f64 },
    #[error("lambda_fs must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("policy has {found} entries for a {expected}-dimensional model")]
    PolicyMismatch { expected: usize, found: usize },
    #[error("no dimension expands")]
    NothingExpands,
    #[error("target probability {target} unreachable under the policy (at most {max})")]
    Unreachable { target: f64, max: f64 },
    #[error(
        "threshold rate below lambda_fs and the fit carries no sample for the empirical fallback"
    )]
    FallbackUnavailable,
}

/// How one dimension's bounds behave while the range grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DimPolicy {
    /// Both bounds fixed.
    Pinned {
        lower: f64,
        upper: f64,
    },
    /// Lower bound fixed, upper bound expands toward +∞.
    ExpandUpper {
        lower: f64,
    },
    /// Upper bound fixed, lower bound expands toward −∞.
    ExpandLower {
        upper: f64,
    },
    ExpandBoth,
}

impl DimPolicy {
    fn expands(&self) -> bool {
        !matches!(self, DimPolicy::Pinned { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForeseeableQuery {
    pub lambda_fs: f64,
    pub policy: Vec<DimPolicy>,
}

impl ForeseeableQuery {
    pub fn expand_both(lambda_fs: f64, d: usize) -> Self {
        ForeseeableQuery {
            lambda_fs,
            policy: vec![DimPolicy::ExpandBoth; d],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForeseeableRange {
    pub rect: Hyperrectangle,
    pub lambda_fs: f64,
    pub exposure_rate: f64,
    pub target_inside_prob: f64,
    pub achieved_inside_prob: f64,
    pub residual_rate: f64,
    /// Shared expansion parameter of the returned box.
    pub expansion: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// `1 − λ/E`, the inside probability a range must reach.
pub fn target_inside_probability(
    exposure_rate: f64,
    lambda_fs: f64,
) -> Result<f64, ForeseeableError> {
    if !(lambda_fs > 0.0 && lambda_fs.is_finite()) {
        return Err(ForeseeableError::InvalidLambda(lambda_fs));
    }
    if lambda_fs >= exposure_rate {
        return Err(ForeseeableError::ThresholdExceedsExposure {
            lambda: lambda_fs,
            rate: exposure_rate,
        });
    }
    Ok(1.0 - lambda_fs / exposure_rate)
}

fn rect_at(model: &KdeModel, policy: &[DimPolicy], t: f64) -> Hyperrectangle {
    let upper_q = |j: usize| {
        if t >= 1.0 {
            model.transforms()[j].inverse(f64::INFINITY)
        } else {
            model.marginal_quantile(j, 0.5 + 0.5 * t)
        }
    };
    let lower_q = |j: usize| {
        if t >= 1.0 {
            model.transforms()[j].inverse(f64::NEG_INFINITY)
        } else {
            model.marginal_quantile(j, 0.5 - 0.5 * t)
        }
    };
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for (j, p) in policy.iter().enumerate() {
        let (l, u) = match *p {
            DimPolicy::Pinned { lower, upper } => (lower, upper),
            DimPolicy::ExpandUpper { lower } => (lower, upper_q(j)),
            DimPolicy::ExpandLower { upper } => (lower_q(j), upper),
            DimPolicy::ExpandBoth => (lower_q(j), upper_q(j)),
        };
        lower.push(l);
        upper.push(u.max(l));
    }
    Hyperrectangle { lower, upper }
}

fn range_warnings(model: &KdeModel, rect: &Hyperrectangle) -> Vec<String> {
    let mut out = Vec::new();
    for j in 0..model.dim() {
        let (lo, hi) = model.data_range(j);
        if rect.upper[j].is_finite() && rect.upper[j] > hi {
            out.push(format!(
                "dimension {j}: upper bound {:.6} lies beyond the largest observation {hi:.6}",
                rect.upper[j]
            ));
        }
        if rect.lower[j].is_finite() && rect.lower[j] < lo {
            out.push(format!(
                "dimension {j}: lower bound {:.6} lies beyond the smallest observation {lo:.6}",
                rect.lower[j]
            ));
        }
    }
    out
}

/// Solves `E · (1 − P(θ ∈ rect)) = λ` for a box following `query.policy`.
pub fn solve_range_kde(
    model: &KdeModel,
    exposure: &ExposureEstimate,
    query: &ForeseeableQuery,
) -> Result<ForeseeableRange, ForeseeableError> {
    let target = target_inside_probability(exposure.rate_per_hour, query.lambda_fs)?;
    if query.policy.len() != model.dim() {
        return Err(ForeseeableError::PolicyMismatch {
            expected: model.dim(),
            found: query.policy.len(),
        });
    }
    if !query.policy.iter().any(DimPolicy::expands) {
        return Err(ForeseeableError::NothingExpands);
    }
    let prob = |t: f64| model.rect_probability(&rect_at(model, &query.policy, t));

    let max = prob(1.0);
    if max < target - BISECTION_TOL {
        return Err(ForeseeableError::Unreachable { target, max });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut t, mut achieved) = (1.0, max);
    let mut iterations = 0;
    let p0 = prob(0.0);
    if p0 >= target {
        t = 0.0;
        achieved = p0;
    } else if (max - target).abs() >= BISECTION_TOL {
        while iterations < MAX_BISECTIONS {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let p = prob(mid);
            t = mid;
            achieved = p;
            if (p - target).abs() < BISECTION_TOL {
                break;
            }
            if p < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let rect = rect_at(model, &query.policy, t);
    let warnings = range_warnings(model, &rect);
    Ok(ForeseeableRange {
        rect,
        lambda_fs: query.lambda_fs,
        exposure_rate: exposure.rate_per_hour,
        target_inside_prob: target,
        achieved_inside_prob: achieved,
        residual_rate: exposure.rate_per_hour * (1.0 - achieved),
        expansion: t,
        iterations,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvtMethod {
    /// Bound from the fitted tail distribution.
    Gpd,
    /// `E · P(θ > bound) = λ` on the empirical distribution, used when the
    /// threshold itself is exceeded less often than `λ`.
    EmpiricalFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvtBound {
    pub orientation: Orientation,
    pub lambda_fs: f64,
    pub exposure_rate: f64,
    pub method: EvtMethod,
    /// Bound in the oriented (possibly negated) space.
    pub oriented_bound: f64,
    /// Bound in raw units: an upper bound for `Upper`, a lower bound for `Lower`.
    pub raw_bound: f64,
    /// `F_GPD(bound − u)` reached by the solution, when the GPD route was taken.
    pub target_excess_cdf: Option<f64>,
}

/// Solves `E · P(θ > u) · (1 − F(θ_up − u)) = λ` in the oriented space.
pub fn solve_range_evt(
    fit: &GpdFit,
    exposure: &ExposureEstimate,
    lambda_fs: f64,
) -> Result<EvtBound, ForeseeableError> {
    target_inside_probability(exposure.rate_per_hour, lambda_fs)?;
    let rate = exposure.rate_per_hour;
    let tail_rate = rate * fit.exceed_prob;
    let (method, oriented, target) = if tail_rate >= lambda_fs {
        let survival = lambda_fs / tail_rate;
        let z = fit.truncation.map_or(1.0, |t| t.renormalization);
        let p = z * (1.0 - survival);
        (EvtMethod::Gpd, fit.threshold + fit.quantile(p), Some(p))
    } else {
        let sample = fit
            .source
            .as_ref()
            .map(|s| &s.oriented_sample)
            .filter(|s| !s.is_empty())
            .ok_or(ForeseeableError::FallbackUnavailable)?;
        (
            EvtMethod::EmpiricalFallback,
            empirical_quantile(sample, 1.0 - lambda_fs / rate),
            None,
        )
    };
    Ok(EvtBound {
        orientation: fit.orientation,
        lambda_fs,
        exposure_rate: rate,
        method,
        oriented_bound: oriented,
        raw_bound: fit.orientation.apply(oriented),
        target_excess_cdf: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{ParamTransform, Standardization};

    fn exposure(rate: f64) -> ExposureEstimate {
        ExposureEstimate {
            category_id: "c".into(),
            count: 0,
            hours: 1.0,
            rate_per_hour: rate,
        }
    }

    fn model_1d() -> KdeModel {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|k| vec![(k as f64 * 0.37).sin() * 2.0 + k as f64 * 0.05])
            .collect();
        KdeModel::fit(&pts, &[ParamTransform::Identity], &[]).unwrap()
    }

    #[test]
    fn exponential_closed_form_bound() {
        let fit = GpdFit::from_parameters(0.0, 0.0, 1.0, 1.0, Orientation::Upper).unwrap();
        let b = solve_range_evt(&fit, &exposure(1.0), (-1.0f64).exp()).unwrap();
        assert!((b.raw_bound - 1.0).abs() < 1e-12);
        assert_eq!(b.method, EvtMethod::Gpd);
    }

    #[test]
    fn lower_orientation_reports_raw_units() {
        let fit = GpdFit::from_parameters(-0.5, 0.0, 0.1, 0.5, Orientation::Lower).unwrap();
        let b = solve_range_evt(&fit, &exposure(2.0), 0.1).unwrap();
        assert!(b.raw_bound < 0.5);
        assert_eq!(b.raw_bound, -b.oriented_bound);
    }

    #[test]
    fn lambda_above_exposure_rejected() {
        let fit = GpdFit::from_parameters(0.0, 0.0, 1.0, 1.0, Orientation::Upper).unwrap();
        assert!(matches!(
            solve_range_evt(&fit, &exposure(1.0), 1.5),
            Err(ForeseeableError::ThresholdExceedsExposure { .. })
        ));
        let m = model_1d();
        let q = ForeseeableQuery::expand_both(2.0, 1);
        assert!(matches!(
            solve_range_kde(&m, &exposure(1.0), &q),
            Err(ForeseeableError::ThresholdExceedsExposure { .. })
        ));
    }

    #[test]
    fn fallback_needs_sample() {
        let fit = GpdFit::from_parameters(0.0, 0.0, 1.0, 0.01, Orientation::Upper).unwrap();
        assert!(matches!(
            solve_range_evt(&fit, &exposure(1.0), 0.5),
            Err(ForeseeableError::FallbackUnavailable)
        ));
    }

    #[test]
    fn fallback_uses_empirical_quantile() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        let set = crate::evt::build_excess_set(&values, Orientation::Upper, 0.02).unwrap();
        let fit = crate::evt::fit_gpd(&set).unwrap();
        // E·p_u = 10 · 0.02 = 0.2 < λ = 1
        let b = solve_range_evt(&fit, &exposure(10.0), 1.0).unwrap();
        assert_eq!(b.method, EvtMethod::EmpiricalFallback);
        assert!((b.raw_bound - empirical_quantile(&set.oriented_sample, 0.9)).abs() < 1e-12);
    }

    #[test]
    fn kde_range_hits_target_and_is_consistent() {
        let m = model_1d();
        let e = exposure(20.0);
        let r = solve_range_kde(&m, &e, &ForeseeableQuery::expand_both(0.1, 1)).unwrap();
        assert!((r.achieved_inside_prob - r.target_inside_prob).abs() < BISECTION_TOL);
        assert!((r.residual_rate - 0.1).abs() < 1e-6 * e.rate_per_hour);
        assert!((r.residual_rate - e.rate_per_hour * (1.0 - r.achieved_inside_prob)).abs() < 1e-9);
        assert!((m.rect_probability(&r.rect) - r.achieved_inside_prob).abs() < 1e-12);
    }

    #[test]
    fn decreasing_lambda_never_shrinks() {
        let m = model_1d();
        let e = exposure(20.0);
        let mut prev: Option<Hyperrectangle> = None;
        for lambda in [2.0, 1.0, 0.5, 0.1, 0.01, 0.001] {
            let r = solve_range_kde(&m, &e, &ForeseeableQuery::expand_both(lambda, 1)).unwrap();
            if let Some(p) = &prev {
                assert!(r.rect.lower[0] <= p.lower[0] && r.rect.upper[0] >= p.upper[0]);
            }
            prev = Some(r.rect);
        }
    }

    #[test]
    fn pinned_policy_and_unreachable() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|k| vec![k as f64 / 10.0, (k * 7 % 11) as f64])
            .collect();
        let m = KdeModel::fit(&pts, &[ParamTransform::Identity; 2], &[]).unwrap();
        let e = exposure(10.0);
        let pinned = ForeseeableQuery {
            lambda_fs: 0.1,
            policy: vec![
                DimPolicy::ExpandUpper {
                    lower: f64::NEG_INFINITY,
                },
                DimPolicy::Pinned {
                    lower: 0.0,
                    upper: 5.0,
                },
            ],
        };
        assert!(matches!(
            solve_range_kde(&m, &e, &pinned),
            Err(ForeseeableError::Unreachable { .. })
        ));
        let ok = ForeseeableQuery {
            lambda_fs: 0.1,
            policy: vec![
                DimPolicy::ExpandUpper {
                    lower: f64::NEG_INFINITY,
                },
                DimPolicy::ExpandBoth,
            ],
        };
        let r = solve_range_kde(&m, &e, &ok).unwrap();
        assert_eq!(r.rect.lower[0], f64::NEG_INFINITY);
        assert!((r.achieved_inside_prob - 0.99).abs() < BISECTION_TOL);
        let none = ForeseeableQuery {
            lambda_fs: 0.1,
            policy: vec![
                DimPolicy::Pinned {
                    lower: 0.0,
                    upper: 1.0
                };
                2
            ],
        };
        assert!(matches!(
            solve_range_kde(&m, &e, &none),
            Err(ForeseeableError::NothingExpands)
        ));
    }

    #[test]
    fn warns_beyond_data_range() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 2.0].iter().map(|v| vec![*v]).collect();
        let m = KdeModel::from_parts(
            &pts,
            vec![ParamTransform::Identity],
            vec![Standardization {
                mean: 1.0,
                std: 1.0,
            }],
            0.5,
            vec![],
        )
        .unwrap();
        let r =
            solve_range_kde(&m, &exposure(10.0), &ForeseeableQuery::expand_both(0.01, 1)).unwrap();
        assert_eq!(r.warnings.len(), 2);
    }
}
