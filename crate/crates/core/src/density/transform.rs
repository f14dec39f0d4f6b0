use serde::{Deserialize, Serialize};

/// Per-dimension map from raw parameter units onto the real line.
///
/// `Logit` is used for ratios in (0, 1): `x ↦ −ln(1/x − 1)`, which equals
/// `ln(x / (1 − x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamTransform {
    Identity,
    Log,
    #[serde(alias = "negated-logit")]
    Logit,
}

impl ParamTransform {
    /// Whether `x` is inside the domain of the transform.
    pub fn accepts(self, x: f64) -> bool {
        match self {
            ParamTransform::Identity => x.is_finite(),
            ParamTransform::Log => x > 0.0 && x.is_finite(),
            ParamTransform::Logit => x > 0.0 && x < 1.0,
        }
    }

    /// Forward map. Values at or beyond the domain edge go to ±∞, which keeps
    /// CDF evaluation monotone for out-of-domain arguments.
    pub fn forward(self, x: f64) -> f64 {
        match self {
            ParamTransform::Identity => x,
            ParamTransform::Log => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    x.ln()
                }
            }
            ParamTransform::Logit => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else if x >= 1.0 {
                    f64::INFINITY
                } else {
                    -(1.0 / x - 1.0).ln()
                }
            }
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            ParamTransform::Identity => y,
            ParamTransform::Log => y.exp(),
            ParamTransform::Logit => {
                if y >= 0.0 {
                    1.0 / (1.0 + (-y).exp())
                } else {
                    let e = y.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// d forward / dx, the density Jacobian for this dimension.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ParamTransform::Identity => 1.0,
            ParamTransform::Log => 1.0 / x,
            ParamTransform::Logit => 1.0 / (x * (1.0 - x)),
        }
    }
}
