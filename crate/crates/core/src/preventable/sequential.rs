use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{CollisionModel, PreventableError};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Above,
    Below,
    UndecidedAtCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequentialOptions {
    /// Probability threshold `p_t`.
    pub p_t: f64,
    /// Significance level `δ_p` of each tail.
    pub delta_p: f64,
    /// Maximum number of runs.
    pub cap: usize,
}

impl Default for SequentialOptions {
    fn default() -> Self {
        SequentialOptions {
            p_t: 0.5,
            delta_p: 0.01,
            cap: 100,
        }
    }
}

impl SequentialOptions {
    pub fn validate(&self) -> Result<(), PreventableError> {
        for (name, value) in [("p_t", self.p_t), ("delta_p", self.delta_p)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(PreventableError::InvalidProbability { name, value });
            }
        }
        if self.cap == 0 {
            return Err(PreventableError::InvalidCap);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialResult {
    pub p_hat: f64,
    pub n_sims: usize,
    pub n_collisions: usize,
    pub verdict: Verdict,
}

/// `(P(X ≤ k), P(X ≥ k))` for `X ~ Binomial(n, p)`.
pub fn binomial_tails(k: usize, n: usize, p: f64) -> (f64, f64) {
    let b = Binomial::new(p, n as u64).expect("p in (0, 1)");
    let k = k as u64;
    let lower = b.cdf(k);
    let upper = if k == 0 { 1.0 } else { b.sf(k - 1) };
    (lower, upper)
}

/// Simulates `theta` until the collision count is significantly below or
/// above `p_t`, or until the cap. Run `i` uses the seed `(seed, i)`.
pub fn sequential_probability<M: CollisionModel + ?Sized>(
    model: &M,
    theta: &[f64],
    opts: &SequentialOptions,
    seed: u64,
) -> Result<SequentialResult, PreventableError> {
    opts.validate()?;
    let mut collisions = 0;
    let mut n = 0;
    let verdict = loop {
        let out = model.run(theta, derive_seed(seed, n as u64))?;
        n += 1;
        collisions += usize::from(out.collision);
        let (lower, upper) = binomial_tails(collisions, n, opts.p_t);
        if lower < opts.delta_p {
            break Verdict::Below;
        }
        if upper < opts.delta_p {
            break Verdict::Above;
        }
        if n >= opts.cap {
            break Verdict::UndecidedAtCap;
        }
    };
    Ok(SequentialResult {
        p_hat: collisions as f64 / n as f64,
        n_sims: n,
        n_collisions: collisions,
        verdict,
    })
}
