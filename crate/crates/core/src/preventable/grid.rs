use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    sequential_probability, CollisionModel, PreventableError, SequentialOptions, SequentialResult,
    Verdict,
};
use crate::rng::derive_seed;

/// A named parameter and the values it takes on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl GridAxis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        GridAxis {
            name: name.into(),
            values,
        }
    }

    /// `n` evenly spaced values from `start` to `end` inclusive.
    pub fn linspace(name: impl Into<String>, start: f64, end: f64, n: usize) -> Self {
        let values = match n {
            0 => vec![],
            1 => vec![start],
            _ => (0..n)
                .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        GridAxis::new(name, values)
    }

    fn strictly_monotone(&self) -> bool {
        let inc = self.values.windows(2).all(|w| w[1] > w[0]);
        let dec = self.values.windows(2).all(|w| w[1] < w[0]);
        self.values.iter().all(|v| v.is_finite()) && (inc || dec)
    }
}

/// Two swept parameters plus fixed values for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Parameter names in the order the model expects them.
    pub parameter_names: Vec<String>,
    /// Outer axis: one boundary point per value.
    pub axis1: GridAxis,
    /// Inner axis, searched for the crossing.
    pub axis2: GridAxis,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

impl GridSpec {
    fn validate(&self) -> Result<(usize, usize), PreventableError> {
        let err = |m: String| Err(PreventableError::InvalidGrid(m));
        let position = |name: &str| self.parameter_names.iter().position(|p| p == name);
        let (Some(i1), Some(i2)) = (position(&self.axis1.name), position(&self.axis2.name)) else {
            return err(format!(
                "axes {} and {} must name parameters",
                self.axis1.name, self.axis2.name
            ));
        };
        if i1 == i2 {
            return err("the two axes must differ".into());
        }
        for axis in [&self.axis1, &self.axis2] {
            if axis.values.len() < 2 || !axis.strictly_monotone() {
                return err(format!(
                    "axis {} must hold at least two strictly monotone values",
                    axis.name
                ));
            }
        }
        for (k, name) in self.parameter_names.iter().enumerate() {
            if k == i1 || k == i2 {
                if self.fixed.contains_key(name) {
                    return err(format!("{name} is both swept and fixed"));
                }
            } else if !self.fixed.get(name).is_some_and(|v| v.is_finite()) {
                return err(format!("parameter {name} needs a finite fixed value"));
            }
        }
        if let Some(extra) = self
            .fixed
            .keys()
            .find(|k| !self.parameter_names.contains(k))
        {
            return err(format!("unknown fixed parameter {extra}"));
        }
        Ok((i1, i2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridNode {
    pub axis1: f64,
    pub axis2: f64,
    pub result: SequentialResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub axis1: f64,
    pub axis2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub fixed_params: BTreeMap<String, f64>,
    pub axis1: GridAxis,
    pub axis2: GridAxis,
    pub p_t: f64,
    /// Row-major: all `axis2` values for the first `axis1` value, then the next.
    pub nodes: Vec<GridNode>,
    pub crossings: Vec<Crossing>,
}

impl BoundaryCurve {
    /// Boundary as CSV: fixed parameters in a comment line, then `axis1,axis2` rows.
    pub fn to_csv(&self) -> String {
        let fixed: Vec<String> = self
            .fixed_params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let mut out = format!("# fixed: {}; p_t={}\n", fixed.join(", "), self.p_t);
        out.push_str(&format!("{},{}\n", self.axis1.name, self.axis2.name));
        for c in &self.crossings {
            out.push_str(&format!("{},{}\n", c.axis1, c.axis2));
        }
        out
    }
}

fn is_high(r: &SequentialResult, p_t: f64) -> bool {
    match r.verdict {
        Verdict::Above => true,
        Verdict::Below => false,
        Verdict::UndecidedAtCap => r.p_hat >= p_t,
    }
}

/// First low-to-high transition along a row, interpolated linearly on `p_hat`.
fn row_crossing(row: &[GridNode], p_t: f64) -> Option<f64> {
    row.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if is_high(&a.result, p_t) || !is_high(&b.result, p_t) {
            return None;
        }
        let (pa, pb) = (a.result.p_hat, b.result.p_hat);
        let frac = if pb > pa {
            ((p_t - pa) / (pb - pa)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        Some(a.axis2 + frac * (b.axis2 - a.axis2))
    })
}

/// Runs the sequential test on every node and extracts, per `axis1` value,
/// where the verdict flips from below to above `p_t` along `axis2`.
pub fn grid_boundary<M: CollisionModel + ?Sized>(
    model: &M,
    grid: &GridSpec,
    opts: &SequentialOptions,
    seed: u64,
) -> Result<BoundaryCurve, PreventableError> {
    opts.validate()?;
    let (i1, i2) = grid.validate()?;
    let n2 = grid.axis2.values.len();
    let cells: Vec<(usize, usize)> = (0..grid.axis1.values.len())
        .flat_map(|r| (0..n2).map(move |c| (r, c)))
        .collect();
    let nodes: Vec<GridNode> = cells
        .par_iter()
        .map(|&(r, c)| {
            let (a1, a2) = (grid.axis1.values[r], grid.axis2.values[c]);
            let theta: Vec<f64> = grid
                .parameter_names
                .iter()
                .enumerate()
                .map(|(k, name)| match k {
                    _ if k == i1 => a1,
                    _ if k == i2 => a2,
                    _ => grid.fixed[name],
                })
                .collect();
            let result = sequential_probability(
                model,
                &theta,
                opts,
                derive_seed(seed, (r * n2 + c) as u64),
            )?;
            Ok(GridNode {
                axis1: a1,
                axis2: a2,
                result,
            })
        })
        .collect::<Result<_, PreventableError>>()?;
    let crossings = nodes
        .chunks(n2)
        .filter_map(|row| {
            row_crossing(row, opts.p_t).map(|axis2| Crossing {
                axis1: row[0].axis1,
                axis2,
            })
        })
        .collect();
    Ok(BoundaryCurve {
        fixed_params: grid.fixed.clone(),
        axis1: grid.axis1.clone(),
        axis2: grid.axis2.clone(),
        p_t: opts.p_t,
        nodes,
        crossings,
    })
}
