//! Multivariate Gaussian kernel density estimation over scenario parameters.
//!
//! Raw parameters are mapped per dimension by a [`ParamTransform`], then
//! standardized to unit variance, and a single scalar bandwidth is applied in
//! every direction. Densities are reported in raw units (transform and
//! standardization Jacobians included). Half-space [`ZeroRegion`]s truncate
//! the estimate in raw space; the remaining mass is renormalized to one.

mod bandwidth;
mod transform;

pub use bandwidth::{loo_log_likelihood, select_bandwidth, silverman_reference};
pub use transform::ParamTransform;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::rng::{derive_seed, rng_from_seed};
use crate::scenario_store::{ScenarioCategory, ScenarioRecord};
use crate::special::{norm_cdf, norm_interval};

/// Attempts per sample before rejection sampling is declared degenerate.
pub const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("points do not share the model dimension")]
    DimensionMismatch,
    #[error("non-finite parameter value")]
    NonFinite,
    #[error("dimension {dim} has zero variance")]
    Degenerate { dim: usize },
    #[error("point {row} dimension {dim}: value {value} outside the transform domain")]
    OutsideDomain { row: usize, dim: usize, value: f64 },
    #[error("invalid hyperrectangle: lower bound exceeds upper bound in dimension {dim}")]
    InvalidRectangle { dim: usize },
    #[error("bandwidth must be positive and finite")]
    InvalidBandwidth,
    #[error("standard deviations must be positive and finite")]
    InvalidStandardization,
    #[error("zero regions leave no probability mass")]
    EmptyValidRegion,
    #[error("rejection sampling exceeded {attempts} attempts")]
    RejectionExhausted { attempts: usize },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-dimension normalization applied after the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Zero density where `θ[dim] ≤ value`.
    Below,
    /// Zero density where `θ[dim] ≥ value`.
    Above,
}

/// Axis-aligned half-space in raw units on which the density is set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRegion {
    pub dim: usize,
    pub side: Side,
    pub value: f64,
}

impl ZeroRegion {
    pub fn below(dim: usize, value: f64) -> Self {
        ZeroRegion {
            dim,
            side: Side::Below,
            value,
        }
    }

    pub fn above(dim: usize, value: f64) -> Self {
        ZeroRegion {
            dim,
            side: Side::Above,
            value,
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        match self.side {
            Side::Below => theta[self.dim] <= self.value,
            Side::Above => theta[self.dim] >= self.value,
        }
    }
}

/// Closed box `[lower, upper]` in raw units; entries may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hyperrectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DensityError> {
        if lower.len() != upper.len() {
            return Err(DensityError::DimensionMismatch);
        }
        for (dim, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(DensityError::InvalidRectangle { dim });
            }
        }
        Ok(Hyperrectangle { lower, upper })
    }

    pub fn full(d: usize) -> Self {
        Hyperrectangle {
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }
}

/// Fitted Gaussian KDE. Immutable after construction.
#[derive(Debug, Clone)]
pub struct KdeModel {
    n: usize,
    d: usize,
    /// post-transform, pre-standardization
    transformed: Vec<f64>,
    /// standardized, row-major
    points: Vec<f64>,
    bandwidth: f64,
    transforms: Vec<ParamTransform>,
    standardization: Vec<Standardization>,
    zero_regions: Vec<ZeroRegion>,
    renorm: f64,
}

#[derive(Serialize, Deserialize)]
struct KdeModelJson {
    dimension: usize,
    bandwidth: f64,
    transforms: Vec<ParamTransform>,
    standardization: Vec<Standardization>,
    zero_regions: Vec<ZeroRegion>,
    renormalization: f64,
    points: Vec<Vec<f64>>,
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl KdeModel {
    /// Fits a KDE to raw points: transforms, standardizes, and selects the
    /// bandwidth by leave-one-out cross validation.
    pub fn fit(
        raw: &[Vec<f64>],
        transforms: &[ParamTransform],
        zero_regions: &[ZeroRegion],
    ) -> Result<Self, DensityError> {
        let transformed = Self::transform_all(raw, transforms)?;
        let d = transforms.len();
        let standardization = (0..d)
            .map(|j| {
                let (mean, std) = sample_std(transformed.iter().skip(j).step_by(d).copied());
                if std > 0.0 && std.is_finite() {
                    Ok(Standardization { mean, std })
                } else {
                    Err(DensityError::Degenerate { dim: j })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let points = standardize(&transformed, &standardization);
        let flat = bandwidth::Flat {
            n: raw.len(),
            d,
            data: &points,
        };
        let h = bandwidth::select_flat(&flat)?;
        Self::assemble(
            transformed,
            standardization,
            transforms.to_vec(),
            h,
            zero_regions.to_vec(),
        )
    }

    /// Fits a KDE that reuses an existing transform and standardization, e.g.
    /// an importance density living in the same space as its nominal model.
    pub fn fit_in_space_of(parent: &KdeModel, raw: &[Vec<f64>]) -> Result<Self, DensityError> {
        let transformed = Self::transform_all(raw, &parent.transforms)?;
        let points = standardize(&transformed, &parent.standardization);
        let flat = bandwidth::Flat {
            n: raw.len(),
            d: parent.d,
            data: &points,
        };
        let h = bandwidth::select_flat(&flat)?;
        Self::assemble(
            transformed,
            parent.standardization.clone(),
            parent.transforms.clone(),
            h,
            parent.zero_regions.clone(),
        )
    }

    /// Builds a model from explicit parts. `transformed` holds post-transform,
    /// pre-standardization points.
    pub fn from_parts(
        transformed: &[Vec<f64>],
        transforms: Vec<ParamTransform>,
        standardization: Vec<Standardization>,
        bandwidth: f64,
        zero_regions: Vec<ZeroRegion>,
    ) -> Result<Self, DensityError> {
        let d = transforms.len();
        if standardization.len() != d || transformed.iter().any(|p| p.len() != d) {
            return Err(DensityError::DimensionMismatch);
        }
        let flat: Vec<f64> = transformed.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(DensityError::NonFinite);
        }
        Self::assemble(flat, standardization, transforms, bandwidth, zero_regions)
    }

    fn transform_all(
        raw: &[Vec<f64>],
        transforms: &[ParamTransform],
    ) -> Result<Vec<f64>, DensityError> {
        let d = transforms.len();
        if raw.len() < 3 {
            return Err(DensityError::TooFewPoints {
                needed: 3,
                got: raw.len(),
            });
        }
        let mut out = Vec::with_capacity(raw.len() * d);
        for (row, p) in raw.iter().enumerate() {
            if p.len() != d {
                return Err(DensityError::DimensionMismatch);
            }
            for (dim, (&x, t)) in p.iter().zip(transforms).enumerate() {
                if !x.is_finite() {
                    return Err(DensityError::NonFinite);
                }
                if !t.accepts(x) {
                    return Err(DensityError::OutsideDomain { row, dim, value: x });
                }
                out.push(t.forward(x));
            }
        }
        Ok(out)
    }

    fn assemble(
        transformed: Vec<f64>,
        standardization: Vec<Standardization>,
        transforms: Vec<ParamTransform>,
        bandwidth: f64,
        zero_regions: Vec<ZeroRegion>,
    ) -> Result<Self, DensityError> {
        let d = transforms.len();
        if d == 0 || !transformed.len().is_multiple_of(d) {
            return Err(DensityError::DimensionMismatch);
        }
        let n = transformed.len() / d;
        if n < 2 {
            return Err(DensityError::TooFewPoints { needed: 2, got: n });
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(DensityError::InvalidBandwidth);
        }
        if standardization
            .iter()
            .any(|s| !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()))
        {
            return Err(DensityError::InvalidStandardization);
        }
        if zero_regions.iter().any(|z| z.dim >= d || z.value.is_nan()) {
            return Err(DensityError::DimensionMismatch);
        }
        let points = standardize(&transformed, &standardization);
        let mut model = KdeModel {
            n,
            d,
            transformed,
            points,
            bandwidth,
            transforms,
            standardization,
            zero_regions,
            renorm: 1.0,
        };
        if !model.zero_regions.is_empty() {
            let z = match model.valid_region() {
                Some(valid) => model.box_mass(&valid.lower, &valid.upper),
                None => 0.0,
            };
            if !(z > 0.0) {
                return Err(DensityError::EmptyValidRegion);
            }
            model.renorm = z.min(1.0);
        }
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn transforms(&self) -> &[ParamTransform] {
        &self.transforms
    }

    pub fn standardization(&self) -> &[Standardization] {
        &self.standardization
    }

    pub fn zero_regions(&self) -> &[ZeroRegion] {
        &self.zero_regions
    }

    /// Mass of the untruncated estimate inside the valid region, in (0, 1].
    pub fn renormalization(&self) -> f64 {
        self.renorm
    }

    /// Standardized kernel centres, one row per data point.
    pub fn standardized_points(&self) -> Vec<Vec<f64>> {
        self.points.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    /// Kernel centres mapped back to raw units.
    pub fn raw_points(&self) -> Vec<Vec<f64>> {
        self.transformed
            .chunks(self.d)
            .map(|row| {
                row.iter()
                    .zip(&self.transforms)
                    .map(|(y, t)| t.inverse(*y))
                    .collect()
            })
            .collect()
    }

    /// Smallest and largest raw data value in dimension `dim`.
    pub fn data_range(&self, dim: usize) -> (f64, f64) {
        let t = self.transforms[dim];
        let (lo, hi) = self
            .transformed
            .iter()
            .skip(dim)
            .step_by(self.d)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            });
        (t.inverse(lo), t.inverse(hi))
    }

    /// Intersection of the complements of all zero regions, or `None` if empty.
    pub fn valid_region(&self) -> Option<Hyperrectangle> {
        let mut rect = Hyperrectangle::full(self.d);
        for z in &self.zero_regions {
            match z.side {
                Side::Below => rect.lower[z.dim] = rect.lower[z.dim].max(z.value),
                Side::Above => rect.upper[z.dim] = rect.upper[z.dim].min(z.value),
            }
        }
        if rect.lower.iter().zip(&rect.upper).any(|(l, u)| l >= u) {
            None
        } else {
            Some(rect)
        }
    }

    pub fn in_zero_region(&self, theta: &[f64]) -> bool {
        self.zero_regions.iter().any(|z| z.contains(theta))
    }

    /// Whether `theta` has positive density: inside every transform domain and
    /// outside every zero region.
    pub fn supports(&self, theta: &[f64]) -> bool {
        theta.len() == self.d
            && theta
                .iter()
                .zip(&self.transforms)
                .all(|(x, t)| t.accepts(*x))
            && !self.in_zero_region(theta)
    }

    fn std_coord(&self, dim: usize, y: f64) -> f64 {
        let s = self.standardization[dim];
        (y - s.mean) / s.std
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Kernel sum in standardized space, without any Jacobian.
    fn kernel_sum(&self, z: &[f64]) -> f64 {
        let h = self.bandwidth;
        let inv = 1.0 / (2.0 * h * h);
        let s: f64 = (0..self.n)
            .map(|i| {
                let r2: f64 = z
                    .iter()
                    .zip(self.row(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-r2 * inv).exp()
            })
            .sum();
        s / (self.n as f64 * (2.0 * PI).powf(self.d as f64 / 2.0) * h.powi(self.d as i32))
    }

    /// Density at a raw parameter vector.
    pub fn pdf(&self, theta: &[f64]) -> f64 {
        if !self.supports(theta) {
            return 0.0;
        }
        let mut jac = 1.0;
        let z: Vec<f64> = (0..self.d)
            .map(|j| {
                let t = self.transforms[j];
                jac *= t.derivative(theta[j]) / self.standardization[j].std;
                self.std_coord(j, t.forward(theta[j]))
            })
            .collect();
        self.kernel_sum(&z) * jac / self.renorm
    }

    /// Density with respect to the transformed (pre-standardization) coordinates.
    ///
    /// Two models sharing transforms can be compared through this density
    /// without evaluating the transform Jacobian, which cancels in ratios.
    pub fn pdf_transformed(&self, y: &[f64]) -> f64 {
        let raw: Vec<f64> = y
            .iter()
            .zip(&self.transforms)
            .map(|(v, t)| t.inverse(*v))
            .collect();
        if self.in_zero_region(&raw) {
            return 0.0;
        }
        let mut jac = 1.0;
        let z: Vec<f64> = (0..self.d)
            .map(|j| {
                jac /= self.standardization[j].std;
                self.std_coord(j, y[j])
            })
            .collect();
        self.kernel_sum(&z) * jac / self.renorm
    }

    /// Maps a raw vector into transformed coordinates.
    pub fn to_transformed(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.transforms)
            .map(|(x, t)| t.forward(*x))
            .collect()
    }

    /// Untruncated probability of the raw box `[lower, upper]`.
    ///
    /// Each kernel factorizes over dimensions, so the 2^d-vertex
    /// inclusion–exclusion of CDF values collapses to a per-kernel product of
    /// interval masses; this form never goes negative.
    fn box_mass(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let h = self.bandwidth;
        let lo: Vec<f64> = (0..self.d)
            .map(|j| self.std_coord(j, self.transforms[j].forward(lower[j])))
            .collect();
        let hi: Vec<f64> = (0..self.d)
            .map(|j| self.std_coord(j, self.transforms[j].forward(upper[j])))
            .collect();
        let s: f64 = (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, c)| norm_interval((lo[j] - c) / h, (hi[j] - c) / h))
                    .product::<f64>()
            })
            .sum();
        s / self.n as f64
    }

    /// Probability that θ lies in `rect`, accounting for zero-region truncation.
    pub fn rect_probability(&self, rect: &Hyperrectangle) -> f64 {
        assert_eq!(rect.dim(), self.d, "rectangle dimension mismatch");
        let (mut lower, mut upper) = (rect.lower.clone(), rect.upper.clone());
        if !self.zero_regions.is_empty() {
            let Some(valid) = self.valid_region() else {
                return 0.0;
            };
            for j in 0..self.d {
                lower[j] = lower[j].max(valid.lower[j]);
                upper[j] = upper[j].min(valid.upper[j]);
            }
        }
        if lower.iter().zip(&upper).any(|(l, u)| l >= u) {
            return 0.0;
        }
        (self.box_mass(&lower, &upper) / self.renorm).clamp(0.0, 1.0)
    }

    /// Joint CDF P(θ ≤ theta) in raw units; entries may be ±∞.
    pub fn cdf(&self, theta: &[f64]) -> f64 {
        let rect = Hyperrectangle {
            lower: vec![f64::NEG_INFINITY; self.d],
            upper: theta.to_vec(),
        };
        self.rect_probability(&rect)
    }

    /// Marginal CDF of dimension `dim` on the standardized axis, untruncated.
    pub fn marginal_cdf_standardized(&self, dim: usize, z: f64) -> f64 {
        let h = self.bandwidth;
        let s: f64 = (0..self.n)
            .map(|i| norm_cdf((z - self.row(i)[dim]) / h))
            .sum();
        s / self.n as f64
    }

    /// Untruncated marginal quantile of dimension `dim`, in raw units.
    pub fn marginal_quantile(&self, dim: usize, p: f64) -> f64 {
        let t = self.transforms[dim];
        if p <= 0.0 {
            return t.inverse(f64::NEG_INFINITY);
        }
        if p >= 1.0 {
            return t.inverse(f64::INFINITY);
        }
        let (mut lo, mut hi) = self
            .points
            .iter()
            .skip(dim)
            .step_by(self.d)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                (lo.min(c), hi.max(c))
            });
        let h = self.bandwidth;
        while self.marginal_cdf_standardized(dim, lo) > p {
            lo -= 10.0 * h;
        }
        while self.marginal_cdf_standardized(dim, hi) < p {
            hi += 10.0 * h;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.marginal_cdf_standardized(dim, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = self.standardization[dim];
        t.inverse(s.mean + s.std * 0.5 * (lo + hi))
    }

    /// Marginal density of dimension `dim` in raw units, ignoring the
    /// truncation of other dimensions; used for plot data.
    pub fn marginal_pdf(&self, dim: usize, x: f64) -> f64 {
        let t = self.transforms[dim];
        if !t.accepts(x) {
            return 0.0;
        }
        let h = self.bandwidth;
        let z = self.std_coord(dim, t.forward(x));
        let s: f64 = (0..self.n)
            .map(|i| crate::special::norm_pdf((z - self.row(i)[dim]) / h))
            .sum();
        s / (self.n as f64 * h) * t.derivative(x) / self.standardization[dim].std / self.renorm
    }

    /// Draws one raw-space sample: uniform kernel choice, Gaussian perturbation
    /// with standard deviation `h` per standardized axis, back-transform, and
    /// rejection of draws with zero density.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, DensityError> {
        for _ in 0..MAX_REJECTIONS {
            let i = rng.random_range(0..self.n);
            let theta: Vec<f64> = (0..self.d)
                .map(|j| {
                    let e: f64 = rng.sample(StandardNormal);
                    let z = self.row(i)[j] + self.bandwidth * e;
                    let s = self.standardization[j];
                    self.transforms[j].inverse(s.mean + s.std * z)
                })
                .collect();
            if self.supports(&theta) {
                return Ok(theta);
            }
        }
        Err(DensityError::RejectionExhausted {
            attempts: MAX_REJECTIONS,
        })
    }

    /// Draws `n` samples; sample `k` uses the stream `(seed, k)` so output is
    /// independent of evaluation order.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<Vec<f64>>, DensityError> {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|k| self.sample_one(&mut rng_from_seed(derive_seed(seed, k as u64))))
            .collect()
    }

    pub fn to_json(&self) -> Result<String, DensityError> {
        let repr = KdeModelJson {
            dimension: self.d,
            bandwidth: self.bandwidth,
            transforms: self.transforms.clone(),
            standardization: self.standardization.clone(),
            zero_regions: self.zero_regions.clone(),
            renormalization: self.renorm,
            points: self
                .transformed
                .chunks(self.d)
                .map(<[f64]>::to_vec)
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Self, DensityError> {
        let repr: KdeModelJson = serde_json::from_str(s)?;
        if repr.dimension != repr.transforms.len() {
            return Err(DensityError::DimensionMismatch);
        }
        Self::from_parts(
            &repr.points,
            repr.transforms,
            repr.standardization,
            repr.bandwidth,
            repr.zero_regions,
        )
    }
}

fn standardize(transformed: &[f64], st: &[Standardization]) -> Vec<f64> {
    let d = st.len();
    transformed
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let s = st[k % d];
            (y - s.mean) / s.std
        })
        .collect()
}

/// Fits the KDE of a scenario category from its validated records.
pub fn fit_kde(
    records: &[ScenarioRecord],
    category: &ScenarioCategory,
) -> Result<KdeModel, DensityError> {
    let raw: Vec<Vec<f64>> = records.iter().map(|r| r.theta.clone()).collect();
    KdeModel::fit(&raw, &category.parameter_transforms, &category.zero_regions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(points: &[f64], h: f64) -> KdeModel {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        KdeModel::from_parts(
            &pts,
            vec![ParamTransform::Identity],
            vec![Standardization {
                mean: 0.0,
                std: 1.0,
            }],
            h,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn duplicated_point_peak() {
        let std = 2.5;
        let h = 0.3;
        let m = KdeModel::from_parts(
            &[vec![4.0], vec![4.0]],
            vec![ParamTransform::Identity],
            vec![Standardization { mean: 1.0, std }],
            h,
            vec![],
        )
        .unwrap();
        let expected = (2.0 * PI * h * h).powf(-0.5) / std;
        assert!((m.pdf(&[4.0]) - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn cdf_limits_and_symmetry() {
        let m = one_d(&[-1.0, 1.0], 0.4);
        assert_eq!(m.cdf(&[f64::INFINITY]), 1.0);
        assert_eq!(m.cdf(&[f64::NEG_INFINITY]), 0.0);
        assert!((m.cdf(&[0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rect_full_and_degenerate() {
        let m = one_d(&[0.0, 1.0, 3.0], 0.5);
        assert!((m.rect_probability(&Hyperrectangle::full(1)) - 1.0).abs() < 1e-15);
        let r = Hyperrectangle::new(vec![0.7], vec![0.7]).unwrap();
        assert_eq!(m.rect_probability(&r), 0.0);
        assert!(Hyperrectangle::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn zero_region_truncates_and_renormalizes() {
        let pts: Vec<Vec<f64>> = [0.1, 0.5, 1.0, 2.0].iter().map(|p| vec![*p]).collect();
        let m = KdeModel::from_parts(
            &pts,
            vec![ParamTransform::Identity],
            vec![Standardization {
                mean: 0.0,
                std: 1.0,
            }],
            0.5,
            vec![ZeroRegion::below(0, 0.0)],
        )
        .unwrap();
        assert!(m.renormalization() < 1.0 && m.renormalization() > 0.5);
        assert_eq!(m.pdf(&[-0.1]), 0.0);
        assert_eq!(m.pdf(&[0.0]), 0.0);
        assert_eq!(m.cdf(&[0.0]), 0.0);
        assert!((m.cdf(&[f64::INFINITY]) - 1.0).abs() < 1e-15);
        // integrates to one over the valid half-line
        let steps = 200_000;
        let (a, b) = (0.0, 8.0);
        let dx = (b - a) / steps as f64;
        let integral: f64 = (0..steps)
            .map(|k| m.pdf(&[a + (k as f64 + 0.5) * dx]) * dx)
            .sum();
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn fit_rejects_degenerate_and_small() {
        let flat = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 4.0]];
        let t = [ParamTransform::Identity, ParamTransform::Identity];
        assert!(matches!(
            KdeModel::fit(&flat, &t, &[]),
            Err(DensityError::Degenerate { dim: 0 })
        ));
        assert!(matches!(
            KdeModel::fit(&[vec![1.0, 2.0]], &t, &[]),
            Err(DensityError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn fit_rejects_out_of_domain() {
        let pts = vec![vec![0.5], vec![0.2], vec![1.2]];
        let err = KdeModel::fit(&pts, &[ParamTransform::Logit], &[]).unwrap_err();
        assert!(matches!(
            err,
            DensityError::OutsideDomain { row: 2, dim: 0, .. }
        ));
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let pts = vec![
            vec![1.0, 0.3],
            vec![2.0, 0.5],
            vec![3.5, 0.2],
            vec![2.2, 0.7],
        ];
        let m = KdeModel::fit(
            &pts,
            &[ParamTransform::Log, ParamTransform::Logit],
            &[ZeroRegion::below(0, 1.5)],
        )
        .unwrap();
        let back = KdeModel::from_json(&m.to_json().unwrap()).unwrap();
        for theta in [[1.7, 0.4], [2.5, 0.1], [3.0, 0.9]] {
            assert_eq!(m.pdf(&theta).to_bits(), back.pdf(&theta).to_bits());
            assert_eq!(m.cdf(&theta).to_bits(), back.cdf(&theta).to_bits());
        }
        assert_eq!(
            m.renormalization().to_bits(),
            back.renormalization().to_bits()
        );
    }

    #[test]
    fn samples_respect_support_and_seed() {
        let pts = vec![vec![0.2], vec![0.5], vec![0.9], vec![0.95]];
        let m = KdeModel::fit(&pts, &[ParamTransform::Logit], &[]).unwrap();
        let a = m.sample(9, 50).unwrap();
        assert_eq!(a, m.sample(9, 50).unwrap());
        assert_ne!(a, m.sample(10, 50).unwrap());
        assert!(a.iter().all(|t| t[0] > 0.0 && t[0] < 1.0));
        let one = m.sample(3, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0][0].is_finite());
    }

    #[test]
    fn marginal_quantile_inverts_marginal_cdf() {
        let m = one_d(&[0.0, 1.0, 3.0, 4.0], 0.5);
        for p in [0.01, 0.3, 0.5, 0.9, 0.999] {
            let x = m.marginal_quantile(0, p);
            assert!((m.cdf(&[x]) - p).abs() < 1e-10);
        }
    }
}
