//! Leave-one-out likelihood cross validation for a single scalar bandwidth.

use rayon::prelude::*;
use std::f64::consts::PI;

use super::DensityError;

const GOLDEN_TOL: f64 = 1e-4;
const SCAN_POINTS: usize = 21;
const RANGE_FACTOR: f64 = 100.0;
/// Kernel terms below e^-40 of the nearest one change no double-precision sum.
const NEGLIGIBLE_EXPONENT: f64 = 40.0;

/// Standardized points stored row-major; the LOO routines sort them on the first coordinate.
pub(crate) struct Flat<'a> {
    pub n: usize,
    pub d: usize,
    pub data: &'a [f64],
}

impl Flat<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    fn key(&self, i: usize) -> f64 {
        self.data[i * self.d]
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Indices `[lo, hi)` whose first coordinate lies within `radius` of row `i`.
    fn window(&self, i: usize, radius: f64) -> (usize, usize) {
        let k = self.key(i);
        let lo = partition(self, |j| self.key(j) < k - radius);
        let hi = partition(self, |j| self.key(j) <= k + radius);
        (lo, hi)
    }
}

fn partition(pts: &Flat, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, pts.n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Silverman's reference bandwidth for unit-variance data in `d` dimensions.
pub fn silverman_reference(n: usize, d: usize) -> f64 {
    let d = d as f64;
    (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * (n as f64).powf(-1.0 / (d + 4.0))
}

fn nearest_sq_dists(pts: &Flat) -> Vec<f64> {
    (0..pts.n)
        .into_par_iter()
        .map(|i| {
            let k = pts.key(i);
            let mut best = f64::INFINITY;
            for j in (i + 1)..pts.n {
                let dk = pts.key(j) - k;
                if dk * dk >= best {
                    break;
                }
                best = best.min(pts.sq_dist(i, j));
            }
            for j in (0..i).rev() {
                let dk = k - pts.key(j);
                if dk * dk >= best {
                    break;
                }
                best = best.min(pts.sq_dist(i, j));
            }
            best
        })
        .collect()
}

fn loo_objective(pts: &Flat, nearest: &[f64], h: f64) -> f64 {
    let inv = 1.0 / (2.0 * h * h);
    let norm = ((pts.n - 1) as f64).ln() + pts.d as f64 * (h.ln() + 0.5 * (2.0 * PI).ln());
    let total: f64 = (0..pts.n)
        .into_par_iter()
        .map(|i| {
            // log-sum-exp shifted by the nearest neighbour so tiny h stays finite
            let shift = nearest[i];
            let (lo, hi) = pts.window(i, (shift + NEGLIGIBLE_EXPONENT / inv).sqrt());
            let s: f64 = (lo..hi)
                .filter(|&j| j != i)
                .map(|j| (pts.sq_dist(i, j) - shift) * inv)
                .filter(|&arg| arg < NEGLIGIBLE_EXPONENT)
                .map(|arg| (-arg).exp())
                .sum();
            s.ln() - shift * inv
        })
        .sum();
    total - pts.n as f64 * norm
}

/// Leave-one-out log-likelihood Σ_i log f̂₋ᵢ(zᵢ) of standardized `points` at bandwidth `h`.
pub fn loo_log_likelihood(points: &[Vec<f64>], h: f64) -> f64 {
    let (n, d, data) = flatten(points);
    let data = sorted_rows(&Flat { n, d, data: &data });
    let pts = Flat { n, d, data: &data };
    let nearest = nearest_sq_dists(&pts);
    loo_objective(&pts, &nearest, h)
}

pub(crate) fn flatten(points: &[Vec<f64>]) -> (usize, usize, Vec<f64>) {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    let data = points.iter().flat_map(|p| p.iter().copied()).collect();
    (n, d, data)
}

/// Copy of `pts` with rows ordered by their first coordinate.
fn sorted_rows(pts: &Flat) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..pts.n).collect();
    idx.sort_by(|&a, &b| pts.key(a).total_cmp(&pts.key(b)));
    idx.iter()
        .flat_map(|&i| pts.row(i).iter().copied())
        .collect()
}

/// Selects the bandwidth maximizing the leave-one-out log-likelihood.
///
/// The search runs over `ln h` on `[h₀/100, 100·h₀]` (h₀ = Silverman): a coarse
/// scan picks the best bracket, golden-section search refines it to `1e-4` in `ln h`.
pub fn select_bandwidth(points: &[Vec<f64>]) -> Result<f64, DensityError> {
    let (n, d, data) = flatten(points);
    if n < 3 {
        return Err(DensityError::TooFewPoints { needed: 3, got: n });
    }
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(DensityError::DimensionMismatch);
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(DensityError::NonFinite);
    }
    let pts = Flat { n, d, data: &data };
    select_flat(&pts)
}

pub(crate) fn select_flat(unsorted: &Flat) -> Result<f64, DensityError> {
    let data = sorted_rows(unsorted);
    let pts = &Flat {
        n: unsorted.n,
        d: unsorted.d,
        data: &data,
    };
    let nearest = nearest_sq_dists(pts);
    let h0 = silverman_reference(pts.n, pts.d);
    let lo = (h0 / RANGE_FACTOR).ln();
    let hi = (h0 * RANGE_FACTOR).ln();
    let f = |log_h: f64| loo_objective(pts, &nearest, log_h.exp());

    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|k| lo + step * k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v > values[b] { k } else { b });
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(SCAN_POINTS - 1)];

    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    while b - a > GOLDEN_TOL {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    let mut log_h = 0.5 * (a + b);
    let mut best_value = f(log_h);
    // the bracket edges can beat the interior when the optimum sits on a bound
    for k in [0, SCAN_POINTS - 1] {
        if values[k] > best_value {
            log_h = grid[k];
            best_value = values[k];
        }
    }
    Ok(log_h.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silverman_one_dimensional() {
        // (4/3)^(1/5) n^(-1/5) ≈ 1.06 n^(-1/5)
        let h = silverman_reference(100, 1);
        assert!((h - 1.059_223_841 * 100f64.powf(-0.2)).abs() < 1e-8);
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            select_bandwidth(&pts),
            Err(DensityError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn three_collinear_points_give_finite_h() {
        let pts = vec![vec![-1.2], vec![0.0], vec![1.2]];
        let h = select_bandwidth(&pts).unwrap();
        assert!(h.is_finite() && h > 0.0);
    }

    #[test]
    fn duplicates_keep_objective_finite() {
        let pts = vec![vec![0.0], vec![0.0], vec![1.0], vec![2.0]];
        assert!(loo_log_likelihood(&pts, 0.01).is_finite());
        assert!(select_bandwidth(&pts).unwrap() > 0.0);
    }
}
