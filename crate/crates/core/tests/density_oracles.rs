//! KDE bandwidth selection, rectangle mass and truncation against brute-force oracles.

use rand::Rng;
use rand_distr::StandardNormal;

use rfp_core::density::{
    loo_log_likelihood, select_bandwidth, Hyperrectangle, KdeModel, ParamTransform, ZeroRegion,
};
use rfp_core::rng::rng_from_seed;

fn gaussian_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Leave-one-out log-likelihood written out directly from its definition.
fn brute_loo(points: &[Vec<f64>], h: f64) -> f64 {
    let n = points.len();
    let d = points[0].len() as i32;
    let norm = (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0) * h.powi(d);
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut s = 0.0;
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let r2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                s += (-r2 / (2.0 * h * h)).exp();
            }
        }
        total += (s / ((n - 1) as f64 * norm)).ln();
    }
    total
}

#[test]
fn loo_objective_matches_direct_sum() {
    let pts = gaussian_points(120, 2, 1);
    for h in [0.08, 0.2, 0.5, 1.3] {
        let fast = loo_log_likelihood(&pts, h);
        let slow = brute_loo(&pts, h);
        assert!(
            (fast - slow).abs() < 1e-9 * slow.abs(),
            "h={h}: {fast} vs {slow}"
        );
    }
}

#[test]
fn selected_bandwidth_beats_a_fine_grid() {
    for (d, seed) in [(1, 2), (2, 3), (3, 4)] {
        let pts = gaussian_points(150, d, seed);
        let h = select_bandwidth(&pts).unwrap();
        let best = brute_loo(&pts, h);
        let grid_best = (0..400)
            .map(|k| (0.02f64).ln() + k as f64 * ((3.0f64).ln() - (0.02f64).ln()) / 399.0)
            .map(|lh| brute_loo(&pts, lh.exp()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            best >= grid_best - 1e-6,
            "d={d}: selected {best}, grid {grid_best}"
        );
    }
}

#[test]
fn rectangle_mass_equals_inclusion_exclusion_of_cdf() {
    let mut rng = rng_from_seed(5);
    let raw: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let c: f64 = rng.sample(StandardNormal);
            vec![
                30.0 + 5.0 * a,
                1.0 / (1.0 + (-(b + 0.3 * a)).exp()),
                (0.4 * c).exp(),
            ]
        })
        .collect();
    let t = [
        ParamTransform::Identity,
        ParamTransform::Logit,
        ParamTransform::Log,
    ];
    let model = KdeModel::fit(&raw, &t, &[]).unwrap();
    for _ in 0..50 {
        let lower = vec![
            20.0 + 10.0 * rng.random::<f64>(),
            0.05 + 0.4 * rng.random::<f64>(),
            0.3 + 0.6 * rng.random::<f64>(),
        ];
        let upper = vec![
            lower[0] + 15.0 * rng.random::<f64>(),
            lower[1] + 0.5 * rng.random::<f64>(),
            lower[2] + 1.5 * rng.random::<f64>(),
        ];
        let mut ie = 0.0;
        for mask in 0..8u32 {
            let corner: Vec<f64> = (0..3)
                .map(|j| {
                    if mask >> j & 1 == 1 {
                        upper[j]
                    } else {
                        lower[j]
                    }
                })
                .collect();
            let lows = 3 - mask.count_ones();
            let sign = if lows % 2 == 0 { 1.0 } else { -1.0 };
            ie += sign * model.cdf(&corner);
        }
        let direct = model.rect_probability(&Hyperrectangle::new(lower, upper).unwrap());
        assert!((direct - ie).abs() < 1e-10, "{direct} vs {ie}");
    }
}

#[test]
fn truncated_density_integrates_to_one() {
    let pts: Vec<Vec<f64>> = gaussian_points(80, 1, 6)
        .into_iter()
        .map(|p| vec![0.5 + p[0]])
        .collect();
    let model = KdeModel::fit(
        &pts,
        &[ParamTransform::Identity],
        &[ZeroRegion::below(0, 0.0)],
    )
    .unwrap();
    assert!(model.renormalization() < 1.0);
    assert_eq!(model.pdf(&[-0.1]), 0.0);

    // composite Simpson over the valid half-line; the boundary itself has zero density
    let (a, b, m) = (1e-12, 8.0, 20_000);
    let step = (b - a) / m as f64;
    let mut s = model.pdf(&[a]) + model.pdf(&[b]);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * model.pdf(&[a + k as f64 * step]);
    }
    let integral = s * step / 3.0;
    assert!((integral - 1.0).abs() < 1e-8, "integral {integral}");
    let whole = model.rect_probability(&Hyperrectangle::full(1));
    assert!((whole - 1.0).abs() < 1e-12);
}

#[test]
fn samples_respect_zero_regions_and_json_survives() {
    let pts: Vec<Vec<f64>> = gaussian_points(60, 2, 7)
        .into_iter()
        .map(|p| vec![0.3 + p[0], p[1]])
        .collect();
    let zr = [ZeroRegion::below(0, 0.0), ZeroRegion::above(1, 1.0)];
    let model = KdeModel::fit(&pts, &[ParamTransform::Identity; 2], &zr).unwrap();
    for s in model.sample(8, 2000).unwrap() {
        assert!(s[0] >= 0.0 && s[1] <= 1.0, "{s:?}");
    }
    let back = KdeModel::from_json(&model.to_json().unwrap()).unwrap();
    for theta in [[0.2, 0.1], [1.5, -0.7], [0.01, 0.99]] {
        assert_eq!(back.pdf(&theta), model.pdf(&theta));
    }
    assert_eq!(back.sample(9, 10).unwrap(), model.sample(9, 10).unwrap());
}
