//! Statistical properties of the crude and importance-sampling estimators and
//! of the sequential test, on stubs with known answers.

use rand::Rng;
use rand_distr::StandardNormal;

use rfp_core::density::{KdeModel, ParamTransform};
use rfp_core::preventable::{
    build_importance_density, crude_mc, default_critical_count, importance_mc,
    sequential_probability, RunOutcome, SequentialOptions, Verdict,
};
use rfp_core::rng::{derive_seed, rng_from_seed};

fn nominal() -> KdeModel {
    let mut rng = rng_from_seed(11);
    let pts: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
        .collect();
    KdeModel::fit(&pts, &[ParamTransform::Identity], &[]).unwrap()
}

fn tail_mass(model: &KdeModel, q: f64) -> f64 {
    1.0 - model.cdf(&[q])
}

fn mean_and_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn crude_estimates_are_unbiased_with_honest_std() {
    let f = nominal();
    let q = f.marginal_quantile(0, 0.95);
    let truth = tail_mass(&f, q);
    let stub = move |t: &[f64], _: u64| RunOutcome::from_collision(t[0] > q);
    let runs: Vec<(f64, f64)> = (0..100)
        .map(|k| {
            let e = crude_mc(&f, &stub, 2_000, derive_seed(12, k))
                .unwrap()
                .estimate;
            (e.mean, e.std)
        })
        .collect();
    let means: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (m, sd) = mean_and_sd(&means);
    let reported = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let pooled = sd / (runs.len() as f64).sqrt();
    assert!((m - truth).abs() < 4.0 * pooled, "mean {m} truth {truth}");
    let ratio = sd / reported;
    assert!(
        (1.0 / 1.5..1.5).contains(&ratio),
        "empirical/reported std {ratio}"
    );
}

#[test]
fn importance_estimates_are_unbiased_with_honest_std() {
    let f = nominal();
    let q = f.marginal_quantile(0, 0.99);
    let truth = tail_mass(&f, q);
    let stub = move |t: &[f64], _: u64| RunOutcome {
        collision: t[0] > q,
        min_ttc: (q - t[0]).exp(),
        final_gap: 1.0,
    };
    let runs: Vec<(f64, f64)> = (0..100)
        .map(|k| {
            let base = derive_seed(13, k);
            let pilot = crude_mc(&f, &stub, 3_000, derive_seed(base, 1)).unwrap();
            let g =
                build_importance_density(&f, &pilot.runs, default_critical_count(3_000)).unwrap();
            let e = importance_mc(&f, &g, &stub, 3_000, derive_seed(base, 2)).unwrap();
            (e.mean, e.std)
        })
        .collect();
    let means: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (m, sd) = mean_and_sd(&means);
    let reported = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    assert!(
        (m - truth).abs() < 4.0 * sd / 10.0,
        "mean {m} truth {truth}"
    );
    let ratio = sd / reported;
    assert!(
        (1.0 / 1.5..1.5).contains(&ratio),
        "empirical/reported std {ratio}"
    );
}

#[test]
fn wrong_verdict_rate_is_within_delta() {
    let opts = SequentialOptions::default();
    let trials = 10_000u64;
    for p in [0.2, 0.8] {
        let stub = move |_: &[f64], seed: u64| {
            RunOutcome::from_collision(rng_from_seed(seed).random::<f64>() < p)
        };
        let wrong = (0..trials)
            .filter(|&k| {
                let r = sequential_probability(&stub, &[0.0], &opts, derive_seed(14, k)).unwrap();
                match r.verdict {
                    Verdict::Above => p < opts.p_t,
                    Verdict::Below => p > opts.p_t,
                    Verdict::UndecidedAtCap => false,
                }
            })
            .count() as f64;
        let allowance = 3.0 * (opts.delta_p * (1.0 - opts.delta_p) * trials as f64).sqrt();
        assert!(
            wrong <= opts.delta_p * trials as f64 + allowance,
            "p={p}: {wrong} wrong verdicts"
        );
    }
}

#[test]
fn sequential_result_is_reproducible_and_capped() {
    let opts = SequentialOptions {
        cap: 40,
        ..Default::default()
    };
    let coin =
        |_: &[f64], seed: u64| RunOutcome::from_collision(rng_from_seed(seed).random::<bool>());
    for k in 0..200 {
        let a = sequential_probability(&coin, &[0.0], &opts, k).unwrap();
        let b = sequential_probability(&coin, &[0.0], &opts, k).unwrap();
        assert_eq!(a, b);
        assert!(a.n_sims >= 7 && a.n_sims <= 40);
        assert_eq!(a.p_hat, a.n_collisions as f64 / a.n_sims as f64);
    }
}
