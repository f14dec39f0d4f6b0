//! Collision-probability boundaries of the driver model over parameter grids.

use std::collections::BTreeMap;

use rfp_core::driver_sim::DriverConfig;
use rfp_core::preventable::{
    grid_boundary, DriverSimulator, GridAxis, GridSpec, SequentialOptions,
};
use rfp_core::ScenarioFamily;

fn lvd_grid(ratio: f64, speeds: Vec<f64>) -> GridSpec {
    GridSpec {
        parameter_names: vec!["v0_lead".into(), "dv_ratio".into(), "mean_decel".into()],
        axis1: GridAxis::new("v0_lead", speeds),
        axis2: GridAxis::linspace("mean_decel", 0.5, 12.0, 47),
        fixed: BTreeMap::from([("dv_ratio".to_string(), ratio)]),
    }
}

#[test]
fn lvd_crossing_deceleration_falls_with_speed() {
    let sim = DriverSimulator::new(ScenarioFamily::Lvd, DriverConfig::default());
    let curve = grid_boundary(
        &sim,
        &lvd_grid(0.8, vec![20.0, 30.0, 40.0, 50.0]),
        &SequentialOptions::default(),
        3,
    )
    .unwrap();
    let crossings: Vec<(f64, f64)> = curve.crossings.iter().map(|c| (c.axis1, c.axis2)).collect();
    assert_eq!(crossings.len(), 4, "{crossings:?}");
    for w in crossings.windows(2) {
        assert!(
            w[1].1 < w[0].1,
            "crossing does not fall with speed: {crossings:?}"
        );
    }
    for (_, a) in &crossings {
        assert!((0.5..=12.0).contains(a));
    }
}

#[test]
fn low_speed_lvd_is_preventable_at_moderate_ratios() {
    let sim = DriverSimulator::new(ScenarioFamily::Lvd, DriverConfig::default());
    let curve = grid_boundary(
        &sim,
        &lvd_grid(0.6, vec![10.0, 20.0]),
        &SequentialOptions::default(),
        4,
    )
    .unwrap();
    assert!(curve.crossings.is_empty(), "{:?}", curve.crossings);
}

#[test]
fn asv_stays_below_threshold_everywhere() {
    let sim = DriverSimulator::new(ScenarioFamily::Asv, DriverConfig::default());
    let grid = GridSpec {
        parameter_names: vec!["v0_ego".into(), "speed_ratio".into()],
        axis1: GridAxis::linspace("v0_ego", 20.0, 40.0, 5),
        axis2: GridAxis::linspace("speed_ratio", 0.13, 0.99, 20),
        fixed: BTreeMap::new(),
    };
    let curve = grid_boundary(&sim, &grid, &SequentialOptions::default(), 5).unwrap();
    let high: Vec<(f64, f64)> = curve
        .nodes
        .iter()
        .filter(|n| n.result.p_hat >= 0.5)
        .map(|n| (n.axis1, n.axis2))
        .collect();
    assert!(high.is_empty(), "{high:?}");
    assert!(curve.crossings.is_empty());
}
