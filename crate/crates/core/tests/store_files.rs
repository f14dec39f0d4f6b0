//! Scenario records and object tracks read from and written to disk.

use std::collections::BTreeSet;
use std::io::Write;

use rfp_core::density::fit_kde;
use rfp_core::scenario_store::{
    exposure, load_records, mine_scenarios, read_tracks, save_records, MiningOptions, StoreError,
};
use rfp_core::{ScenarioCategory, ScenarioRecord};

fn lvd_records() -> Vec<ScenarioRecord> {
    (0..40)
        .map(|k| {
            let k = k as f64;
            ScenarioRecord {
                category_id: "lvd".into(),
                theta: vec![15.0 + 0.5 * k, 0.1 + 0.02 * k, 0.5 + 0.05 * k],
                source_time_span: None,
            }
        })
        .collect()
}

#[test]
fn records_round_trip_through_a_file_and_feed_the_kde() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lvd.csv");
    let category = ScenarioCategory::lvd();
    let records = lvd_records();
    save_records(&path, &category, &records).unwrap();
    let back = load_records(&path, &category).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(a.theta, b.theta);
    }
    let e = exposure("lvd", &back, 2.0).unwrap();
    assert_eq!(e.rate_per_hour, 20.0);
    let model = fit_kde(&back, &category).unwrap();
    assert_eq!(model.len(), 40);
}

#[test]
fn invalid_rows_are_reported_by_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "v0_lead,dv_ratio,mean_decel").unwrap();
    writeln!(f, "20,0.5,1.0").unwrap();
    writeln!(f, "20,1.5,1.0").unwrap();
    drop(f);
    let err = load_records(&path, &ScenarioCategory::lvd()).unwrap_err();
    let text = err.to_string();
    assert!(matches!(err, StoreError::Validation(_)), "{text}");
    assert!(text.contains("dv_ratio"), "{text}");
}

#[test]
fn tracks_file_mines_overlapping_phases() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tracks.csv");
    std::fs::write(
        &path,
        "object_id,tag,start,end\n\
         car1,lead,0,20\n\
         car1,braking,5,9\n\
         car2,lead,0,4\n\
         car2,braking,1,3\n",
    )
    .unwrap();
    let tracks = read_tracks(&path).unwrap();
    let query = vec![BTreeSet::from(["lead".to_string(), "braking".to_string()])];
    let opts = MiningOptions {
        slack: 0.0,
        min_duration: 2.5,
    };
    let spans = mine_scenarios(&tracks, &query, &opts);
    assert_eq!(spans.len(), 1);
    assert_eq!(spans[0].object_id, "car1");
    assert_eq!((spans[0].start, spans[0].end), (5.0, 9.0));
}
