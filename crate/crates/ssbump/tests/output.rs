use ssbump::output::{records_csv, structured, tabular};
use ssbump_core::sim::{run, Scenario};

#[test]
fn empty_report() {
    let r = run(&Scenario::default(), 42).unwrap();
    let v: serde_json::Value = serde_json::from_str(&structured(&r)).unwrap();
    for key in ["records", "ev_delays", "transitions", "beacon_log"] {
        assert_eq!(v[key].as_array().map(Vec::len), Some(0), "{key}");
    }
    assert!(v["reduction_percent"].is_null());
    assert!(tabular(&r).contains("Conventional -\nSSBump -\n"));
    assert_eq!(records_csv(&[r]).lines().count(), 1);
}

#[test]
fn identical_runs_identical_bytes() {
    let s = ssbump::load_scenario(include_str!("../scenarios/ev_route.scn")).unwrap();
    assert_eq!(structured(&run(&s, 9).unwrap()), structured(&run(&s, 9).unwrap()));
}
