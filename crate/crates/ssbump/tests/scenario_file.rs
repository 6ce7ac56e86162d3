use ssbump::{load_scenario, Diagnostic, TABLE1_SCENARIO};
use ssbump_core::traffic::{BumpType, SpeedModel};

fn errors(text: &str) -> Vec<Diagnostic> {
    load_scenario(text).expect_err("document should be rejected")
}

#[test]
fn table1_fixture() {
    let s = load_scenario(TABLE1_SCENARIO).unwrap();
    assert_eq!(s.bumps.len(), 1);
    assert_eq!(s.bumps[0].kind, BumpType::SsBump);
    assert!(s.evs.is_empty());
    assert_eq!(s.civilians.count, Some(200));
    assert!((s.civilians.speed_min_mps - 40.0 / 3.6).abs() < 1e-12);
    assert!(s.control_run);
    assert!(matches!(s.speed_model, SpeedModel::Calibrated(_)));
}

#[test]
fn ev_defaults_to_five_second_beacons() {
    let s = load_scenario(include_str!("../scenarios/ev_route.scn")).unwrap();
    assert_eq!(s.bumps.len(), 3);
    assert_eq!(s.evs[0].beacon_interval_s, 5.0);
    let text = "duration_s = 60\n[[ev]]\nid = 2\ncruise_mps = 10\n";
    let s = load_scenario(text).unwrap();
    assert_eq!(s.evs[0].beacon_interval_s, 5.0);
    assert!(s.evs[0].registered);
}

#[test]
fn empty_document() {
    let e = errors("");
    assert_eq!(e.len(), 1);
    assert_eq!(e[0].message, "duration missing");
}

#[test]
fn duplicate_bump_id_names_the_id() {
    let text = "duration_s = 60\n[[bump]]\nid = 4\nchainage_m = 200\n[[bump]]\nid = 4\nchainage_m = 600\n";
    let e = errors(text);
    assert_eq!(e.len(), 1, "{e:?}");
    assert_eq!(e[0].message, "duplicate bump_id 4");
    assert_eq!(e[0].path, "bump[1].id");
    assert_eq!(e[0].line, Some(6));
}

#[test]
fn every_problem_is_listed_with_its_line() {
    let text = "\
duration_s = 60
colour = \"red\"

[lora]
loss_prob = \"high\"
spreading_factor = 7

[[bump]]
id = 1
chainage_m = 300
wobble = 2
penalty_height_m = 0.01
";
    let e = errors(text);
    let found: Vec<(Option<usize>, &str, &str)> = e
        .iter()
        .map(|d| (d.line, d.path.as_str(), d.message.as_str()))
        .collect();
    assert!(found.contains(&(Some(2), "colour", "unrecognized field")), "{found:?}");
    assert!(
        found.contains(&(Some(5), "lora.loss_prob", "expected a number, found string")),
        "{found:?}"
    );
    assert!(
        found.contains(&(Some(11), "bump[0].wobble", "unrecognized field")),
        "{found:?}"
    );
    assert!(
        found
            .iter()
            .any(|f| f.0 == Some(12) && f.1 == "bump[0].penalty_height_m"),
        "{found:?}"
    );
    assert_eq!(e.len(), 4, "{found:?}");
}

#[test]
fn speeds_in_either_unit_but_not_both() {
    let s = load_scenario("duration_s = 1\n[civilians]\nspeed_min_mps = 5\nspeed_max_kmh = 72\n").unwrap();
    assert_eq!(s.civilians.speed_min_mps, 5.0);
    assert!((s.civilians.speed_max_mps - 20.0).abs() < 1e-12);
    let e = errors("duration_s = 1\n[civilians]\nspeed_min_mps = 5\nspeed_min_kmh = 18\n");
    assert_eq!(e[0].line, Some(4));
    assert!(e[0].message.contains("not both"));
}

#[test]
fn syntax_errors_are_reported() {
    let e = errors("duration_s = = 5\n");
    assert_eq!(e[0].line, Some(1));
}

#[test]
fn kinematic_model_and_conventional_bumps() {
    let text =
        "duration_s = 10\nspeed_model = \"kinematic\"\n[[bump]]\nid = 9\nchainage_m = 400\ntype = \"conventional\"\n";
    let s = load_scenario(text).unwrap();
    assert_eq!(s.speed_model, SpeedModel::Kinematic);
    assert_eq!(s.bumps[0].kind, BumpType::Conventional);
    let e = errors("duration_s = 10\nspeed_model = \"magic\"\n");
    assert_eq!(e[0].path, "scenario.speed_model");
}

#[test]
fn critical_speed_follows_the_limit() {
    let s = load_scenario("duration_s = 10\n[[bump]]\nid = 1\nchainage_m = 400\nspeed_limit_kmh = 20\n").unwrap();
    let c = &s.bumps[0].config;
    assert!((c.speed_limit_mps - 20.0 / 3.6).abs() < 1e-12);
    assert_eq!(c.oobleck.critical_speed_mps, c.speed_limit_mps);
}

#[test]
fn grammar_example_loads() {
    let doc = include_str!("../scenarios/GRAMMAR.md");
    let start = doc.find("```toml\n").unwrap() + 8;
    let end = start + doc[start..].find("```").unwrap();
    let s = load_scenario(&doc[start..end]).unwrap();
    assert_eq!(s.bumps[0].config.oobleck.layer_thickness_m, 0.04);
    assert!((s.evs[0].cruise_speed_mps - 50.0 / 3.6).abs() < 1e-12);
}
