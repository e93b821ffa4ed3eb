mod common;

use chipdse::model::{load_design, save_design, validate, Endpoint, InputKind, TrafficEntry};

#[test]
fn corpus_designs_validate_and_round_trip() {
    let corpus = common::corpus();
    assert!(corpus.len() >= 4);
    for (name, bundle) in corpus {
        let report = validate(&bundle);
        assert!(report.is_valid(), "{name}: {:?}", report.violations);
        let dir = tempfile::tempdir().unwrap();
        let path = save_design(&bundle, dir.path()).unwrap();
        assert_eq!(load_design(&path).unwrap(), bundle, "{name}");
    }
}

#[test]
fn generated_designs_round_trip() {
    for (name, bundle) in common::small_generated(6).into_iter().step_by(7) {
        let dir = tempfile::tempdir().unwrap();
        let path = save_design(&bundle, dir.path()).unwrap();
        assert_eq!(load_design(&path).unwrap(), bundle, "{name}");
    }
}

#[test]
fn broken_cross_references_are_reported_by_file() {
    let path = common::repo_root().join("designs/mesh_2x2/design.json");
    let good = load_design(&path).unwrap();

    let mut b = good.clone();
    if let Endpoint::Chiplet { phy, .. } = &mut b.topology.links[0].a {
        *phy = 99;
    }
    let r = validate(&b);
    assert!(r.violations.iter().any(|v| v.kind == InputKind::Topology), "{:?}", r.violations);

    let mut b = good.clone();
    b.placement.chiplets[1].position = b.placement.chiplets[0].position;
    let r = validate(&b);
    assert!(r.violations.iter().any(|v| v.kind == InputKind::Placement), "{:?}", r.violations);

    let mut b = good.clone();
    b.routing_table.nodes[0].clear();
    let r = validate(&b);
    assert!(r.violations.iter().any(|v| v.kind == InputKind::RoutingTable), "{:?}", r.violations);

    let mut b = good;
    b.traffic.entries.push(TrafficEntry { src: 9, dst: 0, amount: 1.0 });
    let r = validate(&b);
    assert!(r.violations.iter().any(|v| v.kind == InputKind::Traffic), "{:?}", r.violations);
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let src = common::repo_root().join("designs/two_chiplet");
    for entry in std::fs::read_dir(&src).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(dir.path().join("traffic.json"), "{\"entries\": [\n  {\"src\": 0, }\n]}").unwrap();
    let err = load_design(dir.path().join("design.json")).unwrap_err().to_string();
    assert!(err.contains("traffic.json:2:"), "{err}");
}
