use trafficmap::map_io::load_scenario;
use trafficmap::sim::suite::{write_scenario, SuiteScenario};
use trafficmap::sim::{run_scenario, EventKind, Outcome, RunOptions, RunReport};

#[test]
fn reference_scenarios_succeed() {
    for kind in SuiteScenario::ALL {
        let dir = tempfile::tempdir().unwrap();
        let scenario = load_scenario(&write_scenario(kind, dir.path()).unwrap()).unwrap();
        let out = run_scenario(&scenario, &RunOptions::default()).unwrap();
        let report = &out.report;
        let name = kind.name();
        assert_eq!(report.outcome, Outcome::Success, "{name}");
        assert_eq!(report.collision_events, 0, "{name}");
        assert_eq!(report.mutual_exclusion_violations, 0, "{name}");
        assert!(!out.events.iter().any(|e| matches!(e.kind, EventKind::RobotWall { .. })), "{name}");

        let tolerance = scenario.planner.dwa.xy_tolerance;
        for r in &report.robots {
            let arrived = r.arrival_step.unwrap_or_else(|| panic!("{name}/{}", r.name));
            assert!(arrived <= report.steps);
            // a robot stops once inside the goal tolerance
            assert!(r.path_length >= r.straight_line - tolerance - 1e-9, "{name}/{}", r.name);
        }

        let back: RunReport = serde_json::from_str(&report.to_text()).unwrap();
        assert_eq!(back.robots, report.robots);
        assert!(!report.to_text().contains("wall_clock"));

        let per_robot = out.trace.len() as u64 / scenario.robots.len() as u64;
        assert_eq!(per_robot, report.steps, "{name}");
    }
}

#[test]
fn seed_does_not_change_a_noise_free_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = load_scenario(&write_scenario(SuiteScenario::Trivial, dir.path()).unwrap()).unwrap();
    let a = run_scenario(&scenario, &RunOptions { seed: Some(1), ..RunOptions::default() }).unwrap();
    let b = run_scenario(&scenario, &RunOptions { seed: Some(99), ..RunOptions::default() }).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(b.report.seed, 99);
}

#[test]
fn shipped_scenarios_match_the_generator() {
    let shipped = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for kind in SuiteScenario::ALL {
        let dir = tempfile::tempdir().unwrap();
        write_scenario(kind, dir.path()).unwrap();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let entry = entry.unwrap();
            let ours = shipped.join(kind.name()).join(entry.file_name());
            let want = std::fs::read(entry.path()).unwrap();
            assert_eq!(std::fs::read(&ours).ok(), Some(want), "{} is stale; rerun `trafficmap scaffold all scenarios`", ours.display());
        }
    }
}
