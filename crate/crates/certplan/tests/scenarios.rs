use std::fs;
use std::path::PathBuf;

use certplan::scenario::{parse_scenario, Dynamics};

fn load(name: &str) -> certplan::scenario::Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    parse_scenario(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn two_agent_scenario_has_the_seven_debris_squares() {
    let s = load("spacecraft_two_agent");
    let centers: Vec<[f64; 2]> = s.workspace.obstacles.iter().map(|o| o.center).collect();
    assert_eq!(
        centers,
        vec![[-30.0, 40.0], [-40.0, -30.0], [30.0, 30.0], [40.0, -20.0], [-30.0, 10.0], [10.0, -30.0], [0.0, 0.0]]
    );
    assert!(s.workspace.obstacles.iter().all(|o| o.size == 16.0));
    let ends: Vec<_> = s.agents.iter().map(|a| (a.start, a.goal)).collect();
    assert_eq!(ends, vec![([-45.0, -45.0], [45.0, 45.0]), ([-45.0, 45.0], [45.0, -45.0])]);
    assert_ne!(s.agents[0].data_seed, s.agents[1].data_seed);
    assert!(s.baseline.enabled);
}

#[test]
fn single_agent_scenario_matches_the_debris_setup() {
    let s = load("spacecraft_single_agent");
    assert_eq!(s.workspace.obstacles.len(), 1);
    assert_eq!(s.workspace.obstacles[0].center, [0.0, 0.0]);
    assert_eq!(s.workspace.obstacles[0].size, 16.0);
    assert_eq!(s.planner.beta, 0.2);
    assert_eq!(s.planner.lambda, 0.94);
    assert!(matches!(
        s.dynamics,
        Dynamics::ClohessyWiltshire { mean_motion, sampling_period } if mean_motion == 0.11 && sampling_period == 30.0
    ));
    // 10 m cells over a 100 m square; the 16 m square blocks the middle 2×2.
    let grid = s.grid().unwrap();
    assert_eq!(grid.dims(), (10, 10));
    assert_eq!(grid.blocked_count(), 4);
}
