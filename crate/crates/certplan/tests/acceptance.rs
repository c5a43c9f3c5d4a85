//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use certplan::certificates::{sampled_invariance_check, verify_certificate, VERIFY_EPS};
use certplan::data::{collect_trajectory, right_inverse_g, steady_state, steady_state_map};
use certplan::executor::stats_from_counts;
use certplan::harness::{run_pipeline, run_scenario, RunArtifact, Timing};
use certplan::lti::{cw_inplane_model, discretize_zoh, LtiModel};
use certplan::scenario::{parse_scenario, Scenario};
use certplan::workspace::{build_grid, Obstacle, Rect};
use nalgebra::{DMatrix, DVector, Vector2};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn cw() -> LtiModel {
    discretize_zoh(&cw_inplane_model(0.11).unwrap(), 30.0).unwrap()
}

fn shipped(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    parse_scenario(&fs::read_to_string(path).unwrap()).unwrap()
}

fn run(s: &Scenario) -> Result<RunArtifact, String> {
    let mut t = Timing {
        data_seconds: 0.0,
        plan_seconds: 0.0,
        execute_seconds: 0.0,
        baseline_seconds: 0.0,
    };
    run_pipeline(s, &mut t).map_err(|e| e.to_string())
}

fn check(cond: bool, what: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn lemma_oracle() -> Verdict {
    let t = Instant::now();
    let model = cw();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rec = collect_trajectory(&model, &DVector::from_fn(4, |_, _| rng.gen_range(-5.0..5.0)), 20, &mut rng, 1.0)
            .map_err(|e| e.to_string())?;
        let k = DMatrix::from_fn(2, 4, |_, _| rng.gen_range(-0.5..0.5));
        let g = right_inverse_g(&rec, &k).map_err(|e| e.to_string())?;
        let errs = [
            (rec.x1() * g.g1() - (model.a() + model.b() * &k)).norm(),
            (rec.x1() * g.g2() - model.b()).norm(),
            (rec.y0() * g.g1() - model.c()).norm(),
        ];
        worst = errs.iter().copied().fold(worst, f64::max);
    }
    check(worst <= 1e-8, format!("worst residual {worst:e}"))?;
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("20 experiments, worst residual {worst:.1e}"))
}

fn steady_state_map_matches() -> Verdict {
    let t = Instant::now();
    let model = cw();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rec = collect_trajectory(&model, &DVector::zeros(4), 20, &mut rng, 1.0).map_err(|e| e.to_string())?;
    let map = steady_state_map(&rec).map_err(|e| e.to_string())?;
    let mut truth = DMatrix::zeros(6, 6);
    truth.view_mut((0, 0), (4, 4)).copy_from(&(model.a() - DMatrix::identity(4, 4)));
    truth.view_mut((0, 4), (4, 2)).copy_from(model.b());
    truth.view_mut((4, 0), (2, 4)).copy_from(model.c());
    let map_err = (map.matrix() - &truth).norm();
    check(map_err <= 1e-8, format!("map error {map_err:e}"))?;
    let mut out_err: f64 = 0.0;
    for _ in 0..10 {
        let r = DVector::from_fn(2, |_, _| rng.gen_range(-50.0..50.0));
        let ss = steady_state(&map, &r).map_err(|e| e.to_string())?;
        out_err = out_err.max((model.c() * &ss.x_bar - &r).norm());
    }
    check(out_err <= 1e-8, format!("output error {out_err:e}"))?;
    within(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("map error {map_err:.1e}, output error {out_err:.1e}"))
}

fn certificates_sound() -> Verdict {
    let t = Instant::now();
    let art = run(&shipped("spacecraft_two_agent"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut count, mut worst) = (0, 0.0_f64);
    for a in &art.agents {
        for cert in a.tree.nodes.iter().filter_map(|n| n.cert.as_ref()) {
            let report = verify_certificate(cert, &a.data, VERIFY_EPS);
            check(report.pass, format!("agent {} certificate failed: {report:?}", a.name))?;
            let ratio = sampled_invariance_check(cert, &a.data, 100, &mut rng).map_err(|e| e.to_string())?;
            worst = worst.max(ratio);
            count += 1;
        }
    }
    check(worst <= 0.94 + 1e-6, format!("worst sampled ratio {worst}"))?;
    within(t.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{count} tree certificates verified, worst sampled ratio {worst:.4}"))
}

fn single_agent() -> Verdict {
    let t = Instant::now();
    let s = shipped("spacecraft_single_agent");
    let art = run(&s)?;
    let a = &art.agents[0];
    let trace = &art.certified.traces[0];
    check(a.iterations <= 10_000, format!("{} iterations", a.iterations))?;
    let stats = art.certified.stats[0];
    check(trace.violations.is_empty(), format!("{} violating steps ({}%)", trace.violations.len(), stats.percent))?;
    let k = trace.finished_step.ok_or("goal not reached")?;
    let miss = (&trace.outputs[k] - a.path.waypoint(a.path.edges())).norm();
    check(miss <= s.execution.r_f, format!("final miss {miss}"))?;
    within(t.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "{} edges in {} iterations, 0 violations, goal within {miss:.3} m at step {k}",
        a.path.edges(),
        a.iterations
    ))
}

fn table_is_conflict_free(art: &RunArtifact) -> Result<(), String> {
    let table = art.reservations.as_ref().ok_or("no reservation table")?;
    let mut seen = HashSet::new();
    for (k, c, _) in table.entries() {
        check(seen.insert((k, c)), format!("duplicate reservation at layer {k}"))?;
    }
    let moves = table.moves();
    for (k, from, to, a) in &moves {
        let swap = moves.iter().any(|(k2, f2, t2, b)| k2 == k && f2 == to && t2 == from && b != a);
        check(!swap, format!("swap at layer {k}"))?;
    }
    Ok(())
}

fn two_agent() -> Verdict {
    let t = Instant::now();
    let art = run(&shipped("spacecraft_two_agent"))?;
    table_is_conflict_free(&art)?;
    let percents: Vec<f64> = art.certified.stats.iter().map(|s| s.percent).collect();
    let full = art
        .certified
        .traces
        .iter()
        .flat_map(|t| t.full_state.iter().copied())
        .fold(0.0, f64::max);
    let summary = format!(
        "edges {:?}, {} rounds, certified violating segments {percents:?}%, max full-state value {full:.3}",
        art.agents.iter().map(|a| a.path.edges()).collect::<Vec<_>>(),
        art.rounds.unwrap_or(0)
    );
    check(percents.iter().all(|&p| p == 0.0), summary.clone())?;
    within(t.elapsed(), Duration::from_secs(300))?;
    Ok(summary)
}

fn baseline_contrast() -> Verdict {
    let t = Instant::now();
    let mut s = shipped("spacecraft_two_agent");
    s.baseline.enabled = true;
    let mut positive = 0;
    let mut rows = Vec::new();
    for seed in 0..10 {
        s.planner.seed = seed;
        let art = run(&s)?;
        let lqr = &art.baseline.as_ref().ok_or("baseline missing")?.execution.stats;
        if lqr.iter().any(|st| st.percent > 0.0) {
            positive += 1;
        }
        rows.push(format!("{seed}:{:?}", lqr.iter().map(|st| st.percent).collect::<Vec<_>>()));
    }
    let detail = format!("LQR positive in {positive}/10 seeds [{}]", rows.join(" "));
    check(positive >= 8, detail.clone())?;
    within(t.elapsed(), Duration::from_secs(600))?;
    Ok(detail)
}

fn deterministic() -> Verdict {
    for name in ["spacecraft_single_agent", "spacecraft_two_agent"] {
        let s = shipped(name);
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            run_scenario(&s, d.path()).map_err(|e| e.to_string())?;
        }
        for f in ["run.json", "summary.json"] {
            let a = fs::read(dirs[0].path().join(f)).unwrap();
            let b = fs::read(dirs[1].path().join(f)).unwrap();
            check(a == b, format!("{name}/{f} differs"))?;
        }
    }
    Ok("run.json and summary.json byte-identical for both shipped scenarios".into())
}

fn property(name: &str, cases: u32, test: impl FnOnce(&mut TestRunner) -> Result<(), String>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    test(&mut runner).map_err(|e| format!("{name}: {e}"))
}

fn property_suite() -> Verdict {
    let cont = cw_inplane_model(0.11).unwrap();
    property("zoh semigroup", 64, |r| {
        r.run(&(1.0f64..60.0, 1.0f64..60.0), |(t1, t2)| {
            let (d1, d2) = (discretize_zoh(&cont, t1).unwrap(), discretize_zoh(&cont, t2).unwrap());
            let d12 = discretize_zoh(&cont, t1 + t2).unwrap();
            let a_err = (d12.a() - d2.a() * d1.a()).amax();
            let b_err = (d12.b() - (d2.a() * d1.b() + d2.b())).amax();
            prop_assert!(a_err <= 1e-9 * d12.a().amax().max(1.0), "A error {a_err:e}");
            prop_assert!(b_err <= 1e-9 * d12.b().amax().max(1.0), "B error {b_err:e}");
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;

    let grid_strategy = (
        proptest::collection::vec((-45.0f64..45.0, -45.0f64..45.0, 1.0f64..12.0), 0..6),
        prop_oneof![Just(5.0), Just(10.0), Just(12.5)],
    );
    let bounds = Rect {
        xmin: -50.0,
        xmax: 50.0,
        ymin: -50.0,
        ymax: 50.0,
    };
    property("grid queries", 64, |r| {
        r.run(&grid_strategy, |(obs, cell)| {
            let obstacles: Vec<Obstacle> = obs.iter().map(|&(x, y, h)| Obstacle::new([x, y], h).unwrap()).collect();
            let grid = build_grid(bounds, cell, &obstacles).unwrap();
            for c in grid.free_cells() {
                prop_assert_eq!(grid.snap(&grid.center(c).unwrap()).unwrap(), c);
                for target in [Vector2::new(-50.0, -50.0), Vector2::new(50.0, 50.0), Vector2::new(50.0, -50.0)] {
                    let t = grid.snap(&target).unwrap();
                    if let Some(n) = grid.best_neighbour(c, t) {
                        prop_assert!(grid.in_grid(n) && grid.is_free(n));
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;

    let mut polytopes = 0;
    for name in ["spacecraft_single_agent", "spacecraft_two_agent"] {
        let art = run(&shipped(name))?;
        for a in &art.agents {
            for cert in a.tree.nodes.iter().filter_map(|n| n.cert.as_ref()) {
                check(cert.polytope.g().iter().all(|&g| g > 0.0), format!("{name}: polytope with g ≤ 0"))?;
                polytopes += 1;
            }
        }
    }

    let s = stats_from_counts(7, 45);
    check(s.percent == 15.6, format!("7 of 45 gave {}", s.percent))?;
    check(stats_from_counts(3, 45).percent == 6.7, "3 of 45".into())?;
    Ok(format!("semigroup, snap/center, best_neighbour, g>0 on {polytopes} polytopes, 7/45 → 15.6%"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("data-based closed-loop identity", lemma_oracle),
        ("steady-state map", steady_state_map_matches),
        ("certificate soundness", certificates_sound),
        ("single-agent debris run", single_agent),
        ("two-agent debris run", two_agent),
        ("LQR baseline contrast", baseline_contrast),
        ("determinism", deterministic),
        ("property suite", property_suite),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {tag} {name} ({:.2?}): {detail}", i + 1, t.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
