//! Closed-loop execution of certified paths with output-space monitoring and
//! event-triggered controller handoff.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{project_ellipsoid, quadratic_form, OutputEllipsoid};
use crate::data::{steady_state, SteadyStateMap};
use crate::lti::LtiModel;
use crate::planner::CertifiedPath;
use crate::serial;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid execution parameters: {0}")]
    Params(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("segment {segment}: {reason}")]
    Segment { segment: usize, reason: String },
    #[error("initial output lies outside the first certified ellipse (value {0})")]
    StartOutside(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecParams {
    /// Goal tolerance in metres.
    pub r_f: f64,
    pub max_steps: usize,
    pub abort_on_violation: bool,
}

impl Default for ExecParams {
    fn default() -> Self {
        Self {
            r_f: 1.0,
            max_steps: 5_000,
            abort_on_violation: false,
        }
    }
}

impl ExecParams {
    fn validate(&self) -> Result<(), ExecError> {
        if !(self.r_f > 0.0 && self.r_f.is_finite()) {
            return Err(ExecError::Params(format!("r_f must be positive, got {}", self.r_f)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Finished,
    TimedOut,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    #[serde(with = "serial::vectors")]
    pub states: Vec<DVector<f64>>,
    #[serde(with = "serial::vectors")]
    pub outputs: Vec<DVector<f64>>,
    /// `inputs[k]` drives `states[k] → states[k+1]` under segment `active_segment[k+1]`.
    #[serde(with = "serial::vectors")]
    pub inputs: Vec<DVector<f64>>,
    /// Edge whose ellipse `outputs[k]` was tested against, i.e. the edge that
    /// produced it; `0` only for a zero-edge path.
    pub active_segment: Vec<usize>,
    /// Projected-ellipse value of `outputs[k]` for the active edge.
    pub membership: Vec<f64>,
    /// Full-state value `eᵀP⁻¹e` about the active certificate's centre.
    pub full_state: Vec<f64>,
    pub violations: Vec<(usize, f64)>,
    pub finished_step: Option<usize>,
    pub outcome: Outcome,
}

impl ExecutionTrace {
    pub fn max_input_norm(&self) -> f64 {
        self.inputs.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationStats {
    pub violating_segments: usize,
    pub total_segments: usize,
    /// Rounded to one decimal.
    pub percent: f64,
}

/// Per-segment violation count; a segment violates if any step while it is
/// active fails projected-ellipse membership.
pub fn violation_stats(trace: &ExecutionTrace, path: &CertifiedPath) -> ViolationStats {
    let mut bad: Vec<usize> = trace.violations.iter().map(|&(k, _)| trace.active_segment[k]).collect();
    bad.sort_unstable();
    bad.dedup();
    stats_from_counts(bad.len(), path.edges())
}

pub fn stats_from_counts(violating: usize, total: usize) -> ViolationStats {
    let percent = if total == 0 {
        0.0
    } else {
        (1000.0 * violating as f64 / total as f64).round() / 10.0
    };
    ViolationStats {
        violating_segments: violating,
        total_segments: total,
        percent,
    }
}

/// Which feedback gain drives each segment.
#[derive(Debug, Clone, PartialEq)]
pub enum GainPolicy {
    /// The certificate's own gain on every edge.
    Certified,
    /// One gain on every edge.
    Fixed(DMatrix<f64>),
}

struct Segment {
    gain: DMatrix<f64>,
    x_bar: DVector<f64>,
    u_bar: DVector<f64>,
    ellipse: OutputEllipsoid,
    chol: Cholesky<f64, nalgebra::Dyn>,
    cert_center: DVector<f64>,
}

fn prepare(
    path: &CertifiedPath,
    map: &SteadyStateMap,
    c: &DMatrix<f64>,
    policy: &GainPolicy,
) -> Result<Vec<Segment>, ExecError> {
    path.edge_certs
        .iter()
        .enumerate()
        .map(|(i, cert)| {
            let segment = i + 1;
            let err = |reason: String| ExecError::Segment { segment, reason };
            let ss = steady_state(map, &path.waypoint(segment)).map_err(|e| err(e.to_string()))?;
            let gain = match policy {
                GainPolicy::Certified => cert.k.clone(),
                GainPolicy::Fixed(k) => k.clone(),
            };
            let ellipse = project_ellipsoid(cert, c).map_err(|e| err(e.to_string()))?;
            let chol = Cholesky::new(cert.p.clone()).ok_or_else(|| err("P is not positive definite".into()))?;
            Ok(Segment {
                gain,
                x_bar: ss.x_bar,
                u_bar: ss.u_bar,
                ellipse,
                chol,
                cert_center: cert.center_state.clone(),
            })
        })
        .collect()
}

/// One agent's execution state machine.
struct Runner<'a> {
    model: &'a LtiModel,
    goal: DVector<f64>,
    segments: Vec<Segment>,
    params: ExecParams,
    x: DVector<f64>,
    active: usize,
    trace: ExecutionTrace,
    done: bool,
}

impl<'a> Runner<'a> {
    fn new(
        model: &'a LtiModel,
        path: &CertifiedPath,
        map: &SteadyStateMap,
        x0: &DVector<f64>,
        params: &ExecParams,
        policy: &GainPolicy,
    ) -> Result<Self, ExecError> {
        params.validate()?;
        if x0.len() != model.state_dim() {
            return Err(ExecError::Dimension(format!(
                "x0 has {} entries, model has {} states",
                x0.len(),
                model.state_dim()
            )));
        }
        if let GainPolicy::Fixed(k) = policy {
            if k.shape() != (model.input_dim(), model.state_dim()) {
                return Err(ExecError::Dimension(format!("gain is {}×{}", k.nrows(), k.ncols())));
            }
        }
        let segments = prepare(path, map, model.c(), policy)?;
        let goal = path
            .waypoints
            .last()
            .map(|w| DVector::from_row_slice(w))
            .ok_or_else(|| ExecError::Params("path has no cells".into()))?;
        let mut run = Self {
            model,
            goal,
            segments,
            params: *params,
            x: x0.clone(),
            active: usize::from(!path.edge_certs.is_empty()),
            trace: ExecutionTrace {
                states: Vec::new(),
                outputs: Vec::new(),
                inputs: Vec::new(),
                active_segment: Vec::new(),
                membership: Vec::new(),
                full_state: Vec::new(),
                violations: Vec::new(),
                finished_step: None,
                outcome: Outcome::TimedOut,
            },
            done: false,
        };
        if let Some(first) = run.segments.first() {
            let v = first.ellipse.value(&run.output());
            if v > 1.0 {
                return Err(ExecError::StartOutside(v));
            }
        }
        let y = run.output();
        run.log(0, &y);
        if run.active == run.segments.len() && (&y - &run.goal).norm() <= run.params.r_f {
            run.finish(0);
        }
        Ok(run)
    }

    fn output(&self) -> DVector<f64> {
        self.model.c() * &self.x
    }

    fn finish(&mut self, k: usize) {
        self.trace.finished_step = Some(k);
        self.trace.outcome = Outcome::Finished;
        self.done = true;
    }

    /// Records state `k` with its membership in the active ellipse.
    fn log(&mut self, k: usize, y: &DVector<f64>) {
        let (value, full) = match self.active.checked_sub(1).map(|i| &self.segments[i]) {
            Some(seg) => (seg.ellipse.value(y), quadratic_form(&seg.chol, &(&self.x - &seg.cert_center))),
            None => (0.0, 0.0),
        };
        self.trace.states.push(self.x.clone());
        self.trace.outputs.push(y.clone());
        self.trace.active_segment.push(self.active);
        self.trace.membership.push(value);
        self.trace.full_state.push(full);
        if value > 1.0 {
            self.trace.violations.push((k, value));
        }
    }

    /// Control step `k → k+1`: apply the active law, test the new output
    /// against the active ellipse, then either hand off or test the goal.
    fn step(&mut self, k: usize) -> Result<(), ExecError> {
        if k >= self.params.max_steps || self.active == 0 {
            self.trace.outcome = Outcome::TimedOut;
            self.done = true;
            return Ok(());
        }
        let seg = &self.segments[self.active - 1];
        let u = &seg.gain * (&self.x - &seg.x_bar) + &seg.u_bar;
        self.x = self
            .model
            .step(&self.x, &u)
            .map_err(|e| ExecError::Dimension(e.to_string()))?;
        self.trace.inputs.push(u);
        let y = self.output();
        let before = self.trace.violations.len();
        self.log(k + 1, &y);
        if self.params.abort_on_violation && self.trace.violations.len() > before {
            self.trace.outcome = Outcome::Aborted;
            self.done = true;
            return Ok(());
        }
        let last = self.segments.len();
        if self.active < last && self.segments[self.active].ellipse.contains(&y) {
            self.active += 1;
        } else if self.active == last && (&y - &self.goal).norm() <= self.params.r_f {
            self.finish(k + 1);
        }
        Ok(())
    }
}

/// Executes one certified path from `x0`.
pub fn execute_single(
    model: &LtiModel,
    path: &CertifiedPath,
    map: &SteadyStateMap,
    x0: &DVector<f64>,
    params: &ExecParams,
) -> Result<ExecutionTrace, ExecError> {
    execute_with_policy(model, path, map, x0, params, &GainPolicy::Certified)
}

pub fn execute_with_policy(
    model: &LtiModel,
    path: &CertifiedPath,
    map: &SteadyStateMap,
    x0: &DVector<f64>,
    params: &ExecParams,
    policy: &GainPolicy,
) -> Result<ExecutionTrace, ExecError> {
    let mut run = Runner::new(model, path, map, x0, params, policy)?;
    let mut k = 0;
    while !run.done {
        run.step(k)?;
        k += 1;
    }
    Ok(run.trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTrace {
    pub traces: Vec<ExecutionTrace>,
    /// Minimum pairwise output distance at global steps `0, 1, …`; empty for one agent.
    pub min_pairwise: Vec<f64>,
}

impl MultiTrace {
    pub fn min_separation(&self) -> f64 {
        self.min_pairwise.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One agent's inputs to a joint execution.
#[derive(Debug, Clone, Copy)]
pub struct AgentRun<'a> {
    pub model: &'a LtiModel,
    pub path: &'a CertifiedPath,
    pub map: &'a SteadyStateMap,
    pub x0: &'a DVector<f64>,
    pub params: &'a ExecParams,
}

/// Lockstep execution with one shared step counter; agents advance in index
/// order within a step and a finished agent holds its last output.
pub fn execute_multi(agents: &[AgentRun<'_>]) -> Result<MultiTrace, ExecError> {
    execute_multi_with(agents, |_| GainPolicy::Certified)
}

pub fn execute_multi_with(
    agents: &[AgentRun<'_>],
    policy: impl Fn(usize) -> GainPolicy,
) -> Result<MultiTrace, ExecError> {
    let mut runs = agents
        .iter()
        .enumerate()
        .map(|(i, a)| Runner::new(a.model, a.path, a.map, a.x0, a.params, &policy(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut min_pairwise = Vec::new();
    let mut record = |runs: &[Runner<'_>]| {
        if runs.len() > 1 {
            min_pairwise.push(min_distance(runs));
        }
    };
    record(&runs);
    let mut k = 0;
    while runs.iter().any(|r| !r.done) {
        for r in runs.iter_mut().filter(|r| !r.done) {
            r.step(k)?;
        }
        record(&runs);
        k += 1;
    }
    Ok(MultiTrace {
        traces: runs.into_iter().map(|r| r.trace).collect(),
        min_pairwise,
    })
}

fn min_distance(runs: &[Runner<'_>]) -> f64 {
    let outputs: Vec<DVector<f64>> = runs.iter().map(Runner::output).collect();
    outputs
        .iter()
        .enumerate()
        .flat_map(|(i, a)| outputs[i + 1..].iter().map(move |b| (a - b).norm()))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{collect_trajectory, steady_state_map, DataRecord};
    use crate::lti::{cw_inplane_model, discretize_zoh};
    use crate::planner::{plan_single, AgentData, PlannerParams};
    use crate::workspace::{build_grid, Cell, GridWorld, Rect};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        model: LtiModel,
        rec: DataRecord,
        map: SteadyStateMap,
        grid: GridWorld,
    }

    fn fixture() -> Fixture {
        let model = discretize_zoh(&cw_inplane_model(0.11).unwrap(), 30.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = collect_trajectory(&model, &DVector::zeros(4), 20, &mut rng, 1.0).unwrap();
        let map = steady_state_map(&rec).unwrap();
        let r = Rect {
            xmin: -50.0,
            xmax: 50.0,
            ymin: -50.0,
            ymax: 50.0,
        };
        let grid = build_grid(r, 10.0, &[]).unwrap();
        Fixture { model, rec, map, grid }
    }

    impl Fixture {
        fn plan(&self, start: Cell, goal: Cell, seed: u64) -> CertifiedPath {
            let agent = AgentData {
                rec: &self.rec,
                map: &self.map,
                output: self.model.c(),
                extra: None,
            };
            let params = PlannerParams { seed, ..Default::default() };
            plan_single(&self.grid, start, goal, agent, &params).unwrap().path
        }

        fn x_at(&self, path: &CertifiedPath, l: usize) -> DVector<f64> {
            steady_state(&self.map, &path.waypoint(l)).unwrap().x_bar
        }
    }

    fn cell(row: usize, col: usize) -> Cell {
        Cell { row, col }
    }

    #[test]
    fn zero_edge_path_finishes_immediately() {
        let f = fixture();
        let path = f.plan(cell(4, 4), cell(4, 4), 0);
        let t = execute_single(&f.model, &path, &f.map, &f.x_at(&path, 0), &ExecParams::default()).unwrap();
        assert_eq!(t.outcome, Outcome::Finished);
        assert_eq!(t.finished_step, Some(0));
        assert!(t.inputs.is_empty());
        assert_eq!(violation_stats(&t, &path).percent, 0.0);
    }

    #[test]
    fn starting_at_the_goal_finishes_at_step_zero() {
        let f = fixture();
        let path = f.plan(cell(4, 4), cell(4, 5), 0);
        assert_eq!(path.edges(), 1);
        let t = execute_single(&f.model, &path, &f.map, &f.x_at(&path, 1), &ExecParams::default()).unwrap();
        assert_eq!(t.finished_step, Some(0));
        assert_eq!(t.states.len(), 1);
    }

    #[test]
    fn start_outside_first_ellipse_is_rejected() {
        let f = fixture();
        let path = f.plan(cell(4, 4), cell(4, 5), 0);
        let far = f.x_at(&path, 0) + DVector::from_vec(vec![30.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            execute_single(&f.model, &path, &f.map, &far, &ExecParams::default()),
            Err(ExecError::StartOutside(v)) if v > 1.0
        ));
    }

    #[test]
    fn invalid_parameters_and_gains() {
        let f = fixture();
        let path = f.plan(cell(4, 4), cell(4, 5), 0);
        let x0 = f.x_at(&path, 0);
        let bad = ExecParams { r_f: 0.0, ..Default::default() };
        assert!(matches!(execute_single(&f.model, &path, &f.map, &x0, &bad), Err(ExecError::Params(_))));
        let k = GainPolicy::Fixed(DMatrix::zeros(4, 2));
        assert!(matches!(
            execute_with_policy(&f.model, &path, &f.map, &x0, &ExecParams::default(), &k),
            Err(ExecError::Dimension(_))
        ));
        assert!(matches!(
            execute_single(&f.model, &path, &f.map, &DVector::zeros(3), &ExecParams::default()),
            Err(ExecError::Dimension(_))
        ));
    }

    #[test]
    fn zero_step_budget_times_out() {
        let f = fixture();
        let path = f.plan(cell(0, 0), cell(0, 3), 0);
        let params = ExecParams { max_steps: 0, ..Default::default() };
        let t = execute_single(&f.model, &path, &f.map, &f.x_at(&path, 0), &params).unwrap();
        assert_eq!(t.outcome, Outcome::TimedOut);
        assert_eq!(t.finished_step, None);
        assert_eq!(t.states.len(), 1);
    }

    #[test]
    fn open_loop_drift_aborts_on_first_violation() {
        let f = fixture();
        let path = f.plan(cell(0, 0), cell(0, 3), 0);
        let params = ExecParams { abort_on_violation: true, ..Default::default() };
        let drift = GainPolicy::Fixed(DMatrix::zeros(2, 4));
        let x0 = f.x_at(&path, 0) + DVector::from_vec(vec![0.0, 0.0, 0.05, 0.05]);
        let t = execute_with_policy(&f.model, &path, &f.map, &x0, &params, &drift).unwrap();
        assert_eq!(t.outcome, Outcome::Aborted);
        assert_eq!(t.violations.len(), 1);
        assert_eq!(t.violations[0].0, t.states.len() - 1);
        assert!(*t.membership.last().unwrap() > 1.0);
    }

    /// Walks a finished trace and checks every logged step against the
    /// executor's contract.
    fn audit(f: &Fixture, path: &CertifiedPath, t: &ExecutionTrace) {
        let ellipses: Vec<_> = path
            .edge_certs
            .iter()
            .map(|c| project_ellipsoid(c, f.model.c()).unwrap())
            .collect();
        for k in 0..t.states.len() {
            assert_eq!(t.outputs[k], f.model.c() * &t.states[k]);
        }
        for k in 0..t.inputs.len() {
            let l = t.active_segment[k + 1];
            let cert = &path.edge_certs[l - 1];
            let ss = steady_state(&f.map, &path.waypoint(l)).unwrap();
            let u = &cert.k * (&t.states[k] - &ss.x_bar) + &ss.u_bar;
            assert_eq!(t.inputs[k], u, "step {k}");
            assert_eq!(t.states[k + 1], f.model.step(&t.states[k], &u).unwrap());
        }
        for w in t.active_segment.windows(2) {
            assert!(w[1] == w[0] || w[1] == w[0] + 1);
        }
        // The output that triggers a handoff lies in the next ellipse, and in
        // the current one unless it was logged as a violation.
        for k in 1..t.active_segment.len() {
            let (from, to) = (t.active_segment[k - 1], t.active_segment[k]);
            if to == from + 1 {
                let y = &t.outputs[k - 1];
                assert!(ellipses[to - 1].contains(y));
                assert!(ellipses[from - 1].contains(y) || t.violations.iter().any(|v| v.0 == k - 1));
            }
        }
        if let Some(k) = t.finished_step {
            assert_eq!(t.active_segment[k], path.edges());
            assert!((&t.outputs[k] - path.waypoint(path.edges())).norm() <= 1.0);
        }
    }

    #[test]
    fn straight_corridor_run_obeys_the_contract() {
        let f = fixture();
        let path = f.plan(cell(0, 0), cell(0, 6), 0);
        let t = execute_single(&f.model, &path, &f.map, &f.x_at(&path, 0), &ExecParams::default()).unwrap();
        assert_eq!(t.outcome, Outcome::Finished);
        audit(&f, &path, &t);
        assert_eq!(*t.active_segment.last().unwrap(), path.edges());
    }

    #[test]
    fn certified_policy_equals_fixed_policy_per_segment_for_one_edge() {
        let f = fixture();
        let path = f.plan(cell(3, 3), cell(3, 4), 0);
        let x0 = f.x_at(&path, 0);
        let p = ExecParams::default();
        let a = execute_single(&f.model, &path, &f.map, &x0, &p).unwrap();
        let fixed = GainPolicy::Fixed(path.edge_certs[0].k.clone());
        let b = execute_with_policy(&f.model, &path, &f.map, &x0, &p, &fixed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disjoint_agents_both_finish_and_stay_apart() {
        let f = fixture();
        let pa = f.plan(cell(0, 0), cell(0, 1), 0);
        let pb = f.plan(cell(9, 9), cell(9, 8), 0);
        let (xa, xb) = (f.x_at(&pa, 0), f.x_at(&pb, 0));
        let p = ExecParams::default();
        let runs = [
            AgentRun { model: &f.model, path: &pa, map: &f.map, x0: &xa, params: &p },
            AgentRun { model: &f.model, path: &pb, map: &f.map, x0: &xb, params: &p },
        ];
        let m = execute_multi(&runs).unwrap();
        assert!(m.traces.iter().all(|t| t.outcome == Outcome::Finished));
        let diameter = |path: &CertifiedPath| {
            let e = project_ellipsoid(&path.edge_certs[0], f.model.c()).unwrap();
            2.0 * e.shape().symmetric_eigenvalues().max().sqrt()
        };
        let initial = (pa.waypoint(0) - pb.waypoint(0)).norm();
        assert!(m.min_separation() >= initial - diameter(&pa) - diameter(&pb));
        approx::assert_relative_eq!(m.min_pairwise[0], initial, epsilon = 1e-9);
    }

    #[test]
    fn step_budget_applies_per_agent() {
        let f = fixture();
        let pa = f.plan(cell(0, 0), cell(0, 2), 0);
        let pb = f.plan(cell(9, 9), cell(9, 7), 0);
        let (xa, xb) = (f.x_at(&pa, 0), f.x_at(&pb, 0));
        let (p, stuck) = (ExecParams::default(), ExecParams { max_steps: 0, ..Default::default() });
        let runs = [
            AgentRun { model: &f.model, path: &pa, map: &f.map, x0: &xa, params: &p },
            AgentRun { model: &f.model, path: &pb, map: &f.map, x0: &xb, params: &stuck },
        ];
        let m = execute_multi(&runs).unwrap();
        assert_eq!(m.traces[0].outcome, Outcome::Finished);
        assert_eq!(m.traces[1].outcome, Outcome::TimedOut);
    }

    #[test]
    fn single_agent_multi_matches_single() {
        let f = fixture();
        let path = f.plan(cell(1, 1), cell(4, 6), 3);
        let x0 = f.x_at(&path, 0);
        let p = ExecParams::default();
        let single = execute_single(&f.model, &path, &f.map, &x0, &p).unwrap();
        let multi = execute_multi(&[AgentRun { model: &f.model, path: &path, map: &f.map, x0: &x0, params: &p }]).unwrap();
        assert_eq!(multi.traces, vec![single]);
        assert!(multi.min_pairwise.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_open_grid_runs_obey_the_contract(
            seed in 0u64..1000,
            start in (0usize..10, 0usize..10),
            goal in (0usize..10, 0usize..10),
        ) {
            let f = fixture();
            let path = f.plan(cell(start.0, start.1), cell(goal.0, goal.1), seed);
            let t = execute_single(&f.model, &path, &f.map, &f.x_at(&path, 0), &ExecParams::default()).unwrap();
            audit(&f, &path, &t);
        }

        #[test]
        fn percent_is_rounded_ratio(total in 1usize..500, frac in 0.0f64..=1.0) {
            let violating = ((total as f64) * frac).floor() as usize;
            let s = stats_from_counts(violating, total);
            prop_assert!((s.percent - 100.0 * violating as f64 / total as f64).abs() <= 0.05 + 1e-9);
            prop_assert_eq!((s.percent * 10.0).round(), s.percent * 10.0);
        }
    }

    #[test]
    fn table_arithmetic() {
        assert_eq!(stats_from_counts(7, 45).percent, 15.6);
        assert_eq!(stats_from_counts(3, 45).percent, 6.7);
        assert_eq!(stats_from_counts(0, 45).percent, 0.0);
        assert_eq!(stats_from_counts(45, 45).percent, 100.0);
        assert_eq!(stats_from_counts(0, 0).percent, 0.0);
    }
}
