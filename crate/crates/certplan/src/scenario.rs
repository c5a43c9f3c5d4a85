//! Declarative scenario files: schema, defaults and validation.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::LqrWeights;
use crate::executor::ExecParams;
use crate::lti::{cw_inplane_model, discretize_zoh, position_selector, LtiModel};
use crate::planner::PlannerParams;
use crate::serial;
use crate::workspace::{build_grid, Cell, GridWorld, Obstacle, Rect, StateConstraints};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario does not parse: {0}")]
    Parse(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("agents[{agent}].{field} = ({}, {}) lies in a blocked cell", .point[0], .point[1])]
    Blocked {
        agent: usize,
        field: &'static str,
        point: [f64; 2],
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dynamics {
    /// In-plane relative orbital motion, discretized with a zero-order hold.
    ClohessyWiltshire { mean_motion: f64, sampling_period: f64 },
    /// Discrete-time matrices given row by row.
    Explicit {
        #[serde(with = "serial::matrix")]
        a: DMatrix<f64>,
        #[serde(with = "serial::matrix")]
        b: DMatrix<f64>,
        #[serde(with = "serial::matrix")]
        c: DMatrix<f64>,
        sampling_period: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    /// Side length of the square.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    /// `[xmin, xmax, ymin, ymax]`.
    pub bounds: [f64; 4],
    pub cell_size: f64,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
}

fn default_samples() -> usize {
    20
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    /// Defaults to the agent's 1-based index.
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraSpec {
    #[serde(with = "serial::matrix")]
    pub f: DMatrix<f64>,
    #[serde(with = "serial::vector")]
    pub g: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSpec {
    pub beta: f64,
    pub lambda: f64,
    pub max_iters: usize,
    pub max_rounds: usize,
    pub seed: u64,
    /// Extra full-state half-spaces `f·x ≤ g`, e.g. velocity limits.
    pub extra: Option<ExtraSpec>,
}

impl Default for PlannerSpec {
    fn default() -> Self {
        let p = PlannerParams::default();
        Self {
            beta: p.beta,
            lambda: p.lambda,
            max_iters: p.max_iters,
            max_rounds: p.max_rounds,
            seed: p.seed,
            extra: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionSpec {
    pub r_f: f64,
    pub max_steps: usize,
    pub abort_on_violation: bool,
}

impl Default for ExecutionSpec {
    fn default() -> Self {
        let p = ExecParams::default();
        Self {
            r_f: p.r_f,
            max_steps: p.max_steps,
            abort_on_violation: p.abort_on_violation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub enabled: bool,
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            q_diag: vec![1.0, 1.0, 0.1, 0.1],
            r_diag: vec![10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dynamics: Dynamics,
    pub workspace: WorkspaceSpec,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub execution: ExecutionSpec,
    #[serde(default)]
    pub baseline: BaselineSpec,
}

/// Parses, fills defaults and validates a TOML scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    for (i, a) in s.agents.iter_mut().enumerate() {
        a.data_seed.get_or_insert(i as u64 + 1);
    }
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let model = self.model()?;
        let grid = self.grid()?;
        if self.agents.is_empty() {
            return Err(invalid("agents", "at least one agent is required"));
        }
        if model.output_dim() != 2 {
            return Err(invalid("dynamics.c", "the output must be a planar position"));
        }
        let mut starts: Vec<Cell> = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            if a.samples < model.state_dim() + model.input_dim() {
                return Err(invalid(format!("agents[{i}].samples"), "fewer samples than states plus inputs"));
            }
            if !(a.amplitude > 0.0 && a.amplitude.is_finite()) {
                return Err(invalid(format!("agents[{i}].amplitude"), "must be positive"));
            }
            let start = self.endpoint_cell(&grid, i, "start", a.start)?;
            self.endpoint_cell(&grid, i, "goal", a.goal)?;
            if starts.contains(&start) {
                return Err(invalid(format!("agents[{i}].start"), "shares a cell with another agent's start"));
            }
            starts.push(start);
        }
        let p = &self.planner;
        if !(0.0..=1.0).contains(&p.beta) {
            return Err(invalid("planner.beta", "must lie in [0, 1]"));
        }
        if !(p.lambda > 0.0 && p.lambda < 1.0) {
            return Err(invalid("planner.lambda", "must lie in (0, 1)"));
        }
        if let Some(ex) = &p.extra {
            if ex.f.ncols() != model.state_dim() || ex.f.nrows() != ex.g.len() {
                return Err(invalid("planner.extra", "f must be q×n and g must have q entries"));
            }
        }
        if !(self.execution.r_f > 0.0 && self.execution.r_f.is_finite()) {
            return Err(invalid("execution.r_f", "must be positive"));
        }
        if self.baseline.enabled {
            self.weights()?;
        }
        Ok(())
    }

    fn endpoint_cell(&self, grid: &GridWorld, agent: usize, field: &'static str, p: [f64; 2]) -> Result<Cell, ScenarioError> {
        let cell = grid
            .cell_at(&Vector2::new(p[0], p[1]))
            .ok_or_else(|| invalid(format!("agents[{agent}].{field}"), "outside the workspace bounds"))?;
        if grid.is_blocked(cell) {
            return Err(ScenarioError::Blocked { agent, field, point: p });
        }
        Ok(cell)
    }

    /// The simulator's ground-truth model.
    pub fn model(&self) -> Result<LtiModel, ScenarioError> {
        match &self.dynamics {
            Dynamics::ClohessyWiltshire {
                mean_motion,
                sampling_period,
            } => {
                let cm = cw_inplane_model(*mean_motion).map_err(|e| invalid("dynamics.mean_motion", e.to_string()))?;
                let m = discretize_zoh(&cm, *sampling_period)
                    .map_err(|e| invalid("dynamics.sampling_period", e.to_string()))?;
                debug_assert_eq!(m.c(), &position_selector(4));
                Ok(m)
            }
            Dynamics::Explicit {
                a,
                b,
                c,
                sampling_period,
            } => LtiModel::new(a.clone(), b.clone(), c.clone(), *sampling_period)
                .map_err(|e| invalid("dynamics", e.to_string())),
        }
    }

    pub fn grid(&self) -> Result<GridWorld, ScenarioError> {
        let w = &self.workspace;
        let [xmin, xmax, ymin, ymax] = w.bounds;
        if !(xmin < xmax && ymin < ymax) {
            return Err(invalid("workspace.bounds", "expected [xmin, xmax, ymin, ymax] with min < max"));
        }
        let obstacles = w
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                Obstacle::new(o.center, o.size / 2.0).map_err(|e| invalid(format!("workspace.obstacles[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        build_grid(Rect { xmin, xmax, ymin, ymax }, w.cell_size, &obstacles).map_err(|e| invalid("workspace", e.to_string()))
    }

    pub fn start_cells(&self, grid: &GridWorld) -> Vec<Cell> {
        self.agents
            .iter()
            .map(|a| grid.cell_at(&Vector2::new(a.start[0], a.start[1])).expect("validated"))
            .collect()
    }

    pub fn goal_cells(&self, grid: &GridWorld) -> Vec<Cell> {
        self.agents
            .iter()
            .map(|a| grid.cell_at(&Vector2::new(a.goal[0], a.goal[1])).expect("validated"))
            .collect()
    }

    pub fn planner_params(&self) -> PlannerParams {
        let p = &self.planner;
        PlannerParams {
            beta: p.beta,
            lambda: p.lambda,
            max_iters: p.max_iters,
            max_rounds: p.max_rounds,
            seed: p.seed,
        }
    }

    pub fn extra(&self) -> Option<StateConstraints> {
        self.planner.extra.as_ref().map(|e| StateConstraints {
            f: e.f.clone(),
            g: e.g.clone(),
        })
    }

    pub fn exec_params(&self) -> ExecParams {
        ExecParams {
            r_f: self.execution.r_f,
            max_steps: self.execution.max_steps,
            abort_on_violation: self.execution.abort_on_violation,
        }
    }

    pub fn weights(&self) -> Result<LqrWeights, ScenarioError> {
        let b = &self.baseline;
        LqrWeights::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(&b.q_diag)),
            DMatrix::from_diagonal(&DVector::from_row_slice(&b.r_diag)),
        )
        .map_err(|e| invalid("baseline", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"

[dynamics]
kind = "clohessy_wiltshire"
mean_motion = 0.11
sampling_period = 30.0

[workspace]
bounds = [-50.0, 50.0, -50.0, 50.0]
cell_size = 10.0

[[agents]]
name = "A"
start = [-45.0, -45.0]
goal = [45.0, 45.0]
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.planner.beta, 0.2);
        assert_eq!(s.planner.lambda, 0.94);
        assert_eq!(s.execution.r_f, 1.0);
        assert_eq!(s.agents[0].data_seed, Some(1));
        assert_eq!(s.agents[0].samples, 20);
        assert!(!s.baseline.enabled);
    }

    #[test]
    fn resolved_scenario_round_trips() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn goal_inside_debris_is_named() {
        let text = MINIMAL.replace(
            "cell_size = 10.0\n",
            "cell_size = 10.0\nobstacles = [{ center = [45.0, 45.0], size = 4.0 }]\n",
        );
        match parse_scenario(&text) {
            Err(ScenarioError::Blocked { agent: 0, field: "goal", .. }) => {}
            other => panic!("expected blocked goal, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected_with_its_name() {
        let text = MINIMAL.replace("cell_size = 10.0", "cell_size = 10.0\ncell_szie = 3");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("cell_szie"), "{err}");
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        let text = format!("{MINIMAL}\n[planner]\nbeta = 1.5\n");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Invalid { field, .. }) if field == "planner.beta"));
        let text = format!("{MINIMAL}\n[execution]\nr_f = 0.0\n");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Invalid { field, .. }) if field == "execution.r_f"));
    }

    #[test]
    fn start_outside_bounds_is_rejected() {
        let text = MINIMAL.replace("start = [-45.0, -45.0]", "start = [-55.0, 0.0]");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Invalid { field, .. }) if field == "agents[0].start"));
    }
}
