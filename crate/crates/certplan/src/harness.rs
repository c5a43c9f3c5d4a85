//! End-to-end scenario runs: data collection, planning, execution, baseline
//! and the on-disk artifacts they produce.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{execute_lqr_baseline, LqrError};
use crate::certificates::{verify_certificate, Certificate, VerificationReport, VERIFY_EPS};
use crate::data::{collect_trajectory, excitation_rank, steady_state, steady_state_map, DataError, DataRecord};
use crate::executor::{execute_multi, violation_stats, AgentRun, ExecError, ExecutionTrace, MultiTrace, Outcome, ViolationStats};
use crate::planner::{plan_multi, plan_single, AgentData, CertifiedPath, CertifierStats, PlanError, ReservationTable, Tree};
use crate::render::{render_svg, FigureKind, RenderError};
use crate::scenario::{Scenario, ScenarioError};
use crate::serial;
use crate::workspace::Cell;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("agent {agent}: {source}")]
    Data {
        agent: String,
        #[source]
        source: DataError,
    },
    #[error("agent {agent}: collected data is not persistently exciting (rank {rank})")]
    NotExciting { agent: String, rank: usize },
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error("execution failed: {0}")]
    Exec(#[from] ExecError),
    #[error("baseline failed: {0}")]
    Baseline(#[from] LqrError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Render(#[from] RenderError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentArtifact {
    pub name: String,
    pub start: Cell,
    pub goal: Cell,
    pub data: DataRecord,
    pub path: CertifiedPath,
    pub tree: Tree,
    pub iterations: usize,
    pub certifier: CertifierStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub traces: Vec<ExecutionTrace>,
    pub stats: Vec<ViolationStats>,
    /// Minimum pairwise output distance per global step; empty for one agent.
    pub min_pairwise: Vec<f64>,
}

impl ExecutionReport {
    fn new(run: MultiTrace, paths: &[&CertifiedPath]) -> Self {
        let stats = run.traces.iter().zip(paths).map(|(t, p)| violation_stats(t, p)).collect();
        Self {
            traces: run.traces,
            stats,
            min_pairwise: run.min_pairwise,
        }
    }

    pub fn aborted(&self) -> bool {
        self.traces.iter().any(|t| t.outcome == Outcome::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    #[serde(with = "serial::matrices")]
    pub gains: Vec<DMatrix<f64>>,
    pub execution: ExecutionReport,
}

/// Everything a run produced, sufficient to re-verify and re-render it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub agents: Vec<AgentArtifact>,
    pub reservations: Option<ReservationTable>,
    pub rounds: Option<usize>,
    pub certified: ExecutionReport,
    pub baseline: Option<BaselineReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub data_seconds: f64,
    pub plan_seconds: f64,
    pub execute_seconds: f64,
    pub baseline_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub stats: ViolationStats,
    pub outcome: Outcome,
    pub finished_step: Option<usize>,
    pub max_input_norm: f64,
}

impl ControllerSummary {
    fn new(trace: &ExecutionTrace, stats: ViolationStats) -> Self {
        Self {
            stats,
            outcome: trace.outcome,
            finished_step: trace.finished_step,
            max_input_norm: trace.max_input_norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub name: String,
    pub edges: usize,
    pub iterations: usize,
    pub sdp_solves: usize,
    pub certified: ControllerSummary,
    pub lqr: Option<ControllerSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub rounds: Option<usize>,
    pub agents: Vec<AgentSummary>,
    pub certified_min_separation: Option<f64>,
    pub lqr_min_separation: Option<f64>,
}

impl RunArtifact {
    pub fn summary(&self) -> Summary {
        let min_sep = |r: &ExecutionReport| r.min_pairwise.iter().copied().reduce(f64::min);
        Summary {
            schema_version: SCHEMA_VERSION,
            scenario: self.scenario.name.clone(),
            rounds: self.rounds,
            agents: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| AgentSummary {
                    name: a.name.clone(),
                    edges: a.path.edges(),
                    iterations: a.iterations,
                    sdp_solves: a.certifier.sdp_solves,
                    certified: ControllerSummary::new(&self.certified.traces[i], self.certified.stats[i]),
                    lqr: self.baseline.as_ref().map(|b| {
                        ControllerSummary::new(&b.execution.traces[i], b.execution.stats[i])
                    }),
                })
                .collect(),
            certified_min_separation: min_sep(&self.certified),
            lqr_min_separation: self.baseline.as_ref().and_then(|b| min_sep(&b.execution)),
        }
    }

    /// True if any execution aborted on a violation.
    pub fn aborted(&self) -> bool {
        self.certified.aborted() || self.baseline.as_ref().is_some_and(|b| b.execution.aborted())
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let art: Self = serde_json::from_str(&text).map_err(|e| RunError::Artifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if art.schema_version != SCHEMA_VERSION {
            return Err(RunError::Artifact {
                path: path.to_path_buf(),
                message: format!("schema version {} (expected {SCHEMA_VERSION})", art.schema_version),
            });
        }
        Ok(art)
    }
}

/// Runs the whole pipeline in memory; `timing` receives wall-clock durations.
pub fn run_pipeline(s: &Scenario, timing: &mut Timing) -> Result<RunArtifact, RunError> {
    s.validate()?;
    let model = s.model()?;
    let grid = s.grid()?;
    let starts = s.start_cells(&grid);
    let goals = s.goal_cells(&grid);

    let t = Instant::now();
    let mut records = Vec::with_capacity(s.agents.len());
    for (i, a) in s.agents.iter().enumerate() {
        let data_err = |source| RunError::Data {
            agent: a.name.clone(),
            source,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(a.data_seed.unwrap_or(i as u64 + 1));
        let rec = collect_trajectory(&model, &DVector::zeros(model.state_dim()), a.samples, &mut rng, a.amplitude)
            .map_err(data_err)?;
        let ex = excitation_rank(&rec);
        if !ex.persistently_exciting {
            return Err(RunError::NotExciting {
                agent: a.name.clone(),
                rank: ex.rank,
            });
        }
        records.push(rec);
    }
    let maps = records
        .iter()
        .zip(&s.agents)
        .map(|(r, a)| {
            steady_state_map(r).map_err(|source| RunError::Data {
                agent: a.name.clone(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    timing.data_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let extra = s.extra();
    let agent_data: Vec<AgentData<'_>> = records
        .iter()
        .zip(&maps)
        .map(|(rec, map)| AgentData {
            rec,
            map,
            output: model.c(),
            extra: extra.as_ref(),
        })
        .collect();
    let params = s.planner_params();
    let (plans, reservations, rounds) = if s.agents.len() == 1 {
        let p = plan_single(&grid, starts[0], goals[0], agent_data[0], &params)?;
        (vec![(p.path, p.tree, p.iterations, p.certifier)], None, None)
    } else {
        let m = plan_multi(&grid, &starts, &goals, &agent_data, &params)?;
        let plans = m
            .paths
            .into_iter()
            .zip(m.trees)
            .zip(m.iterations)
            .zip(m.certifier)
            .map(|(((p, t), i), c)| (p, t, i, c))
            .collect();
        (plans, Some(m.table), Some(m.rounds))
    };
    timing.plan_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let x0s = plans
        .iter()
        .zip(&maps)
        .map(|((path, ..), map)| steady_state(map, &path.waypoint(0)).map(|ss| ss.x_bar))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| RunError::Data {
            agent: "start".into(),
            source,
        })?;
    let exec = s.exec_params();
    let runs: Vec<AgentRun<'_>> = plans
        .iter()
        .zip(&maps)
        .zip(&x0s)
        .map(|(((path, ..), map), x0)| AgentRun {
            model: &model,
            path,
            map,
            x0,
            params: &exec,
        })
        .collect();
    let paths: Vec<&CertifiedPath> = plans.iter().map(|(p, ..)| p).collect();
    let certified = ExecutionReport::new(execute_multi(&runs)?, &paths);
    timing.execute_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let baseline = if s.baseline.enabled {
        let b = execute_lqr_baseline(&runs, &s.weights()?)?;
        Some(BaselineReport {
            gains: b.gains,
            execution: ExecutionReport {
                traces: b.execution.traces,
                stats: b.stats,
                min_pairwise: b.execution.min_pairwise,
            },
        })
    } else {
        None
    };
    timing.baseline_seconds = t.elapsed().as_secs_f64();

    let agents = plans
        .into_iter()
        .zip(records)
        .zip(s.agents.iter().zip(starts.iter().zip(&goals)))
        .map(|(((path, tree, iterations, certifier), data), (a, (start, goal)))| AgentArtifact {
            name: a.name.clone(),
            start: *start,
            goal: *goal,
            data,
            path,
            tree,
            iterations,
            certifier,
        })
        .collect();
    Ok(RunArtifact {
        schema_version: SCHEMA_VERSION,
        scenario: s.clone(),
        agents,
        reservations,
        rounds,
        certified,
        baseline,
    })
}

pub const ARTIFACT_FILE: &str = "run.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";

/// Runs `s` and writes the artifact, summary, timing, traces, data and figures
/// under `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunArtifact, RunError> {
    let mut timing = Timing {
        data_seconds: 0.0,
        plan_seconds: 0.0,
        execute_seconds: 0.0,
        baseline_seconds: 0.0,
    };
    let art = run_pipeline(s, &mut timing)?;
    write_outputs(&art, &timing, out_dir)?;
    Ok(art)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_outputs(art: &RunArtifact, timing: &Timing, out_dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_json(&out_dir.join(ARTIFACT_FILE), art)?;
    write_json(&out_dir.join(SUMMARY_FILE), &art.summary())?;
    write_json(&out_dir.join(TIMING_FILE), timing)?;
    let scenario_path = out_dir.join("scenario.toml");
    fs::write(&scenario_path, art.scenario.to_toml()).map_err(io_err(&scenario_path))?;
    for (i, a) in art.agents.iter().enumerate() {
        let dir = out_dir.join("data").join(&a.name);
        a.data.save_csv(&dir).map_err(|source| RunError::Data {
            agent: a.name.clone(),
            source,
        })?;
        write_trace_csv(&out_dir.join(format!("trace_certified_{}.csv", a.name)), &art.certified.traces[i])?;
        if let Some(b) = &art.baseline {
            write_trace_csv(&out_dir.join(format!("trace_lqr_{}.csv", a.name)), &b.execution.traces[i])?;
        }
    }
    for kind in FigureKind::ALL {
        let path = out_dir.join(format!("{}.svg", kind.name()));
        fs::write(&path, render_svg(art, kind)?).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Columns: step, state, output, input (empty on the final row), active
/// segment, projected-ellipse value, full-state value.
pub fn write_trace_csv(path: &Path, trace: &ExecutionTrace) -> Result<(), RunError> {
    let csv_err = |e: csv::Error| RunError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let n = trace.states.first().map_or(0, |x| x.len());
    let p = trace.outputs.first().map_or(0, |y| y.len());
    let m = trace.inputs.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=p).map(|i| format!("y{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend(["segment", "membership", "full_state"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    let num = |v: f64| format!("{v:.16e}");
    for k in 0..trace.states.len() {
        let mut row = vec![k.to_string()];
        row.extend(trace.states[k].iter().map(|&v| num(v)));
        row.extend(trace.outputs[k].iter().map(|&v| num(v)));
        match trace.inputs.get(k) {
            Some(u) => row.extend(u.iter().map(|&v| num(v))),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row.push(trace.active_segment[k].to_string());
        row.push(num(trace.membership[k]));
        row.push(num(trace.full_state[k]));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub agent: String,
    /// `None` for the start-cell certificate.
    pub edge: Option<usize>,
    pub report: VerificationReport,
}

/// Re-verifies every stored certificate against its agent's stored data.
pub fn verify_artifact(art: &RunArtifact) -> Vec<CertificateCheck> {
    let check = |a: &AgentArtifact, edge: Option<usize>, cert: &Certificate| CertificateCheck {
        agent: a.name.clone(),
        edge,
        report: verify_certificate(cert, &a.data, VERIFY_EPS),
    };
    art.agents
        .iter()
        .flat_map(|a| {
            let root = a.path.root_cert.iter().map(move |c| check(a, None, c));
            let edges = a.path.edge_certs.iter().enumerate().map(move |(l, c)| check(a, Some(l + 1), c));
            root.chain(edges)
        })
        .collect()
}
