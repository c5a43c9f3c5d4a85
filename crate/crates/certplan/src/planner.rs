//! Certified RRT growth on the grid: single-agent search and synchronous
//! multi-agent search with a space–time reservation table.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, Vector2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{
    project_ellipsoid, solve_certificate, verify_certificate, Certificate, CertificateOutcome, OutputEllipsoid,
    Polytope, VERIFY_EPS,
};
use crate::data::{steady_state, DataRecord, SteadyStateMap};
use crate::workspace::{lift_to_state, shared_cell, BoxHalfspace, Cell, GridWorld, StateConstraints, WorkspaceError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("goal cell ({}, {}) is blocked or outside the grid", .0.row, .0.col)]
    GoalBlocked(Cell),
    #[error("start cell ({}, {}) is blocked or outside the grid", .0.row, .0.col)]
    StartBlocked(Cell),
    #[error("start cells must be pairwise distinct")]
    DuplicateStarts,
    #[error("invalid planner parameters: {0}")]
    Params(String),
    #[error("no path found within {0} iterations")]
    NoPath(usize),
    #[error("round budget of {rounds} exhausted; unfinished agents {unfinished:?}")]
    Unfinished { rounds: usize, unfinished: Vec<usize> },
    #[error("broken parent chain at node {0}")]
    BrokenTree(usize),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("steady state unavailable: {0}")]
    SteadyState(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Probability of sampling the goal centre.
    pub beta: f64,
    pub lambda: f64,
    /// Sample budget per agent.
    pub max_iters: usize,
    /// Synchronous round budget for multi-agent planning.
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            lambda: 0.94,
            max_iters: 10_000,
            max_rounds: 500,
            seed: 0,
        }
    }
}

impl PlannerParams {
    fn validate(&self) -> Result<(), PlanError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(PlanError::Params(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(PlanError::Params(format!("lambda {} outside (0, 1)", self.lambda)));
        }
        Ok(())
    }
}

/// Everything one agent needs to certify moves: its own data and the known
/// output map. The ground-truth dynamics are deliberately absent.
#[derive(Debug, Clone, Copy)]
pub struct AgentData<'a> {
    pub rec: &'a DataRecord,
    pub map: &'a SteadyStateMap,
    pub output: &'a DMatrix<f64>,
    pub extra: Option<&'a StateConstraints>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub cell: Cell,
    pub parent: Option<usize>,
    pub depth: usize,
    pub cert: Option<Certificate>,
    pub proj: Option<OutputEllipsoid>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "TreeNodes", into = "TreeNodes")]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    index: HashMap<Cell, usize>,
}

#[derive(Serialize, Deserialize)]
struct TreeNodes {
    nodes: Vec<TreeNode>,
}

impl From<TreeNodes> for Tree {
    fn from(t: TreeNodes) -> Self {
        let index = t.nodes.iter().enumerate().map(|(i, n)| (n.cell, i)).collect();
        Self { nodes: t.nodes, index }
    }
}

impl From<Tree> for TreeNodes {
    fn from(t: Tree) -> Self {
        Self { nodes: t.nodes }
    }
}

impl Tree {
    fn with_root(cell: Cell, cert: Option<Certificate>, proj: Option<OutputEllipsoid>) -> Self {
        let mut t = Self::default();
        t.push(TreeNode {
            cell,
            parent: None,
            depth: 0,
            cert,
            proj,
        });
        t
    }

    fn push(&mut self, node: TreeNode) -> usize {
        let id = self.nodes.len();
        self.index.insert(node.cell, id);
        self.nodes.push(node);
        id
    }

    pub fn find(&self, c: Cell) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.index.contains_key(&c)
    }

    /// Vertex nearest to `target` in ℓ₁; ties go to the earliest inserted.
    pub fn nearest(&self, target: Cell) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .min_by_key(|(i, n)| (n.cell.manhattan(&target), *i))
            .map(|(i, _)| i)
            .expect("tree has a root")
    }

}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedPath {
    pub cells: Vec<Cell>,
    /// Cell centres `p_0 … p_Nw`.
    pub waypoints: Vec<[f64; 2]>,
    pub root_cert: Option<Certificate>,
    /// Certificate of edge `ℓ` (cells `ℓ−1 → ℓ`) at index `ℓ−1`.
    pub edge_certs: Vec<Certificate>,
}

impl CertifiedPath {
    pub fn edges(&self) -> usize {
        self.edge_certs.len()
    }

    pub fn waypoint(&self, l: usize) -> DVector<f64> {
        DVector::from_row_slice(&self.waypoints[l])
    }
}

pub fn backtrack(tree: &Tree, goal: usize, grid: &GridWorld) -> Result<CertifiedPath, PlanError> {
    let mut chain = vec![goal];
    let mut cur = goal;
    while let Some(p) = tree.nodes.get(cur).ok_or(PlanError::BrokenTree(cur))?.parent {
        if p >= tree.nodes.len() || chain.len() > tree.nodes.len() {
            return Err(PlanError::BrokenTree(cur));
        }
        chain.push(p);
        cur = p;
    }
    chain.reverse();
    let cells: Vec<Cell> = chain.iter().map(|&i| tree.nodes[i].cell).collect();
    let waypoints = cells
        .iter()
        .map(|c| grid.center(*c).map(|v| [v.x, v.y]))
        .collect::<Result<_, _>>()?;
    let edge_certs = chain[1..]
        .iter()
        .map(|&i| tree.nodes[i].cert.clone().ok_or(PlanError::BrokenTree(i)))
        .collect::<Result<_, _>>()?;
    Ok(CertifiedPath {
        cells,
        waypoints,
        root_cert: tree.nodes[chain[0]].cert.clone(),
        edge_certs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CertifierStats {
    pub sdp_solves: usize,
    pub reused: usize,
    pub infeasible: usize,
    pub solver_errors: usize,
}

/// Certificate plus its output-space ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCert {
    pub cert: Certificate,
    pub proj: OutputEllipsoid,
}

/// Per-agent certificate factory with memoization.
///
/// Each move's box is expressed in error coordinates about the steady state
/// of the box centre, so all moves in the same direction share one polytope;
/// SDP solutions are reused across equal polytopes and re-verified on reuse.
struct Certifier<'a> {
    grid: &'a GridWorld,
    agent: AgentData<'a>,
    lambda: f64,
    edges: HashMap<(Cell, Cell), Option<EdgeCert>>,
    by_shape: HashMap<Vec<i64>, Option<Certificate>>,
    stats: CertifierStats,
}

fn shape_key(poly: &Polytope) -> Vec<i64> {
    poly.f()
        .iter()
        .chain(poly.g().iter())
        .map(|v| (v * 1e8).round() as i64)
        .collect()
}

impl<'a> Certifier<'a> {
    fn new(grid: &'a GridWorld, agent: AgentData<'a>, lambda: f64) -> Self {
        Self {
            grid,
            agent,
            lambda,
            edges: HashMap::new(),
            by_shape: HashMap::new(),
            stats: CertifierStats::default(),
        }
    }

    fn certify_box(&mut self, bx: &BoxHalfspace) -> Result<Option<EdgeCert>, PlanError> {
        let center = bx.rect.center();
        let r = DVector::from_vec(vec![center.x, center.y]);
        let ss = steady_state(self.agent.map, &r).map_err(|e| PlanError::SteadyState(e.to_string()))?;
        let poly = lift_to_state(&bx.fxy, &bx.gxy, &ss.x_bar, self.agent.output, self.agent.extra)?;
        let key = shape_key(&poly);
        let cached = self.by_shape.get(&key).cloned().flatten().and_then(|mut c| {
            c.polytope = poly.clone();
            c.center_state = ss.x_bar.clone();
            c.center_output = r.clone();
            verify_certificate(&c, self.agent.rec, VERIFY_EPS).pass.then_some(c)
        });
        let cert = match cached {
            Some(c) => {
                self.stats.reused += 1;
                Some(c)
            }
            None if matches!(self.by_shape.get(&key), Some(None)) => {
                self.stats.reused += 1;
                None
            }
            None => {
                self.stats.sdp_solves += 1;
                let outcome = solve_certificate(self.agent.rec, &poly, self.lambda, &ss.x_bar, &r)
                    .map_err(|e| PlanError::Params(e.to_string()))?;
                let cert = match outcome {
                    CertificateOutcome::Certified(c) => Some(*c),
                    CertificateOutcome::Infeasible => {
                        self.stats.infeasible += 1;
                        None
                    }
                    CertificateOutcome::SolverError(_) => {
                        self.stats.solver_errors += 1;
                        None
                    }
                };
                self.by_shape.insert(key, cert.clone());
                cert
            }
        };
        Ok(match cert {
            Some(cert) => {
                let proj = project_ellipsoid(&cert, self.agent.output).map_err(|e| PlanError::Params(e.to_string()))?;
                Some(EdgeCert { cert, proj })
            }
            None => None,
        })
    }

    fn edge(&mut self, near: Cell, new: Cell) -> Result<Option<EdgeCert>, PlanError> {
        if let Some(hit) = self.edges.get(&(near, new)) {
            return Ok(hit.clone());
        }
        let bx = self.grid.box_halfspace(near, new)?;
        let out = self.certify_box(&bx)?;
        self.edges.insert((near, new), out.clone());
        Ok(out)
    }

    fn root(&mut self, start: Cell) -> Result<Option<EdgeCert>, PlanError> {
        let bx = self.grid.cell_halfspace(start)?;
        self.certify_box(&bx)
    }
}

/// Outcome of one sample–snap–nearest–extend–certify attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub agent: usize,
    pub near: usize,
    pub c_near: Cell,
    pub c_new: Cell,
    /// `depth(c_near) + 1`.
    pub layer: usize,
    pub cert: Certificate,
    pub proj: OutputEllipsoid,
}

fn sample_point<R: Rng>(grid: &GridWorld, goal: Cell, beta: f64, rng: &mut R) -> Vector2<f64> {
    if rng.gen::<f64>() < beta {
        return grid.center(goal).expect("goal validated");
    }
    let b = grid.bounds();
    loop {
        let p = Vector2::new(rng.gen_range(b.xmin..b.xmax), rng.gen_range(b.ymin..b.ymax));
        if grid.cell_at(&p).is_some_and(|c| grid.is_free(c)) {
            return p;
        }
    }
}

/// Both ellipses must contain the centre of the near cell, which is the cell
/// shared with the parent move. At the root only the new ellipse is tested,
/// so execution can start at the start-cell steady state.
fn overlap_ok(grid: &GridWorld, tree: &Tree, near: usize, child: &OutputEllipsoid) -> Result<bool, PlanError> {
    let node = &tree.nodes[near];
    let mid_cell = match node.parent {
        Some(parent) => shared_cell(tree.nodes[parent].cell, node.cell)?,
        None => node.cell,
    };
    let mid = grid.center(mid_cell)?;
    let mid = DVector::from_vec(vec![mid.x, mid.y]);
    let parent_ok = match (&node.proj, node.parent) {
        (Some(proj), Some(_)) => proj.contains(&mid),
        _ => true,
    };
    Ok(parent_ok && child.contains(&mid))
}

struct AgentSearch<'a> {
    index: usize,
    goal: Cell,
    tree: Tree,
    certifier: Certifier<'a>,
    rng: ChaCha8Rng,
    iterations: usize,
}

impl<'a> AgentSearch<'a> {
    fn new(
        index: usize,
        grid: &'a GridWorld,
        start: Cell,
        goal: Cell,
        agent: AgentData<'a>,
        params: &PlannerParams,
        rng: ChaCha8Rng,
    ) -> Result<Self, PlanError> {
        let mut certifier = Certifier::new(grid, agent, params.lambda);
        let root = certifier.root(start)?;
        let (cert, proj) = match root {
            Some(e) => (Some(e.cert), Some(e.proj)),
            None => (None, None),
        };
        Ok(Self {
            index,
            goal,
            tree: Tree::with_root(start, cert, proj),
            certifier,
            rng,
            iterations: 0,
        })
    }

    fn done(&self) -> bool {
        self.tree.contains(self.goal)
    }

    /// One pass of the single-agent pipeline; `None` when the sample is rejected.
    fn attempt(&mut self, grid: &GridWorld, beta: f64) -> Result<Option<Proposal>, PlanError> {
        self.iterations += 1;
        let q = sample_point(grid, self.goal, beta, &mut self.rng);
        let c_rand = grid.snap(&q)?;
        let near = self.tree.nearest(c_rand);
        let c_near = self.tree.nodes[near].cell;
        let Some(c_new) = grid.best_neighbour(c_near, c_rand) else {
            return Ok(None);
        };
        if self.tree.contains(c_new) {
            return Ok(None);
        }
        let Some(edge) = self.certifier.edge(c_near, c_new)? else {
            return Ok(None);
        };
        if !overlap_ok(grid, &self.tree, near, &edge.proj)? {
            return Ok(None);
        }
        Ok(Some(Proposal {
            agent: self.index,
            near,
            c_near,
            c_new,
            layer: self.tree.nodes[near].depth + 1,
            cert: edge.cert,
            proj: edge.proj,
        }))
    }

    fn commit(&mut self, p: Proposal) -> usize {
        self.tree.push(TreeNode {
            cell: p.c_new,
            parent: Some(p.near),
            depth: p.layer,
            cert: Some(p.cert),
            proj: Some(p.proj),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglePlan {
    pub path: CertifiedPath,
    pub tree: Tree,
    pub iterations: usize,
    pub certifier: CertifierStats,
}

fn check_endpoints(grid: &GridWorld, start: Cell, goal: Cell) -> Result<(), PlanError> {
    if grid.is_blocked(goal) {
        return Err(PlanError::GoalBlocked(goal));
    }
    if grid.is_blocked(start) {
        return Err(PlanError::StartBlocked(start));
    }
    Ok(())
}

/// Single-agent certified RRT.
pub fn plan_single(
    grid: &GridWorld,
    start: Cell,
    goal: Cell,
    agent: AgentData<'_>,
    params: &PlannerParams,
) -> Result<SinglePlan, PlanError> {
    params.validate()?;
    check_endpoints(grid, start, goal)?;
    let rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut search = AgentSearch::new(0, grid, start, goal, agent, params, rng)?;
    if let Some(id) = search.tree.find(goal) {
        return finish_single(grid, search, id);
    }
    while search.iterations < params.max_iters {
        if let Some(p) = search.attempt(grid, params.beta)? {
            let reached = p.c_new == goal;
            let id = search.commit(p);
            if reached {
                return finish_single(grid, search, id);
            }
        }
    }
    Err(PlanError::NoPath(params.max_iters))
}

fn finish_single(grid: &GridWorld, search: AgentSearch<'_>, goal: usize) -> Result<SinglePlan, PlanError> {
    Ok(SinglePlan {
        path: backtrack(&search.tree, goal, grid)?,
        iterations: search.iterations,
        certifier: search.certifier.stats,
        tree: search.tree,
    })
}

/// Space–time reservations: one owner per `(layer, cell)`, the committed moves
/// (for swap detection) and goal cells held from arrival onwards.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "ReservationRecords", into = "ReservationRecords")]
pub struct ReservationTable {
    layers: BTreeMap<usize, BTreeMap<Cell, usize>>,
    moves: BTreeMap<(usize, Cell, Cell), usize>,
    parked: BTreeMap<Cell, (usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct Reservation {
    layer: usize,
    cell: Cell,
    agent: usize,
}

#[derive(Serialize, Deserialize)]
struct Move {
    layer: usize,
    from: Cell,
    to: Cell,
    agent: usize,
}

#[derive(Serialize, Deserialize)]
struct Parked {
    cell: Cell,
    agent: usize,
    from_layer: usize,
}

#[derive(Serialize, Deserialize)]
struct ReservationRecords {
    reservations: Vec<Reservation>,
    moves: Vec<Move>,
    parked: Vec<Parked>,
}

impl From<ReservationRecords> for ReservationTable {
    fn from(r: ReservationRecords) -> Self {
        let mut t = Self::default();
        for x in r.reservations {
            t.layers.entry(x.layer).or_default().insert(x.cell, x.agent);
        }
        for m in r.moves {
            t.moves.insert((m.layer, m.from, m.to), m.agent);
        }
        for p in r.parked {
            t.parked.insert(p.cell, (p.agent, p.from_layer));
        }
        t
    }
}

impl From<ReservationTable> for ReservationRecords {
    fn from(t: ReservationTable) -> Self {
        Self {
            reservations: t
                .entries()
                .into_iter()
                .map(|(layer, cell, agent)| Reservation { layer, cell, agent })
                .collect(),
            moves: t
                .moves()
                .into_iter()
                .map(|(layer, from, to, agent)| Move { layer, from, to, agent })
                .collect(),
            parked: t
                .parked()
                .into_iter()
                .map(|(cell, agent, from_layer)| Parked { cell, agent, from_layer })
                .collect(),
        }
    }
}

impl ReservationTable {
    pub fn owner(&self, layer: usize, cell: Cell) -> Option<usize> {
        if let Some(a) = self.layers.get(&layer).and_then(|l| l.get(&cell)) {
            return Some(*a);
        }
        self.parked
            .get(&cell)
            .and_then(|&(agent, from)| (layer >= from).then_some(agent))
    }

    pub fn is_reserved(&self, layer: usize, cell: Cell) -> bool {
        self.owner(layer, cell).is_some()
    }

    /// Records `agent` at `(layer, cell)`; returns false if another agent holds it.
    pub fn reserve(&mut self, layer: usize, cell: Cell, agent: usize) -> bool {
        match self.owner(layer, cell) {
            Some(a) if a != agent => false,
            _ => {
                self.layers.entry(layer).or_default().insert(cell, agent);
                true
            }
        }
    }

    pub fn record_move(&mut self, layer: usize, from: Cell, to: Cell, agent: usize) {
        self.moves.insert((layer, from, to), agent);
    }

    /// Holds `cell` for `agent` at every layer from `from` on.
    pub fn park(&mut self, cell: Cell, agent: usize, from: usize) {
        self.parked.insert(cell, (agent, from));
    }

    /// Whether another agent already moves `to → from` arriving at `layer`.
    pub fn swaps_with(&self, layer: usize, from: Cell, to: Cell, agent: usize) -> bool {
        self.moves.get(&(layer, to, from)).is_some_and(|&a| a != agent)
    }

    /// Whether another agent holds `cell` at any layer ≥ `layer`.
    pub fn held_later_by_other(&self, layer: usize, cell: Cell, agent: usize) -> bool {
        self.layers
            .range(layer..)
            .any(|(_, l)| l.get(&cell).is_some_and(|&a| a != agent))
            || self.parked.get(&cell).is_some_and(|&(a, _)| a != agent)
    }

    /// Flattened `(layer, cell, agent)` entries, parked goals excluded.
    pub fn entries(&self) -> Vec<(usize, Cell, usize)> {
        self.layers
            .iter()
            .flat_map(|(k, l)| l.iter().map(move |(c, a)| (*k, *c, *a)))
            .collect()
    }

    pub fn moves(&self) -> Vec<(usize, Cell, Cell, usize)> {
        self.moves.iter().map(|(&(k, f, t), &a)| (k, f, t, a)).collect()
    }

    pub fn parked(&self) -> Vec<(Cell, usize, usize)> {
        self.parked.iter().map(|(&c, &(a, k))| (c, a, k)).collect()
    }
}

/// Prunes a round's proposals: reservation conflicts, then same-cell
/// duplicates, then head-on swaps. Duplicates and swaps keep the proposal with
/// the smaller ℓ₁ distance from its new cell to its own goal; ties are random.
pub fn resolve_conflicts<R: Rng + ?Sized>(
    proposals: Vec<Proposal>,
    goals: &[Cell],
    table: &ReservationTable,
    rng: &mut R,
) -> Vec<Proposal> {
    let mut live: Vec<Proposal> = proposals
        .into_iter()
        .filter(|p| {
            !table.is_reserved(p.layer, p.c_new)
                && !table.swaps_with(p.layer, p.c_near, p.c_new, p.agent)
                && !(p.c_new == goals[p.agent] && table.held_later_by_other(p.layer, p.c_new, p.agent))
        })
        .collect();
    // Random order first so that the stable sort below breaks ties randomly.
    live.shuffle(rng);
    live.sort_by_key(|p| p.c_new.manhattan(&goals[p.agent]));

    let mut kept: Vec<Proposal> = Vec::with_capacity(live.len());
    for p in live {
        let clash = kept.iter().any(|q| {
            let same_cell = q.layer == p.layer && q.c_new == p.c_new;
            let swap = q.layer == p.layer && q.c_new == p.c_near && q.c_near == p.c_new;
            same_cell || swap
        });
        if !clash {
            kept.push(p);
        }
    }
    kept.sort_by_key(|p| p.agent);
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPlan {
    pub paths: Vec<CertifiedPath>,
    pub trees: Vec<Tree>,
    pub table: ReservationTable,
    pub rounds: usize,
    pub iterations: Vec<usize>,
    pub certifier: Vec<CertifierStats>,
}

/// RNG for agent `i` (streams `1..`); stream 0 drives conflict tie-breaks.
fn agent_rng(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64 + 1);
    rng
}

/// Synchronous multi-agent certified RRT.
pub fn plan_multi(
    grid: &GridWorld,
    starts: &[Cell],
    goals: &[Cell],
    agents: &[AgentData<'_>],
    params: &PlannerParams,
) -> Result<MultiPlan, PlanError> {
    params.validate()?;
    if starts.len() != goals.len() || starts.len() != agents.len() {
        return Err(PlanError::Params("starts, goals and agent data differ in length".into()));
    }
    for (s, g) in starts.iter().zip(goals) {
        check_endpoints(grid, *s, *g)?;
    }
    for (i, s) in starts.iter().enumerate() {
        if starts[..i].contains(s) {
            return Err(PlanError::DuplicateStarts);
        }
    }

    let mut searches = starts
        .iter()
        .zip(goals)
        .zip(agents)
        .enumerate()
        .map(|(i, ((s, g), a))| AgentSearch::new(i, grid, *s, *g, *a, params, agent_rng(params.seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut tie_rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut table = ReservationTable::default();
    for (i, s) in starts.iter().enumerate() {
        table.reserve(0, *s, i);
        if searches[i].done() {
            table.park(*s, i, 0);
        }
    }

    let mut rounds = 0;
    while searches.iter().any(|s| !s.done()) {
        if rounds >= params.max_rounds || searches.iter().any(|s| !s.done() && s.iterations >= params.max_iters) {
            return Err(PlanError::Unfinished {
                rounds,
                unfinished: searches.iter().filter(|s| !s.done()).map(|s| s.index).collect(),
            });
        }
        rounds += 1;
        let proposals: Vec<Proposal> = searches
            .par_iter_mut()
            .filter(|s| !s.done())
            .map(|s| s.attempt(grid, params.beta))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        for p in resolve_conflicts(proposals, goals, &table, &mut tie_rng) {
            let agent = p.agent;
            let (layer, from, to) = (p.layer, p.c_near, p.c_new);
            let reserved = table.reserve(layer, to, agent);
            debug_assert!(reserved, "conflict resolution admitted a reserved cell");
            table.record_move(layer, from, to, agent);
            searches[agent].commit(p);
            if to == goals[agent] {
                table.park(to, agent, layer);
            }
        }
    }

    let mut paths = Vec::with_capacity(searches.len());
    for s in &searches {
        let goal = s.tree.find(s.goal).ok_or(PlanError::BrokenTree(0))?;
        paths.push(backtrack(&s.tree, goal, grid)?);
    }
    Ok(MultiPlan {
        paths,
        iterations: searches.iter().map(|s| s.iterations).collect(),
        certifier: searches.iter().map(|s| s.certifier.stats).collect(),
        trees: searches.into_iter().map(|s| s.tree).collect(),
        table,
        rounds,
    })
}
