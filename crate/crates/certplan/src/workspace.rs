//! Uniform grid over the planar workspace: blocking, cell geometry, snapping,
//! neighbour selection and the box constraints attached to one-cell moves.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{CertificateError, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkspaceError {
    #[error("bounds span {span} is not a positive multiple of cell size {cell}")]
    NotDivisible { span: f64, cell: f64 },
    #[error("cell size must be positive, got {0}")]
    CellSize(f64),
    #[error("obstacle half-width must be positive, got {0}")]
    ObstacleSize(f64),
    #[error("cell ({row}, {col}) is outside the {rows}×{cols} grid")]
    OutOfRange { row: i64, col: i64, rows: usize, cols: usize },
    #[error("grid has no free cells")]
    NoFreeCells,
    #[error("cells ({}, {}) and ({}, {}) are not 4-adjacent", .0.row, .0.col, .1.row, .1.col)]
    NotAdjacent(Cell, Cell),
    #[error("steady-state output lies on or outside the box")]
    CenterOutsideBox,
    #[error(transparent)]
    Polytope(#[from] CertificateError),
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn intersects_closed(&self, other: &Rect) -> bool {
        self.xmin <= other.xmax && other.xmin <= self.xmax && self.ymin <= other.ymax && other.ymin <= self.ymax
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }
}

/// Grid cell; row grows with `y`, column with `x`, `(0, 0)` is lower-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(&self, other: &Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn is_adjacent(&self, other: &Cell) -> bool {
        self.manhattan(other) == 1
    }
}

/// Axis-aligned square debris.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 2], half_width: f64) -> Result<Self, WorkspaceError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(WorkspaceError::ObstacleSize(half_width));
        }
        Ok(Self { center, half_width })
    }

    pub fn rect(&self) -> Rect {
        Rect {
            xmin: self.center[0] - self.half_width,
            xmax: self.center[0] + self.half_width,
            ymin: self.center[1] - self.half_width,
            ymax: self.center[1] + self.half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    bounds: Rect,
    cell: f64,
    rows: usize,
    cols: usize,
    blocked: Vec<bool>,
}

fn cell_count(span: f64, cell: f64) -> Result<usize, WorkspaceError> {
    let ratio = span / cell;
    let count = ratio.round();
    if !(count >= 1.0 && (ratio - count).abs() <= 1e-9 * ratio.max(1.0)) {
        return Err(WorkspaceError::NotDivisible { span, cell });
    }
    Ok(count as usize)
}

/// Blocks every cell whose closed rectangle touches an obstacle square.
pub fn build_grid(bounds: Rect, cell: f64, obstacles: &[Obstacle]) -> Result<GridWorld, WorkspaceError> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(WorkspaceError::CellSize(cell));
    }
    let cols = cell_count(bounds.xmax - bounds.xmin, cell)?;
    let rows = cell_count(bounds.ymax - bounds.ymin, cell)?;
    let mut grid = GridWorld {
        bounds,
        cell,
        rows,
        cols,
        blocked: vec![false; rows * cols],
    };
    for row in 0..rows {
        for col in 0..cols {
            let r = grid.cell_rect(Cell::new(row, col));
            grid.blocked[row * cols + col] = obstacles.iter().any(|o| o.rect().intersects_closed(&r));
        }
    }
    Ok(grid)
}

/// Direction order used to break ties between equally good neighbours.
const NESW: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl GridWorld {
    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn in_grid(&self, c: Cell) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    fn check(&self, c: Cell) -> Result<(), WorkspaceError> {
        if self.in_grid(c) {
            Ok(())
        } else {
            Err(WorkspaceError::OutOfRange {
                row: c.row as i64,
                col: c.col as i64,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_grid(c) || self.blocked[c.row * self.cols + c.col]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_blocked(c)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Cell::new(r, c)))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |c| self.is_free(*c))
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    fn cell_rect(&self, c: Cell) -> Rect {
        let xmin = self.bounds.xmin + c.col as f64 * self.cell;
        let ymin = self.bounds.ymin + c.row as f64 * self.cell;
        Rect {
            xmin,
            xmax: xmin + self.cell,
            ymin,
            ymax: ymin + self.cell,
        }
    }

    pub fn rect(&self, c: Cell) -> Result<Rect, WorkspaceError> {
        self.check(c)?;
        Ok(self.cell_rect(c))
    }

    pub fn center(&self, c: Cell) -> Result<Vector2<f64>, WorkspaceError> {
        Ok(self.rect(c)?.center())
    }

    /// Cell whose closed rectangle contains `p`; points on shared edges go
    /// to the upper/right cell except on the outer boundary.
    pub fn cell_at(&self, p: &Vector2<f64>) -> Option<Cell> {
        if !self.bounds.contains(p) {
            return None;
        }
        let row = ((p.y - self.bounds.ymin) / self.cell) as usize;
        let col = ((p.x - self.bounds.xmin) / self.cell) as usize;
        Some(Cell::new(row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    /// Nearest free cell centre to `q`; ties go to the first cell in row-major order.
    pub fn snap(&self, q: &Vector2<f64>) -> Result<Cell, WorkspaceError> {
        let mut best: Option<(f64, Cell)> = None;
        for c in self.free_cells() {
            let d = (self.cell_rect(c).center() - q).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| c).ok_or(WorkspaceError::NoFreeCells)
    }

    fn offset(&self, c: Cell, (dr, dc): (i64, i64)) -> Option<Cell> {
        let r = c.row as i64 + dr;
        let k = c.col as i64 + dc;
        (r >= 0 && k >= 0 && (r as usize) < self.rows && (k as usize) < self.cols).then(|| Cell::new(r as usize, k as usize))
    }

    /// In-bounds 4-neighbours in N, E, S, W order, blocked ones included.
    pub fn neighbors4(&self, c: Cell) -> Vec<Cell> {
        NESW.iter().filter_map(|d| self.offset(c, *d)).collect()
    }

    /// Free neighbour of `near` closest to `target` in ℓ₁; ties resolved N, E, S, W.
    pub fn best_neighbour(&self, near: Cell, target: Cell) -> Option<Cell> {
        let mut best: Option<(usize, Cell)> = None;
        for c in self.neighbors4(near) {
            if self.is_blocked(c) {
                continue;
            }
            let d = c.manhattan(&target);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        best.map(|(_, c)| c)
    }

    /// Smallest rectangle covering two adjacent cells, as `Fxy·y ≤ gxy`.
    pub fn box_halfspace(&self, a: Cell, b: Cell) -> Result<BoxHalfspace, WorkspaceError> {
        if !a.is_adjacent(&b) {
            return Err(WorkspaceError::NotAdjacent(a, b));
        }
        let (ra, rb) = (self.rect(a)?, self.rect(b)?);
        Ok(BoxHalfspace::from_rect(Rect {
            xmin: ra.xmin.min(rb.xmin),
            xmax: ra.xmax.max(rb.xmax),
            ymin: ra.ymin.min(rb.ymin),
            ymax: ra.ymax.max(rb.ymax),
        }))
    }

    pub fn cell_halfspace(&self, c: Cell) -> Result<BoxHalfspace, WorkspaceError> {
        Ok(BoxHalfspace::from_rect(self.rect(c)?))
    }
}

/// The cell common to the boxes of consecutive moves `a → b → ·`, which is `b`.
pub fn shared_cell(a: Cell, b: Cell) -> Result<Cell, WorkspaceError> {
    if !a.is_adjacent(&b) {
        return Err(WorkspaceError::NotAdjacent(a, b));
    }
    Ok(b)
}

/// Rectangle with rows `[+x, −x, +y, −y]` of `Fxy` and matching offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxHalfspace {
    pub fxy: DMatrix<f64>,
    pub gxy: DVector<f64>,
    pub rect: Rect,
}

impl BoxHalfspace {
    pub fn from_rect(rect: Rect) -> Self {
        #[rustfmt::skip]
        let fxy = DMatrix::from_row_slice(4, 2, &[
            1.0, 0.0,
            -1.0, 0.0,
            0.0, 1.0,
            0.0, -1.0,
        ]);
        let gxy = DVector::from_vec(vec![rect.xmax, -rect.xmin, rect.ymax, -rect.ymin]);
        Self { fxy, gxy, rect }
    }
}

/// Optional extra full-state half-spaces `F_extra·x ≤ g_extra` in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StateConstraints {
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
}

/// Shifts position bounds (and optional state bounds) into error coordinates
/// about `x_bar`: `F = [Fxy·C; F_extra]`, `g = [gxy − Fxy·C·x̄; g_extra − F_extra·x̄]`.
pub fn lift_to_state(
    fxy: &DMatrix<f64>,
    gxy: &DVector<f64>,
    x_bar: &DVector<f64>,
    c: &DMatrix<f64>,
    extra: Option<&StateConstraints>,
) -> Result<Polytope, WorkspaceError> {
    let n = x_bar.len();
    let pos = fxy * c;
    let pos_offset = gxy - fxy * (c * x_bar);
    if pos_offset.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(WorkspaceError::CenterOutsideBox);
    }
    let (f, g) = match extra {
        None => (pos, pos_offset),
        Some(ex) => {
            let q = pos.nrows() + ex.f.nrows();
            let mut f = DMatrix::zeros(q, n);
            f.rows_mut(0, pos.nrows()).copy_from(&pos);
            f.rows_mut(pos.nrows(), ex.f.nrows()).copy_from(&ex.f);
            let mut g = DVector::zeros(q);
            g.rows_mut(0, pos.nrows()).copy_from(&pos_offset);
            g.rows_mut(pos.nrows(), ex.g.len()).copy_from(&(&ex.g - &ex.f * x_bar));
            (f, g)
        }
    };
    Ok(Polytope::new(f, g)?)
}
