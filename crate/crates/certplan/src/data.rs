//! Input–state data records, persistency of excitation, the data-based
//! closed-loop factorization and the steady-state map.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::LtiModel;
use crate::serial;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("need at least {needed} samples (m+n), got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("data not persistently exciting: rank {rank} < {needed}")]
    NotExciting { rank: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("steady-state map is singular (condition number {0:.3e})")]
    SingularSteadyState(f64),
    #[error("steady-state map must be square: {rows}×{cols} (outputs must match inputs)")]
    NonSquareSteadyState { rows: usize, cols: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    Csv { path: String, message: String },
}

/// The matrices `U0` (m×N), `X0` (n×N), `X1` (n×N) and `Y0` (p×N) of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    #[serde(with = "serial::matrix")]
    u0: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    x0: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    x1: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    y0: DMatrix<f64>,
}

impl DataRecord {
    pub fn new(u0: DMatrix<f64>, x0: DMatrix<f64>, x1: DMatrix<f64>, y0: DMatrix<f64>) -> Result<Self, DataError> {
        let samples = u0.ncols();
        if x0.ncols() != samples || x1.ncols() != samples || y0.ncols() != samples {
            return Err(DataError::Dimension(format!(
                "column counts differ: U0 {}, X0 {}, X1 {}, Y0 {}",
                samples,
                x0.ncols(),
                x1.ncols(),
                y0.ncols()
            )));
        }
        if x1.nrows() != x0.nrows() {
            return Err(DataError::Dimension(format!(
                "X0 has {} rows but X1 has {}",
                x0.nrows(),
                x1.nrows()
            )));
        }
        Ok(Self { u0, x0, x1, y0 })
    }

    pub fn u0(&self) -> &DMatrix<f64> {
        &self.u0
    }

    pub fn x0(&self) -> &DMatrix<f64> {
        &self.x0
    }

    pub fn x1(&self) -> &DMatrix<f64> {
        &self.x1
    }

    pub fn y0(&self) -> &DMatrix<f64> {
        &self.y0
    }

    pub fn state_dim(&self) -> usize {
        self.x0.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u0.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.y0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.u0.ncols()
    }

    /// `[U0; X0]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (m, n, cols) = (self.input_dim(), self.state_dim(), self.samples());
        let mut w = DMatrix::zeros(m + n, cols);
        w.rows_mut(0, m).copy_from(&self.u0);
        w.rows_mut(m, n).copy_from(&self.x0);
        w
    }

    /// Writes `U0.csv`, `X0.csv`, `X1.csv` and `Y0.csv` into `dir`.
    pub fn save_csv(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir).map_err(|source| DataError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for (name, m) in self.named() {
            let path = dir.join(format!("{name}.csv"));
            write_matrix_csv(&path, m)?;
        }
        Ok(())
    }

    pub fn load_csv(dir: &Path) -> Result<Self, DataError> {
        let read = |name: &str| read_matrix_csv(&dir.join(format!("{name}.csv")));
        Self::new(read("U0")?, read("X0")?, read("X1")?, read("Y0")?)
    }

    fn named(&self) -> [(&'static str, &DMatrix<f64>); 4] {
        [("U0", &self.u0), ("X0", &self.x0), ("X1", &self.x1), ("Y0", &self.y0)]
    }
}

fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<(), DataError> {
    let csv_err = |e: csv::Error| DataError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, DataError> {
    let csv_err = |message: String| DataError::Csv {
        path: path.display().to_string(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| csv_err(format!("`{f}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    serial::matrix::from_rows(&rows).map_err(csv_err)
}

/// Excites `model` from `x0` with i.i.d. inputs uniform in `[−amplitude, amplitude]`.
pub fn collect_trajectory<R: Rng + ?Sized>(
    model: &LtiModel,
    x0: &DVector<f64>,
    samples: usize,
    rng: &mut R,
    amplitude: f64,
) -> Result<DataRecord, DataError> {
    let (n, m) = (model.state_dim(), model.input_dim());
    if samples < n + m {
        return Err(DataError::InsufficientData {
            needed: n + m,
            got: samples,
        });
    }
    if x0.len() != n {
        return Err(DataError::Dimension(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    let mut u0 = DMatrix::zeros(m, samples);
    let mut xs = DMatrix::zeros(n, samples + 1);
    xs.set_column(0, x0);
    for k in 0..samples {
        let u = DVector::from_fn(m, |_, _| {
            if amplitude > 0.0 {
                rng.gen_range(-amplitude..=amplitude)
            } else {
                0.0
            }
        });
        let next = model
            .step(&xs.column(k).into_owned(), &u)
            .map_err(|e| DataError::Dimension(e.to_string()))?;
        u0.set_column(k, &u);
        xs.set_column(k + 1, &next);
    }
    let x0m = xs.columns(0, samples).into_owned();
    let x1m = xs.columns(1, samples).into_owned();
    let y0 = model.c() * &x0m;
    DataRecord::new(u0, x0m, x1m, y0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Excitation {
    pub rank: usize,
    pub persistently_exciting: bool,
}

/// Numerical rank of `[U0; X0]` with cutoff `max(m+n, N)·σ_max·1e−12`.
pub fn excitation_rank(rec: &DataRecord) -> Excitation {
    let w = rec.stacked();
    let needed = w.nrows();
    let sv = w.clone().svd(false, false).singular_values;
    let smax = sv.amax();
    let cutoff = needed.max(rec.samples()) as f64 * smax * 1e-12;
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > cutoff).count()
    };
    Excitation {
        rank,
        persistently_exciting: rank == needed,
    }
}

/// Minimum-norm right inverse `G` of `[U0; X0]` with `[U0; X0]·G = [[K, I], [I, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RightInverse {
    g: DMatrix<f64>,
    state_dim: usize,
}

impl RightInverse {
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// First `n` columns (state part).
    pub fn g1(&self) -> DMatrix<f64> {
        self.g.columns(0, self.state_dim).into_owned()
    }

    /// Last `m` columns (input part).
    pub fn g2(&self) -> DMatrix<f64> {
        self.g.columns(self.state_dim, self.g.ncols() - self.state_dim).into_owned()
    }
}

fn require_pe(rec: &DataRecord) -> Result<(), DataError> {
    let ex = excitation_rank(rec);
    if !ex.persistently_exciting {
        return Err(DataError::NotExciting {
            rank: ex.rank,
            needed: rec.state_dim() + rec.input_dim(),
        });
    }
    Ok(())
}

pub fn right_inverse_g(rec: &DataRecord, k: &DMatrix<f64>) -> Result<RightInverse, DataError> {
    let (n, m) = (rec.state_dim(), rec.input_dim());
    if k.shape() != (m, n) {
        return Err(DataError::Dimension(format!(
            "gain is {}×{}, expected {m}×{n}",
            k.nrows(),
            k.ncols()
        )));
    }
    require_pe(rec)?;
    let w = rec.stacked();
    let mut target = DMatrix::zeros(m + n, n + m);
    target.view_mut((0, 0), (m, n)).copy_from(k);
    target.view_mut((0, n), (m, m)).fill_with_identity();
    target.view_mut((m, 0), (n, n)).fill_with_identity();
    let pinv = w
        .clone()
        .pseudo_inverse(0.0)
        .map_err(|e| DataError::Dimension(e.to_string()))?;
    let mut g = &pinv * &target;
    // One step of iterative refinement: the data span several orders of magnitude.
    let resid = &target - &w * &g;
    g += &pinv * resid;
    Ok(RightInverse { g, state_dim: n })
}

/// The data-built matrix `[[X1(I−G2·U0)G1 − I, X1·G2], [Y0·G1, 0]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateMap {
    #[serde(with = "serial::matrix")]
    t_hat: DMatrix<f64>,
    state_dim: usize,
}

impl SteadyStateMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t_hat
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.t_hat.ncols() - self.state_dim
    }

    /// Data realization of the output matrix, `Y0·G1`.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        let n = self.state_dim;
        self.t_hat
            .view((n, 0), (self.t_hat.nrows() - n, n))
            .into_owned()
    }

    /// Data realization of `A`, recovered from the top-left block.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let n = self.state_dim;
        self.t_hat.view((0, 0), (n, n)) + DMatrix::identity(n, n)
    }

    /// Data realization of `B`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let n = self.state_dim;
        self.t_hat.view((0, n), (n, self.input_dim())).into_owned()
    }
}

const MAX_STEADY_CONDITION: f64 = 1e12;

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv.amax() / smin
    }
}

pub fn steady_state_map(rec: &DataRecord) -> Result<SteadyStateMap, DataError> {
    let (n, m, p) = (rec.state_dim(), rec.input_dim(), rec.output_dim());
    if n + p != n + m {
        return Err(DataError::NonSquareSteadyState { rows: n + p, cols: n + m });
    }
    let ri = right_inverse_g(rec, &DMatrix::zeros(m, n))?;
    let (g1, g2) = (ri.g1(), ri.g2());
    let eye_n = DMatrix::<f64>::identity(rec.samples(), rec.samples());
    let a_data = rec.x1() * (eye_n - &g2 * rec.u0()) * &g1;
    let mut t_hat = DMatrix::zeros(n + p, n + m);
    t_hat
        .view_mut((0, 0), (n, n))
        .copy_from(&(a_data - DMatrix::identity(n, n)));
    t_hat.view_mut((0, n), (n, m)).copy_from(&(rec.x1() * &g2));
    t_hat.view_mut((n, 0), (p, n)).copy_from(&(rec.y0() * &g1));
    let cond = condition_number(&t_hat);
    if cond.is_nan() || cond >= MAX_STEADY_CONDITION {
        return Err(DataError::SingularSteadyState(cond));
    }
    Ok(SteadyStateMap { t_hat, state_dim: n })
}

/// Equilibrium `(x̄, ū)` holding the output at `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStatePair {
    #[serde(with = "serial::vector")]
    pub x_bar: DVector<f64>,
    #[serde(with = "serial::vector")]
    pub u_bar: DVector<f64>,
    #[serde(with = "serial::vector")]
    pub r: DVector<f64>,
}

pub fn steady_state(map: &SteadyStateMap, r: &DVector<f64>) -> Result<SteadyStatePair, DataError> {
    let n = map.state_dim();
    let t = map.matrix();
    let p = t.nrows() - n;
    if r.len() != p {
        return Err(DataError::Dimension(format!("reference has {} entries, expected {p}", r.len())));
    }
    let mut rhs = DVector::zeros(t.nrows());
    rhs.rows_mut(n, p).copy_from(r);
    let sol = t
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(DataError::SingularSteadyState(f64::INFINITY))?;
    Ok(SteadyStatePair {
        x_bar: sol.rows(0, n).into_owned(),
        u_bar: sol.rows(n, t.ncols() - n).into_owned(),
        r: r.clone(),
    })
}
