//! Discrete-time LTI models, zero-order-hold discretization and the in-plane
//! Clohessy–Wiltshire relative-motion model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::serial;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model contains non-finite entries")]
    NonFinite,
    #[error("sampling period must be positive and finite, got {0}")]
    SamplingPeriod(f64),
    #[error("output matrix must have full row rank")]
    OutputRank,
    #[error("mean motion must be non-negative and finite, got {0}")]
    MeanMotion(f64),
}

/// `ẋ = Ac x + Bc u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    pub ac: DMatrix<f64>,
    pub bc: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl ContinuousModel {
    pub fn new(ac: DMatrix<f64>, bc: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = ac.nrows();
        if ac.ncols() != n || bc.nrows() != n || c.ncols() != n {
            return Err(ModelError::Dimension(format!(
                "Ac {}×{}, Bc {}×{}, C {}×{}",
                ac.nrows(),
                ac.ncols(),
                bc.nrows(),
                bc.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { ac, bc, c })
    }
}

/// Ground-truth sampled system `x⁺ = A x + B u`, `y = C x`.
///
/// Only the simulator and the test oracles read `A` and `B`; planning code
/// works from a [`DataRecord`](crate::data::DataRecord).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtiModel {
    #[serde(with = "serial::matrix")]
    a: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    b: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    c: DMatrix<f64>,
    ts: f64,
}

impl LtiModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, ts: f64) -> Result<Self, ModelError> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(ModelError::Dimension(format!(
                "A {}×{}, B {}×{}, C {}×{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if !(ts.is_finite() && ts > 0.0) {
            return Err(ModelError::SamplingPeriod(ts));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        if c.nrows() > n || c.clone().svd(false, false).rank(1e-12 * c.amax().max(1.0)) != c.nrows() {
            return Err(ModelError::OutputRank);
        }
        Ok(Self { a, b, c, ts })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `A x + B u`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(ModelError::Dimension(format!(
                "step expects x∈R^{}, u∈R^{}; got {} and {}",
                self.state_dim(),
                self.input_dim(),
                x.len(),
                u.len()
            )));
        }
        Ok(&self.a * x + &self.b * u)
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.nrows();
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);

    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=64 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() <= f64::EPSILON * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Exact zero-order-hold discretization through the augmented exponential
/// `exp([[Ac, Bc], [0, 0]]·Ts) = [[A, B], [0, I]]`.
pub fn discretize_zoh(cm: &ContinuousModel, ts: f64) -> Result<LtiModel, ModelError> {
    if !(ts.is_finite() && ts > 0.0) {
        return Err(ModelError::SamplingPeriod(ts));
    }
    if cm.ac.iter().chain(cm.bc.iter()).chain(cm.c.iter()).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let n = cm.ac.nrows();
    let m = cm.bc.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&cm.ac * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(&cm.bc * ts));
    let e = expm(&aug);
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, m)).into_owned();
    LtiModel::new(a, b, cm.c.clone(), ts)
}

/// In-plane Clohessy–Wiltshire model with state `(z₁, z₂, ż₁, ż₂)`, thrust
/// accelerations as inputs and both positions as outputs.
pub fn cw_inplane_model(mean_motion: f64) -> Result<ContinuousModel, ModelError> {
    let r = mean_motion;
    if !(r.is_finite() && r >= 0.0) {
        return Err(ModelError::MeanMotion(r));
    }
    #[rustfmt::skip]
    let ac = DMatrix::from_row_slice(4, 4, &[
        0.0,         0.0, 1.0,      0.0,
        0.0,         0.0, 0.0,      1.0,
        3.0 * r * r, 0.0, 0.0,      2.0 * r,
        0.0,         0.0, -2.0 * r, 0.0,
    ]);
    #[rustfmt::skip]
    let bc = DMatrix::from_row_slice(4, 2, &[
        0.0, 0.0,
        0.0, 0.0,
        1.0, 0.0,
        0.0, 1.0,
    ]);
    ContinuousModel::new(ac, bc, position_selector(4))
}

/// `[I₂, 0]` for an `n`-dimensional state whose first two entries are positions.
pub fn position_selector(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2, n, |i, j| if i == j { 1.0 } else { 0.0 })
}
