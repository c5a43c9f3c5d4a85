//! LQR waypoint-tracking baseline: one infinite-horizon gain from the
//! data-recovered model, run over the certified paths in place of the
//! per-edge gains.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SteadyStateMap;
use crate::executor::{execute_multi_with, violation_stats, AgentRun, ExecError, GainPolicy, MultiTrace, ViolationStats};
use crate::serial;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("weight matrix {0} violates its definiteness requirement")]
    Weights(&'static str),
    #[error("Riccati iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrWeights {
    #[serde(with = "serial::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    pub r: DMatrix<f64>,
}

impl LqrWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, LqrError> {
        if !q.is_square() || !r.is_square() {
            return Err(LqrError::Dimension("weights must be square".into()));
        }
        if !is_symmetric(&q) || min_eig(&q) < -1e-12 * q.norm().max(1.0) {
            return Err(LqrError::Weights("Q"));
        }
        if !is_symmetric(&r) || min_eig(&r) <= 0.0 {
            return Err(LqrError::Weights("R"));
        }
        Ok(Self { q, r })
    }

    /// `Q = diag(1, 1, 0.1, 0.1)`, `R = 10·I₂`.
    pub fn spacecraft() -> Self {
        Self::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 1.0, 0.1, 0.1])),
            DMatrix::identity(2, 2) * 10.0,
        )
        .expect("constant weights are valid")
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub const DARE_TOL: f64 = 1e-10;
pub const DARE_MAX_ITERS: usize = 10_000;

fn riccati_map(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &LqrWeights, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let btp = b.transpose() * p;
    let s = &w.r + &btp * b;
    let gain = s.cholesky()?.solve(&(&btp * a));
    let next = &w.q + a.transpose() * p * a - (a.transpose() * p * b) * gain;
    Some((&next + next.transpose()) * 0.5)
}

/// `‖Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA − P‖_F`.
pub fn riccati_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &LqrWeights, p: &DMatrix<f64>) -> f64 {
    riccati_map(a, b, w, p).map_or(f64::INFINITY, |next| (next - p).norm())
}

/// Stabilizing solution of the discrete algebraic Riccati equation by
/// fixed-point iteration from `P = Q`.
pub fn dare_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &LqrWeights) -> Result<DMatrix<f64>, LqrError> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || w.q.nrows() != n || w.r.nrows() != b.ncols() {
        return Err(LqrError::Dimension(format!(
            "A {}×{}, B {}×{}, Q {}×{}, R {}×{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            w.q.nrows(),
            w.q.ncols(),
            w.r.nrows(),
            w.r.ncols()
        )));
    }
    let mut p = w.q.clone();
    // Max-abs scaling: the Frobenius norm of a diverging iterate overflows first.
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERS {
        let Some(next) = riccati_map(a, b, w, &p).filter(|n| n.iter().all(|v| v.is_finite())) else {
            break;
        };
        residual = (&next - &p).amax();
        p = next;
        if residual <= DARE_TOL * p.amax().max(1.0) {
            return Ok(p);
        }
    }
    Err(LqrError::NoConvergence {
        iterations: DARE_MAX_ITERS,
        residual,
    })
}

/// `K = −(R + BᵀPB)⁻¹BᵀPA`, for use as `u = K·x`.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &LqrWeights) -> Result<DMatrix<f64>, LqrError> {
    let p = dare_solve(a, b, w)?;
    let btp = b.transpose() * &p;
    let s = &w.r + &btp * b;
    let chol = s.cholesky().ok_or(LqrError::Weights("R"))?;
    Ok(-chol.solve(&(btp * a)))
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    #[serde(with = "serial::matrices")]
    pub gains: Vec<DMatrix<f64>>,
    pub execution: MultiTrace,
    pub stats: Vec<ViolationStats>,
}

/// Runs every agent's path with its own data-recovered LQR gain; handoff and
/// membership tests are the certified executor's.
pub fn execute_lqr_baseline(agents: &[AgentRun<'_>], weights: &LqrWeights) -> Result<BaselineRun, LqrError> {
    let gains = agents
        .iter()
        .map(|a| lqr_from_data(a.map, weights))
        .collect::<Result<Vec<_>, _>>()?;
    let execution = execute_multi_with(agents, |i| GainPolicy::Fixed(gains[i].clone()))?;
    let stats = execution
        .traces
        .iter()
        .zip(agents)
        .map(|(t, a)| violation_stats(t, a.path))
        .collect();
    Ok(BaselineRun { gains, execution, stats })
}

/// LQR gain for the `(A, B)` pair recovered from the steady-state map.
pub fn lqr_from_data(map: &SteadyStateMap, weights: &LqrWeights) -> Result<DMatrix<f64>, LqrError> {
    lqr_gain(&map.state_matrix(), &map.input_matrix(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    /// Plain scalar fixed-point iteration of `p = q + a²p − a²b²p²/(r + b²p)`.
    fn scalar_oracle(a: f64, b: f64, q: f64, r: f64) -> (f64, f64) {
        let mut p = q;
        for _ in 0..10_000 {
            p = q + a * a * p - a * a * b * b * p * p / (r + b * b * p);
        }
        (p, -(b * p * a) / (r + b * b * p))
    }

    #[test]
    fn scalar_case_matches_oracle() {
        let (p_ref, k_ref) = scalar_oracle(0.5, 1.0, 1.0, 1.0);
        // Closed form: p² − a²p − 1 = 0.
        assert_relative_eq!(p_ref, (0.25 + 4.0625_f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(p_ref, 1.13278, epsilon = 1e-5);
        assert_relative_eq!(k_ref, -0.26556, epsilon = 1e-5);
        let w = LqrWeights::new(scalar(1.0), scalar(1.0)).unwrap();
        let p = dare_solve(&scalar(0.5), &scalar(1.0), &w).unwrap();
        let k = lqr_gain(&scalar(0.5), &scalar(1.0), &w).unwrap();
        assert_relative_eq!(p[(0, 0)], p_ref, epsilon = 1e-9);
        assert_relative_eq!(k[(0, 0)], k_ref, epsilon = 1e-9);
    }

    #[test]
    fn zero_state_cost_gives_zero_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.0, 0.7]);
        let w = LqrWeights::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let p = dare_solve(&a, &DMatrix::identity(2, 2), &w).unwrap();
        assert_eq!(p.amax(), 0.0);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(
            LqrWeights::new(scalar(1.0), scalar(0.0)),
            Err(LqrError::Weights("R"))
        ));
        assert!(matches!(
            LqrWeights::new(scalar(-1.0), scalar(1.0)),
            Err(LqrError::Weights("Q"))
        ));
    }

    fn cw() -> crate::lti::LtiModel {
        crate::lti::discretize_zoh(&crate::lti::cw_inplane_model(0.11).unwrap(), 30.0).unwrap()
    }

    #[test]
    fn spacecraft_weights_stabilize_the_cw_pair() {
        let m = cw();
        let w = LqrWeights::spacecraft();
        let p = dare_solve(m.a(), m.b(), &w).unwrap();
        assert!(riccati_residual(m.a(), m.b(), &w, &p) <= 1e-8 * p.norm());
        assert!((&p - p.transpose()).amax() <= 1e-9 * p.amax());
        assert!(min_eig(&p) >= 0.0);
        let k = lqr_gain(m.a(), m.b(), &w).unwrap();
        assert_eq!(k.shape(), (2, 4));
        assert!(spectral_radius(&(m.a() + m.b() * &k)) < 1.0);
    }

    /// Scaling `Q` by 1, 10, 100 pushes one pole pair toward the origin
    /// while the other settles near 0.9545, so the spectral radius rises.
    /// Reference values from an independent DARE solver.
    #[test]
    fn state_weight_sweep_matches_reference() {
        let m = cw();
        let base = LqrWeights::spacecraft();
        let expect_radius = [0.928143876540, 0.951114524428, 0.954121013049];
        let expect_fast = [4.69388556e-05, 4.69630980e-06, 4.69655237e-07];
        for ((scale, radius), fast) in [1.0, 10.0, 100.0].iter().zip(expect_radius).zip(expect_fast) {
            let w = LqrWeights::new(&base.q * *scale, base.r.clone()).unwrap();
            let closed = m.a() + m.b() * lqr_gain(m.a(), m.b(), &w).unwrap();
            let mut mags: Vec<f64> = closed.complex_eigenvalues().iter().map(|z| z.norm()).collect();
            mags.sort_by(f64::total_cmp);
            assert_relative_eq!(spectral_radius(&closed), radius, max_relative = 1e-8);
            assert_relative_eq!(mags[0], fast, max_relative = 1e-4);
        }
    }

    #[test]
    fn data_recovered_pair_gives_the_model_gain() {
        use rand::SeedableRng;
        let m = cw();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rec = crate::data::collect_trajectory(&m, &nalgebra::DVector::zeros(4), 20, &mut rng, 1.0).unwrap();
        let map = crate::data::steady_state_map(&rec).unwrap();
        let w = LqrWeights::spacecraft();
        let from_data = lqr_from_data(&map, &w).unwrap();
        let from_model = lqr_gain(m.a(), m.b(), &w).unwrap();
        assert_relative_eq!(from_data, from_model, epsilon = 1e-6);
    }

    #[test]
    fn unstabilizable_pair_does_not_converge() {
        let w = LqrWeights::new(scalar(1.0), scalar(1.0)).unwrap();
        assert!(matches!(
            dare_solve(&scalar(2.0), &scalar(0.0), &w),
            Err(LqrError::NoConvergence { .. })
        ));
    }
}
