//! Small dense conic solver for problems of the form
//!
//! ```text
//! maximize    log det D(x)
//! subject to  M_j(x) ⪰ 0          for every registered LMI
//!             a_iᵀ x = b_i        for every linear equality
//! ```
//!
//! where `D` and every `M_j` are symmetric matrices affine in `x`. The solver
//! eliminates the equalities, drops directions that no matrix depends on and
//! then runs a two-phase log-barrier method with damped Newton steps.
//!
//! Problems are tiny (tens of effective variables, blocks of size ≤ 10), so
//! everything is dense.

mod barrier;
mod problem;

pub use barrier::{solve, Settings, Solution};
pub use problem::{ConicProblem, LinearEquality, SymAffine};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("linear equalities are inconsistent (residual {0:.3e})")]
    InconsistentEqualities(f64),
    #[error("no strictly feasible point (best infeasibility margin {0:.3e})")]
    Infeasible(f64),
    #[error("objective is unbounded on the feasible set")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(String),
}
