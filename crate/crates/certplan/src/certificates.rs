//! Contractive ellipsoid certificates: SDP construction, solution,
//! independent verification and output-space projection.

use conic::{ConicProblem, Settings, SolveError, SymAffine};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{excitation_rank, DataRecord};
use crate::serial;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("polytope offsets must be positive, facet {index} has g = {value}")]
    NonPositiveOffset { index: usize, value: f64 },
    #[error("polytope facet {0} has a zero normal")]
    ZeroFacet(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contraction factor must lie in (0, 1), got {0}")]
    Lambda(f64),
    #[error("data record is not persistently exciting")]
    NotExciting,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// `{e : F e ≤ g}` in error coordinates, with `g > 0` so the origin is interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    #[serde(with = "serial::matrix")]
    f: DMatrix<f64>,
    #[serde(with = "serial::vector")]
    g: DVector<f64>,
}

impl Polytope {
    pub fn new(f: DMatrix<f64>, g: DVector<f64>) -> Result<Self, CertificateError> {
        if f.nrows() != g.len() {
            return Err(CertificateError::Dimension(format!(
                "F has {} rows, g has {} entries",
                f.nrows(),
                g.len()
            )));
        }
        if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(CertificateError::NonPositiveOffset { index, value });
        }
        if let Some(r) = (0..f.nrows()).find(|&r| f.row(r).amax() == 0.0) {
            return Err(CertificateError::ZeroFacet(r));
        }
        Ok(Self { f, g })
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn facets(&self) -> usize {
        self.g.len()
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    pub fn contains(&self, e: &DVector<f64>) -> bool {
        (&self.f * e - &self.g).iter().all(|&v| v <= 0.0)
    }
}

/// Index map of the SDP decision vector: upper triangle of `P`, then `S`
/// (row-major), then `G2` (row-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub state_dim: usize,
    pub input_dim: usize,
    pub samples: usize,
}

impl VariableLayout {
    pub fn p_count(&self) -> usize {
        self.state_dim * (self.state_dim + 1) / 2
    }

    pub fn total(&self) -> usize {
        self.p_count() + self.samples * (self.state_dim + self.input_dim)
    }

    pub fn p(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Column-wise upper triangle: entries (0..=j, j) precede column j+1.
        j * (j + 1) / 2 + i
    }

    pub fn s(&self, row: usize, col: usize) -> usize {
        self.p_count() + row * self.state_dim + col
    }

    pub fn g2(&self, row: usize, col: usize) -> usize {
        self.p_count() + self.samples * self.state_dim + row * self.input_dim + col
    }

    pub fn extract_p(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.state_dim;
        DMatrix::from_fn(n, n, |i, j| x[self.p(i, j)])
    }

    pub fn extract_s(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.samples, self.state_dim, |i, j| x[self.s(i, j)])
    }

    pub fn extract_g2(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.samples, self.input_dim, |i, j| x[self.g2(i, j)])
    }
}

#[derive(Debug, Clone)]
pub struct CertificateSdp {
    pub problem: ConicProblem,
    pub layout: VariableLayout,
}

fn check_lambda(lambda: f64) -> Result<(), CertificateError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(CertificateError::Lambda(lambda))
    }
}

/// Poses: maximize `log det P` subject to
/// `[[P, X1 S], [(X1 S)ᵀ, λP]] ⪰ 0`, `[[P, P F_rᵀ], [F_r P, g_r²]] ⪰ 0` per facet,
/// `X0 S = P`, `X0 G2 = 0` and `U0 G2 = I`.
pub fn build_sdp(rec: &DataRecord, poly: &Polytope, lambda: f64) -> Result<CertificateSdp, CertificateError> {
    check_lambda(lambda)?;
    let (n, m, samples) = (rec.state_dim(), rec.input_dim(), rec.samples());
    if poly.dim() != n {
        return Err(CertificateError::Dimension(format!(
            "polytope acts on R^{}, state is R^{n}",
            poly.dim()
        )));
    }
    if !excitation_rank(rec).persistently_exciting {
        return Err(CertificateError::NotExciting);
    }
    let layout = VariableLayout {
        state_dim: n,
        input_dim: m,
        samples,
    };
    let mut problem = ConicProblem::new(layout.total());
    let (x0, x1, u0) = (rec.x0(), rec.x1(), rec.u0());

    let mut objective = SymAffine::zeros(n);
    for j in 0..n {
        for i in 0..=j {
            objective.add_entry(layout.p(i, j), i, j, 1.0);
        }
    }
    problem.maximize_log_det(objective);

    let mut contraction = SymAffine::zeros(2 * n);
    for j in 0..n {
        for i in 0..=j {
            contraction.add_entry(layout.p(i, j), i, j, 1.0);
            contraction.add_entry(layout.p(i, j), n + i, n + j, lambda);
        }
    }
    for i in 0..n {
        for j in 0..n {
            // (X1 S)_{ij} = Σ_k X1[i,k] S[k,j]
            for k in 0..samples {
                contraction.add_entry(layout.s(k, j), i, n + j, x1[(i, k)]);
            }
        }
    }
    problem.add_lmi("contraction", contraction);

    for r in 0..poly.facets() {
        let fr = poly.f().row(r);
        let mut facet = SymAffine::zeros(n + 1);
        for j in 0..n {
            for i in 0..=j {
                facet.add_entry(layout.p(i, j), i, j, 1.0);
            }
        }
        for i in 0..n {
            for k in 0..n {
                facet.add_entry(layout.p(i, k), i, n, fr[k]);
            }
        }
        facet.add_constant_entry(n, n, poly.g()[r] * poly.g()[r]);
        problem.add_lmi(format!("facet {r}"), facet);
    }

    for i in 0..n {
        for j in 0..n {
            let mut row: Vec<(usize, f64)> = (0..samples).map(|k| (layout.s(k, j), x0[(i, k)])).collect();
            row.push((layout.p(i, j), -1.0));
            problem.add_equality(row, 0.0);
        }
    }
    for i in 0..n {
        for j in 0..m {
            problem.add_equality((0..samples).map(|k| (layout.g2(k, j), x0[(i, k)])).collect(), 0.0);
        }
    }
    for i in 0..m {
        for j in 0..m {
            let rhs = if i == j { 1.0 } else { 0.0 };
            problem.add_equality((0..samples).map(|k| (layout.g2(k, j), u0[(i, k)])).collect(), rhs);
        }
    }
    Ok(CertificateSdp { problem, layout })
}

/// A verified λ-contractive ellipsoid `{e : eᵀP⁻¹e ≤ 1}` with its gain, expressed
/// around the steady state `center_state` whose output is `center_output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(with = "serial::matrix")]
    pub p: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    pub s: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    pub k: DMatrix<f64>,
    #[serde(with = "serial::matrix")]
    pub g2: DMatrix<f64>,
    pub lambda: f64,
    #[serde(with = "serial::vector")]
    pub center_state: DVector<f64>,
    #[serde(with = "serial::vector")]
    pub center_output: DVector<f64>,
    pub polytope: Polytope,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateOutcome {
    Certified(Box<Certificate>),
    Infeasible,
    /// The solver failed numerically or returned a point that did not verify.
    SolverError(String),
}

impl CertificateOutcome {
    pub fn certificate(self) -> Option<Certificate> {
        match self {
            Self::Certified(c) => Some(*c),
            _ => None,
        }
    }
}

pub const VERIFY_EPS: f64 = 1e-6;

pub fn solve_certificate(
    rec: &DataRecord,
    poly: &Polytope,
    lambda: f64,
    center_state: &DVector<f64>,
    center_output: &DVector<f64>,
) -> Result<CertificateOutcome, CertificateError> {
    let sdp = build_sdp(rec, poly, lambda)?;
    let sol = match conic::solve(&sdp.problem, &Settings::default()) {
        Ok(sol) => sol,
        Err(SolveError::Infeasible(_)) => return Ok(CertificateOutcome::Infeasible),
        Err(e) => return Ok(CertificateOutcome::SolverError(e.to_string())),
    };
    let p = sdp.layout.extract_p(&sol.x);
    let s = sdp.layout.extract_s(&sol.x);
    let g2 = sdp.layout.extract_g2(&sol.x);
    let Some(chol) = Cholesky::new(p.clone()) else {
        return Ok(CertificateOutcome::SolverError("returned P is not positive definite".into()));
    };
    let k = rec.u0() * &s * chol.inverse();
    let cert = Certificate {
        p,
        s,
        k,
        g2,
        lambda,
        center_state: center_state.clone(),
        center_output: center_output.clone(),
        polytope: poly.clone(),
    };
    let report = verify_certificate(&cert, rec, VERIFY_EPS);
    if !report.pass {
        return Ok(CertificateOutcome::SolverError(format!("solution failed verification: {report:?}")));
    }
    Ok(CertificateOutcome::Certified(Box::new(cert)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Smallest eigenvalue of `λP − SᵀX1ᵀP⁻¹X1S`.
    pub contraction_min_eig: f64,
    /// Threshold the eigenvalue is compared against (`−eps·trace(P)/n`).
    pub contraction_floor: f64,
    /// `max_r F_r P F_rᵀ − g_r²`.
    pub facet_max_excess: f64,
    /// Frobenius norms of `X0 S − P`, `X0 G2` and `U0 G2 − I`.
    pub equality_residuals: [f64; 3],
    pub p_positive_definite: bool,
    pub pass: bool,
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Re-checks the conclusions of the SDP from the stored matrices alone.
pub fn verify_certificate(cert: &Certificate, rec: &DataRecord, eps: f64) -> VerificationReport {
    let n = rec.state_dim();
    let m = rec.input_dim();
    let dims_ok = cert.p.shape() == (n, n)
        && cert.s.shape() == (rec.samples(), n)
        && cert.g2.shape() == (rec.samples(), m)
        && cert.polytope.dim() == n;
    let chol = if dims_ok { Cholesky::new(cert.p.clone()) } else { None };
    let Some(chol) = chol else {
        return VerificationReport {
            contraction_min_eig: f64::NEG_INFINITY,
            contraction_floor: 0.0,
            facet_max_excess: f64::INFINITY,
            equality_residuals: [f64::INFINITY; 3],
            p_positive_definite: false,
            pass: false,
        };
    };
    let x1s = rec.x1() * &cert.s;
    let half = chol.l().solve_lower_triangular(&x1s).expect("triangular factor is invertible");
    let contraction = &cert.p * cert.lambda - half.transpose() * &half;
    let contraction_min_eig = min_eig(&contraction);
    let contraction_floor = -eps * cert.p.trace() / n as f64;

    let facet_max_excess = (0..cert.polytope.facets())
        .map(|r| {
            let fr = cert.polytope.f().row(r);
            (fr * &cert.p * fr.transpose())[(0, 0)] - cert.polytope.g()[r].powi(2)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let equality_residuals = [
        (rec.x0() * &cert.s - &cert.p).norm(),
        (rec.x0() * &cert.g2).norm(),
        (rec.u0() * &cert.g2 - DMatrix::identity(m, m)).norm(),
    ];
    let symmetric = (&cert.p - cert.p.transpose()).amax() <= eps;
    let pass = symmetric
        && contraction_min_eig >= contraction_floor
        && facet_max_excess <= eps
        && equality_residuals.iter().all(|&r| r <= eps);
    VerificationReport {
        contraction_min_eig,
        contraction_floor,
        facet_max_excess,
        equality_residuals,
        p_positive_definite: true,
        pass,
    }
}

/// Largest `(e⁺)ᵀP⁻¹e⁺` over `samples` random boundary points `eᵀP⁻¹e = 1`,
/// propagated with the data-based closed loop `X1·S·P⁻¹`.
pub fn sampled_invariance_check<R: Rng + ?Sized>(
    cert: &Certificate,
    rec: &DataRecord,
    samples: usize,
    rng: &mut R,
) -> Result<f64, CertificateError> {
    let chol = Cholesky::new(cert.p.clone()).ok_or(CertificateError::NotPositiveDefinite)?;
    let closed = rec.x1() * &cert.s * chol.inverse();
    let n = cert.p.nrows();
    let l = chol.l();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm == 0.0 {
            continue;
        }
        let e = &l * (z / norm);
        worst = worst.max(quadratic_form(&chol, &(&closed * e)));
    }
    Ok(worst)
}

/// `vᵀ M⁻¹ v` from a Cholesky factor of `M`.
pub fn quadratic_form(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> f64 {
    let w = chol.l().solve_lower_triangular(v).expect("triangular factor is invertible");
    w.norm_squared()
}

/// Output-space ellipse `{y : (y − c)ᵀ Q (y − c) ≤ 1}` with `Q = C P⁻¹ Cᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEllipsoid {
    /// `Pproj⁻¹`.
    #[serde(with = "serial::matrix")]
    pub precision: DMatrix<f64>,
    #[serde(with = "serial::vector")]
    pub center: DVector<f64>,
}

impl OutputEllipsoid {
    pub fn new(precision: DMatrix<f64>, center: DVector<f64>) -> Result<Self, CertificateError> {
        if precision.shape() != (center.len(), center.len()) {
            return Err(CertificateError::Dimension("precision and center disagree".into()));
        }
        if Cholesky::new(precision.clone()).is_none() {
            return Err(CertificateError::NotPositiveDefinite);
        }
        Ok(Self { precision, center })
    }

    /// `Pproj`, whose eigen-decomposition gives the semi-axes.
    pub fn shape(&self) -> DMatrix<f64> {
        self.precision.clone().try_inverse().expect("precision is positive definite")
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        let d = y - &self.center;
        (d.transpose() * &self.precision * &d)[(0, 0)]
    }

    pub fn contains(&self, y: &DVector<f64>) -> bool {
        self.value(y) <= 1.0
    }
}

pub fn project_ellipsoid(cert: &Certificate, c: &DMatrix<f64>) -> Result<OutputEllipsoid, CertificateError> {
    if c.ncols() != cert.p.nrows() || c.nrows() != cert.center_output.len() {
        return Err(CertificateError::Dimension(format!(
            "C is {}×{}, P is {}×{}",
            c.nrows(),
            c.ncols(),
            cert.p.nrows(),
            cert.p.ncols()
        )));
    }
    let chol = Cholesky::new(cert.p.clone()).ok_or(CertificateError::NotPositiveDefinite)?;
    let precision = c * chol.inverse() * c.transpose();
    OutputEllipsoid::new((&precision + precision.transpose()) * 0.5, cert.center_output.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::collect_trajectory;
    use crate::lti::{cw_inplane_model, discretize_zoh, position_selector, LtiModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cw() -> LtiModel {
        discretize_zoh(&cw_inplane_model(0.11).unwrap(), 30.0).unwrap()
    }

    fn cw_record() -> DataRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        collect_trajectory(&cw(), &DVector::zeros(4), 20, &mut rng, 1.0).unwrap()
    }

    fn position_box(c: &DMatrix<f64>, half: [f64; 4]) -> Polytope {
        let fxy = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        Polytope::new(fxy * c, DVector::from_row_slice(&half)).unwrap()
    }

    /// Horizontal two-cell box in coordinates centred on the box midpoint.
    fn two_cell_box() -> Polytope {
        position_box(&position_selector(4), [10.0, 10.0, 5.0, 5.0])
    }

    fn solved(rec: &DataRecord, poly: &Polytope) -> Certificate {
        solve_certificate(rec, poly, 0.94, &DVector::zeros(4), &DVector::zeros(2))
            .unwrap()
            .certificate()
            .expect("feasible")
    }

    #[test]
    fn polytope_rejects_origin_outside() {
        let f = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(
            Polytope::new(f.clone(), DVector::from_vec(vec![-1.0])),
            Err(CertificateError::NonPositiveOffset { index: 0, value: -1.0 })
        );
        assert_eq!(
            Polytope::new(DMatrix::zeros(1, 2), DVector::from_vec(vec![1.0])),
            Err(CertificateError::ZeroFacet(0))
        );
    }

    #[test]
    fn layout_counts_match_problem_size() {
        let rec = cw_record();
        let sdp = build_sdp(&rec, &two_cell_box(), 0.94).unwrap();
        assert_eq!(sdp.layout.total(), 10 + 80 + 40);
        assert_eq!(sdp.problem.num_vars(), 130);
        assert_eq!(sdp.problem.lmis().len(), 5);
        let mut seen = [false; 130];
        for i in 0..4 {
            for j in i..4 {
                seen[sdp.layout.p(i, j)] = true;
            }
        }
        for k in 0..20 {
            for j in 0..4 {
                seen[sdp.layout.s(k, j)] = true;
            }
            for j in 0..2 {
                seen[sdp.layout.g2(k, j)] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn facet_block_corner_is_offset_squared() {
        let rec = cw_record();
        let poly = Polytope::new(
            DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![5.0]),
        )
        .unwrap();
        let sdp = build_sdp(&rec, &poly, 0.94).unwrap();
        let (_, facet) = &sdp.problem.lmis()[1];
        assert_eq!(facet.size(), 5);
        assert_eq!(facet.constant()[(4, 4)], 25.0);
    }

    #[test]
    fn lambda_outside_unit_interval_is_rejected() {
        let rec = cw_record();
        assert!(matches!(build_sdp(&rec, &two_cell_box(), 1.0), Err(CertificateError::Lambda(_))));
        assert!(matches!(build_sdp(&rec, &two_cell_box(), 0.0), Err(CertificateError::Lambda(_))));
    }

    #[test]
    fn cw_two_cell_box_is_certified() {
        let rec = cw_record();
        let cert = solved(&rec, &two_cell_box());
        let report = verify_certificate(&cert, &rec, VERIFY_EPS);
        assert!(report.pass, "{report:?}");
        // Gain matches the data parameterization: K = U0 S P⁻¹ and X1 S P⁻¹ = A + BK.
        let model = cw();
        let g1 = &cert.s * cert.p.clone().try_inverse().unwrap();
        let closed = model.a() + model.b() * &cert.k;
        assert!((rec.x1() * &g1 - &closed).amax() <= 1e-6 * closed.amax());
        let radius = closed
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(radius <= 0.94f64.sqrt() + 1e-6, "spectral radius {radius}");
    }

    #[test]
    fn double_integrator_box_is_certified() {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        let b = DMatrix::from_row_slice(4, 2, &[0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 1.0]);
        let model = LtiModel::new(a, b, position_selector(4), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rec = collect_trajectory(&model, &DVector::zeros(4), 12, &mut rng, 1.0).unwrap();
        let poly = position_box(model.c(), [15.0; 4]);
        let cert = solved(&rec, &poly);
        assert!(verify_certificate(&cert, &rec, VERIFY_EPS).pass);
    }

    #[test]
    fn tiny_box_never_yields_unverified_certificate() {
        let rec = cw_record();
        let poly = position_box(&position_selector(4), [1e-9; 4]);
        match solve_certificate(&rec, &poly, 0.94, &DVector::zeros(4), &DVector::zeros(2)).unwrap() {
            CertificateOutcome::Certified(cert) => {
                assert!(verify_certificate(&cert, &rec, VERIFY_EPS).pass);
                assert!(cert.p.determinant() < 1e-12);
            }
            CertificateOutcome::SolverError(_) | CertificateOutcome::Infeasible => {}
        }
    }

    #[test]
    fn tampering_breaks_verification() {
        let rec = cw_record();
        let cert = solved(&rec, &two_cell_box());

        let mut inflated = cert.clone();
        inflated.p *= 2.0;
        inflated.s *= 2.0;
        let report = verify_certificate(&inflated, &rec, VERIFY_EPS);
        assert!(report.facet_max_excess > VERIFY_EPS);
        assert!(!report.pass);

        let mut fast = cert.clone();
        fast.lambda = 0.1;
        let report = verify_certificate(&fast, &rec, VERIFY_EPS);
        assert!(report.contraction_min_eig < report.contraction_floor);
        assert!(!report.pass);
    }

    #[test]
    fn boundary_samples_contract() {
        let rec = cw_record();
        let cert = solved(&rec, &two_cell_box());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let worst = sampled_invariance_check(&cert, &rec, 100, &mut rng).unwrap();
        assert!(worst <= 0.94 + 1e-6, "{worst}");
        assert!(worst > 0.0);

        let mut invariant = cert.clone();
        invariant.lambda = 1.0;
        let worst = sampled_invariance_check(&invariant, &rec, 100, &mut rng).unwrap();
        assert!(worst <= 1.0 + 1e-6);
    }

    #[test]
    fn origin_maps_to_origin() {
        let rec = cw_record();
        let cert = solved(&rec, &two_cell_box());
        let chol = Cholesky::new(cert.p.clone()).unwrap();
        let closed = rec.x1() * &cert.s * chol.inverse();
        assert_eq!(quadratic_form(&chol, &(closed * DVector::zeros(4))), 0.0);
    }

    fn cert_with_p(p: DMatrix<f64>) -> Certificate {
        let n = p.nrows();
        Certificate {
            p,
            s: DMatrix::zeros(1, n),
            k: DMatrix::zeros(1, n),
            g2: DMatrix::zeros(1, 1),
            lambda: 0.5,
            center_state: DVector::zeros(n),
            center_output: DVector::from_vec(vec![1.0, 2.0]),
            polytope: Polytope::new(DMatrix::identity(1, n), DVector::from_vec(vec![1.0])).unwrap(),
        }
    }

    #[test]
    fn projection_of_block_diagonal_shape() {
        let mut p = DMatrix::zeros(4, 4);
        p.view_mut((0, 0), (2, 2))
            .copy_from(&DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]));
        p.view_mut((2, 2), (2, 2))
            .copy_from(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]));
        let e = project_ellipsoid(&cert_with_p(p), &position_selector(4)).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]).try_inverse().unwrap();
        approx::assert_abs_diff_eq!(e.precision, expect, epsilon = 1e-14);
        assert_eq!(e.center, DVector::from_vec(vec![1.0, 2.0]));

        let unit = project_ellipsoid(&cert_with_p(DMatrix::identity(4, 4)), &position_selector(4)).unwrap();
        assert_eq!(unit.precision, DMatrix::identity(2, 2));
        assert_eq!(unit.shape(), DMatrix::identity(2, 2));
    }

    #[test]
    fn projection_matches_dense_inverse() {
        let rec = cw_record();
        let cert = solved(&rec, &two_cell_box());
        let e = project_ellipsoid(&cert, &position_selector(4)).unwrap();
        let inv = cert.p.clone().try_inverse().unwrap();
        approx::assert_relative_eq!(e.precision, inv.view((0, 0), (2, 2)).into_owned(), max_relative = 1e-9);
    }

    #[test]
    fn containment_boundary() {
        let e = OutputEllipsoid::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(e.contains(&DVector::zeros(2)));
        assert!(e.contains(&DVector::from_vec(vec![1.0, 0.0])));
        assert!(!e.contains(&DVector::from_vec(vec![1.0001, 0.0])));
        assert_eq!(e.value(&DVector::zeros(2)), 0.0);
    }

    #[test]
    fn log_det_grows_with_box_scale() {
        let rec = cw_record();
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.5, 1.0, 2.0] {
            let poly = position_box(&position_selector(4), [10.0 * alpha, 10.0 * alpha, 5.0 * alpha, 5.0 * alpha]);
            let cert = solved(&rec, &poly);
            let ld = cert.p.determinant().ln();
            assert!(ld >= last - 1e-6, "{ld} < {last}");
            last = ld;
        }
    }

    #[test]
    fn certificates_serialize_losslessly() {
        let rec = cw_record();
        let cert = solved(&rec, &two_cell_box());
        let text = serde_json::to_string(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cert);
    }
}
