use nalgebra::{DMatrix, DVector};

use crate::SolveError;

/// Symmetric matrix affine in the decision vector: `F0 + Σ x_i F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymAffine {
    size: usize,
    constant: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

impl SymAffine {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            constant: DMatrix::zeros(size, size),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn constant(&self) -> &DMatrix<f64> {
        &self.constant
    }

    /// Adds `value` to the constant at `(i, j)` and its mirror.
    pub fn add_constant_entry(&mut self, i: usize, j: usize, value: f64) {
        self.constant[(i, j)] += value;
        if i != j {
            self.constant[(j, i)] += value;
        }
    }

    /// Adds `coeff · x_var` at `(i, j)` and its mirror.
    pub fn add_entry(&mut self, var: usize, i: usize, j: usize, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let size = self.size;
        let slot = match self.terms.iter().position(|(v, _)| *v == var) {
            Some(p) => p,
            None => {
                self.terms.push((var, DMatrix::zeros(size, size)));
                self.terms.len() - 1
            }
        };
        let m = &mut self.terms[slot].1;
        m[(i, j)] += coeff;
        if i != j {
            m[(j, i)] += coeff;
        }
    }

    /// Coefficient matrix of `x_var` (zero when the variable does not appear).
    pub fn coefficient(&self, var: usize) -> DMatrix<f64> {
        self.terms
            .iter()
            .find(|(v, _)| *v == var)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| DMatrix::zeros(self.size, self.size))
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &DMatrix<f64>)> {
        self.terms.iter().map(|(v, m)| (*v, m))
    }

    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (v, m) in &self.terms {
            out += m * x[*v];
        }
        out
    }
}

/// Sparse row `Σ coeffs[k].1 · x_{coeffs[k].0} = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    num_vars: usize,
    equalities: Vec<LinearEquality>,
    lmis: Vec<(String, SymAffine)>,
    log_det: Option<SymAffine>,
}

impl ConicProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            equalities: Vec::new(),
            lmis: Vec::new(),
            log_det: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearEquality { coeffs, rhs });
    }

    pub fn add_lmi(&mut self, label: impl Into<String>, m: SymAffine) {
        self.lmis.push((label.into(), m));
    }

    pub fn maximize_log_det(&mut self, d: SymAffine) {
        self.log_det = Some(d);
    }

    pub fn equalities(&self) -> &[LinearEquality] {
        &self.equalities
    }

    pub fn lmis(&self) -> &[(String, SymAffine)] {
        &self.lmis
    }

    pub fn log_det(&self) -> Option<&SymAffine> {
        self.log_det.as_ref()
    }

    /// Total barrier degree: the summed sizes of all LMI blocks.
    pub fn barrier_degree(&self) -> usize {
        self.lmis.iter().map(|(_, m)| m.size()).sum()
    }

    pub(crate) fn validate(&self) -> Result<(), SolveError> {
        let check_var = |v: usize| {
            if v >= self.num_vars {
                Err(SolveError::Malformed(format!(
                    "variable index {v} out of range ({} variables)",
                    self.num_vars
                )))
            } else {
                Ok(())
            }
        };
        for eq in &self.equalities {
            for (v, c) in &eq.coeffs {
                check_var(*v)?;
                if !c.is_finite() {
                    return Err(SolveError::Malformed("non-finite equality coefficient".into()));
                }
            }
            if !eq.rhs.is_finite() {
                return Err(SolveError::Malformed("non-finite equality right-hand side".into()));
            }
        }
        let blocks = self
            .lmis
            .iter()
            .map(|(l, m)| (l.as_str(), m))
            .chain(self.log_det.iter().map(|m| ("log-det", m)));
        for (label, m) in blocks {
            if m.size == 0 {
                return Err(SolveError::Malformed(format!("block `{label}` is empty")));
            }
            let all = std::iter::once(&m.constant).chain(m.terms.iter().map(|(_, t)| t));
            for mat in all {
                if mat.iter().any(|v| !v.is_finite()) {
                    return Err(SolveError::Malformed(format!("block `{label}` has non-finite data")));
                }
                if (mat - mat.transpose()).amax() > 1e-12 * (1.0 + mat.amax()) {
                    return Err(SolveError::Malformed(format!("block `{label}` is not symmetric")));
                }
            }
            for (v, _) in &m.terms {
                check_var(*v)?;
            }
        }
        if self.log_det.is_none() {
            return Err(SolveError::Malformed("no log-det objective registered".into()));
        }
        Ok(())
    }
}
