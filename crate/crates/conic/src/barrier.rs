use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::problem::ConicProblem;
use crate::SolveError;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Stop once the barrier suboptimality bound `degree / t` drops below this.
    pub gap_tol: f64,
    /// Barrier parameter growth factor between centerings.
    pub mu: f64,
    /// Newton-decrement threshold (`λ²/2`) that ends a centering.
    pub newton_tol: f64,
    pub max_newton_per_center: usize,
    pub max_newton_total: usize,
    /// Relative singular-value cutoff used when eliminating equalities and
    /// discarding directions no block depends on.
    pub rank_tol: f64,
    /// Phase I declares infeasibility only when the certified margin exceeds this.
    pub feas_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            mu: 20.0,
            newton_tol: 1e-11,
            max_newton_per_center: 300,
            max_newton_total: 6000,
            rank_tol: 1e-12,
            feas_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    /// `log det D(x)` at the returned point.
    pub log_det: f64,
    /// Upper bound on the distance to the optimal objective.
    pub gap_bound: f64,
    pub newton_steps: usize,
    /// Number of free directions left after elimination and reduction.
    pub reduced_dim: usize,
}

/// Symmetric block in reduced coordinates: `base + Σ w_k dirs[k]`.
#[derive(Debug, Clone)]
struct Block {
    base: DMatrix<f64>,
    dirs: Vec<DMatrix<f64>>,
}

impl Block {
    fn size(&self) -> usize {
        self.base.nrows()
    }

    fn at(&self, w: &DVector<f64>, shift: f64) -> DMatrix<f64> {
        let mut m = self.base.clone();
        for (k, d) in self.dirs.iter().enumerate() {
            if w[k] != 0.0 {
                m += d * w[k];
            }
        }
        if shift != 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += shift;
            }
        }
        m
    }
}

struct Reduced {
    x0: DVector<f64>,
    basis: DMatrix<f64>,
    lmis: Vec<Block>,
    objective: Block,
}

fn svec_len(s: usize) -> usize {
    s * (s + 1) / 2
}

fn write_svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let mut idx = 0;
    for j in 0..m.ncols() {
        for i in 0..=j {
            out[idx] = if i == j { m[(i, j)] } else { m[(i, j)] * std::f64::consts::SQRT_2 };
            idx += 1;
        }
    }
}

fn read_svec(v: &[f64], s: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(s, s);
    let mut idx = 0;
    for j in 0..s {
        for i in 0..=j {
            if i == j {
                m[(i, j)] = v[idx];
            } else {
                let e = v[idx] / std::f64::consts::SQRT_2;
                m[(i, j)] = e;
                m[(j, i)] = e;
            }
            idx += 1;
        }
    }
    m
}

/// Indices of singular values sorted descending.
fn sorted_desc(sv: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    idx
}

fn eliminate_equalities(
    problem: &ConicProblem,
    settings: &Settings,
) -> Result<(DVector<f64>, DMatrix<f64>), SolveError> {
    let nv = problem.num_vars();
    let eqs = problem.equalities();
    if eqs.is_empty() {
        return Ok((DVector::zeros(nv), DMatrix::identity(nv, nv)));
    }
    // Pad to at least square so the SVD returns a complete right basis.
    let rows = eqs.len().max(nv);
    let mut a = DMatrix::zeros(rows, nv);
    let mut b = DVector::zeros(rows);
    for (r, eq) in eqs.iter().enumerate() {
        for (v, c) in &eq.coeffs {
            a[(r, *v)] += *c;
        }
        b[r] = eq.rhs;
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| SolveError::Numerical("SVD failed".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| SolveError::Numerical("SVD failed".into()))?;
    let order = sorted_desc(&svd.singular_values);
    let smax = svd.singular_values[order[0]];
    let cutoff = settings.rank_tol * smax * rows as f64;
    let mut x0 = DVector::zeros(nv);
    let mut null_cols = Vec::new();
    for &k in &order {
        let s = svd.singular_values[k];
        if s > cutoff && smax > 0.0 {
            let coef = u.column(k).dot(&b) / s;
            x0 += vt.row(k).transpose() * coef;
        } else {
            null_cols.push(vt.row(k).transpose());
        }
    }
    let resid = (&a * &x0 - &b).norm();
    if resid > 1e-9 * (1.0 + b.norm()) {
        return Err(SolveError::InconsistentEqualities(resid));
    }
    let z = if null_cols.is_empty() {
        DMatrix::zeros(nv, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    Ok((x0, z))
}

fn reduce(problem: &ConicProblem, settings: &Settings) -> Result<Reduced, SolveError> {
    let (x0, z) = eliminate_equalities(problem, settings)?;
    let nz = z.ncols();
    let objective = problem.log_det().expect("validated");
    let all: Vec<_> = problem
        .lmis()
        .iter()
        .map(|(_, m)| m)
        .chain(std::iter::once(objective))
        .collect();

    // Block value at x0 and per-null-direction coefficient matrices.
    let mut bases = Vec::with_capacity(all.len());
    let mut dirs: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(all.len());
    for m in &all {
        bases.push(m.eval(&x0));
        let s = m.size();
        let mut d = vec![DMatrix::zeros(s, s); nz];
        for (var, f) in m.terms() {
            for (k, dk) in d.iter_mut().enumerate() {
                let c = z[(var, k)];
                if c != 0.0 {
                    *dk += f * c;
                }
            }
        }
        dirs.push(d);
    }

    let offsets: Vec<usize> = all
        .iter()
        .scan(0, |acc, m| {
            let o = *acc;
            *acc += svec_len(m.size());
            Some(o)
        })
        .collect();
    let total_rows: usize = all.iter().map(|m| svec_len(m.size())).sum();

    let (basis, red_dirs) = if nz == 0 {
        (DMatrix::zeros(problem.num_vars(), 0), vec![Vec::new(); all.len()])
    } else {
        let mut r = DMatrix::zeros(total_rows, nz);
        for (j, m) in all.iter().enumerate() {
            let len = svec_len(m.size());
            let mut buf = vec![0.0; len];
            for k in 0..nz {
                write_svec(&dirs[j][k], &mut buf);
                for (i, v) in buf.iter().enumerate() {
                    r[(offsets[j] + i, k)] = *v;
                }
            }
        }
        let svd = r.svd(true, true);
        let u = svd.u.as_ref().ok_or_else(|| SolveError::Numerical("SVD failed".into()))?;
        let vt = svd.v_t.as_ref().ok_or_else(|| SolveError::Numerical("SVD failed".into()))?;
        let order = sorted_desc(&svd.singular_values);
        let smax = svd.singular_values[order[0]];
        let cutoff = settings.rank_tol * smax * (total_rows.max(nz) as f64).sqrt();
        let keep: Vec<usize> = order
            .into_iter()
            .filter(|&k| smax > 0.0 && svd.singular_values[k] > cutoff)
            .collect();
        // Reduced coordinate k moves the stacked block entries along the unit
        // vector u_k, which keeps the Newton systems well scaled.
        let mut basis = DMatrix::zeros(problem.num_vars(), keep.len());
        for (c, &k) in keep.iter().enumerate() {
            let v = vt.row(k).transpose() / svd.singular_values[k];
            basis.set_column(c, &(&z * v));
        }
        let red_dirs = all
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let len = svec_len(m.size());
                keep.iter()
                    .map(|&k| {
                        let seg: Vec<f64> = (0..len).map(|i| u[(offsets[j] + i, k)]).collect();
                        read_svec(&seg, m.size())
                    })
                    .collect()
            })
            .collect();
        (basis, red_dirs)
    };

    let mut blocks: Vec<Block> = bases
        .into_iter()
        .zip(red_dirs)
        .map(|(base, dirs)| Block { base, dirs })
        .collect();
    let objective = blocks.pop().expect("objective block");
    Ok(Reduced {
        x0,
        basis,
        lmis: blocks,
        objective,
    })
}

/// One `−weight · log det(block(w) + shift·I)` term of a barrier function.
struct Term<'a> {
    block: &'a Block,
    weight: f64,
}

/// Barrier objective over `w`. When `shifted` is set the last coordinate of
/// `w` is the Phase I slack `s`, added to every block's diagonal, and the
/// function also carries the linear term `t·s`.
struct BarrierFn<'a> {
    terms: Vec<Term<'a>>,
    shifted: bool,
    t: f64,
    dim: usize,
    /// Optional `−log(R² − ‖w‖²)` term that keeps Phase I bounded.
    ball: Option<f64>,
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl BarrierFn<'_> {
    fn shift(&self, w: &DVector<f64>) -> f64 {
        if self.shifted {
            w[self.dim - 1]
        } else {
            0.0
        }
    }

    fn value(&self, w: &DVector<f64>) -> Option<f64> {
        let s = self.shift(w);
        let mut v = if self.shifted { self.t * s } else { 0.0 };
        if let Some(r) = self.ball {
            let room = r * r - w.norm_squared();
            if room <= 0.0 {
                return None;
            }
            v -= room.ln();
        }
        for term in &self.terms {
            let chol = Cholesky::new(term.block.at(w, s))?;
            v -= term.weight * log_det_chol(&chol);
        }
        v.is_finite().then_some(v)
    }

    fn eval(&self, w: &DVector<f64>) -> Option<Eval> {
        let n = self.dim;
        let s = self.shift(w);
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        if self.shifted {
            value += self.t * s;
            grad[n - 1] += self.t;
        }
        if let Some(r) = self.ball {
            let room = r * r - w.norm_squared();
            if room <= 0.0 {
                return None;
            }
            value -= room.ln();
            grad += w * (2.0 / room);
            hess += w * w.transpose() * (4.0 / (room * room));
            for i in 0..n {
                hess[(i, i)] += 2.0 / room;
            }
        }
        for term in &self.terms {
            let chol = Cholesky::new(term.block.at(w, s))?;
            value -= term.weight * log_det_chol(&chol);
            let size = term.block.size();
            let mut solved: Vec<DMatrix<f64>> =
                term.block.dirs.iter().map(|d| chol.solve(d)).collect();
            if self.shifted {
                solved.push(chol.inverse());
            }
            for k in 0..n {
                grad[k] -= term.weight * solved[k].trace();
                for l in 0..=k {
                    let mut acc = 0.0;
                    for i in 0..size {
                        for j in 0..size {
                            acc += solved[k][(i, j)] * solved[l][(j, i)];
                        }
                    }
                    hess[(k, l)] += term.weight * acc;
                }
            }
        }
        for k in 0..n {
            for l in 0..k {
                hess[(l, k)] = hess[(k, l)];
            }
        }
        value.is_finite().then_some(Eval { value, grad, hess })
    }
}

fn log_det_chol(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum()
}

fn newton_direction(e: &Eval) -> Option<DVector<f64>> {
    let n = e.grad.len();
    let scale = e.hess.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = e.hess.clone();
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if let Some(ch) = Cholesky::new(h) {
            let d = ch.solve(&(-&e.grad));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

enum CenterOutcome {
    Centered,
    /// The line search could not make progress although the decrement is
    /// still above tolerance; the point is usable but only approximately centered.
    Stalled,
}

fn center(
    f: &BarrierFn<'_>,
    w: &mut DVector<f64>,
    settings: &Settings,
    steps: &mut usize,
    stop_early: impl Fn(&DVector<f64>) -> bool,
) -> Result<CenterOutcome, SolveError> {
    for _ in 0..settings.max_newton_per_center {
        let e = f
            .eval(w)
            .ok_or_else(|| SolveError::Numerical("iterate left the interior".into()))?;
        let dir = newton_direction(&e)
            .ok_or_else(|| SolveError::Numerical("singular Newton system".into()))?;
        let slope = e.grad.dot(&dir);
        if -slope / 2.0 <= settings.newton_tol {
            return Ok(CenterOutcome::Centered);
        }
        *steps += 1;
        if *steps > settings.max_newton_total {
            return Err(SolveError::Numerical("Newton step budget exhausted".into()));
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-16 {
            let cand = &*w + &dir * alpha;
            if let Some(v) = f.value(&cand) {
                if v <= e.value + 0.25 * alpha * slope {
                    *w = cand;
                    accepted = e.value - v > 1e-15 * e.value.abs();
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok(CenterOutcome::Stalled);
        }
        if stop_early(w) {
            return Ok(CenterOutcome::Centered);
        }
        if w.amax() > 1e14 {
            return Err(SolveError::Unbounded);
        }
    }
    Err(SolveError::Numerical("centering did not converge".into()))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn phase_one(red: &Reduced, settings: &Settings, steps: &mut usize) -> Result<DVector<f64>, SolveError> {
    let d = red.objective.dirs.len();
    let blocks: Vec<&Block> = red.lmis.iter().chain(std::iter::once(&red.objective)).collect();
    let zero = DVector::zeros(d);
    if blocks.iter().all(|b| Cholesky::new(b.at(&zero, 0.0)).is_some()) {
        return Ok(zero);
    }
    if d == 0 {
        let worst = blocks.iter().map(|b| min_eigenvalue(&b.base)).fold(f64::INFINITY, f64::min);
        return Err(SolveError::Infeasible(-worst));
    }
    let worst = blocks.iter().map(|b| min_eigenvalue(&b.base)).fold(f64::INFINITY, f64::min);
    let scale = blocks.iter().map(|b| b.base.amax()).fold(0.0, f64::max).max(1.0);
    let s0 = -worst + (0.1 * worst.abs()).max(1e-3 * scale);
    let degree: usize = blocks.iter().map(|b| b.size()).sum();

    let mut w = DVector::zeros(d + 1);
    w[d] = s0;
    let mut t = degree as f64 / s0;
    let radius = 1e8 * scale.max(1.0) + 10.0 * s0;
    let terms = || blocks.iter().map(|b| Term { block: b, weight: 1.0 }).collect();
    loop {
        let f = BarrierFn {
            terms: terms(),
            shifted: true,
            t,
            dim: d + 1,
            ball: Some(radius),
        };
        center(&f, &mut w, settings, steps, |w| w[d] < 0.0)?;
        let s = w[d];
        if s < 0.0 {
            return Ok(w.rows(0, d).into_owned());
        }
        let gap = degree as f64 / t;
        if w.rows(0, d).norm() > 0.99 * radius {
            return Err(SolveError::Numerical("Phase I iterate reached its norm bound".into()));
        }
        // The Phase I optimum is at least `s - gap`.
        if s - gap > settings.feas_tol * scale {
            return Err(SolveError::Infeasible(s - gap));
        }
        if gap < 1e-3 * settings.feas_tol * scale || t > 1e30 {
            return Err(SolveError::Numerical(format!(
                "feasible set is numerically empty (slack {s:.3e})"
            )));
        }
        t *= settings.mu;
    }
}

/// Solves the problem with a two-phase log-barrier method.
pub fn solve(problem: &ConicProblem, settings: &Settings) -> Result<Solution, SolveError> {
    problem.validate()?;
    let red = reduce(problem, settings)?;
    let d = red.objective.dirs.len();
    let mut steps = 0;
    let mut w = phase_one(&red, settings, &mut steps)?;

    let degree = problem.barrier_degree().max(1) as f64;
    let mut t = 1.0;
    loop {
        let mut terms: Vec<Term<'_>> = red.lmis.iter().map(|b| Term { block: b, weight: 1.0 }).collect();
        terms.push(Term {
            block: &red.objective,
            weight: t,
        });
        let f = BarrierFn {
            terms,
            shifted: false,
            t,
            dim: d,
            ball: None,
        };
        center(&f, &mut w, settings, &mut steps, |_| false)?;
        let ld = Cholesky::new(red.objective.at(&w, 0.0))
            .map(|c| log_det_chol(&c))
            .ok_or_else(|| SolveError::Numerical("objective block lost definiteness".into()))?;
        if ld > 1e4 {
            return Err(SolveError::Unbounded);
        }
        let gap = degree / t;
        if gap < settings.gap_tol {
            let x = &red.x0 + &red.basis * &w;
            return Ok(Solution {
                x,
                log_det: ld,
                gap_bound: gap,
                newton_steps: steps,
                reduced_dim: d,
            });
        }
        t *= settings.mu;
    }
}
