//! Linear solvers for the assembled symmetric system.
//!
//! Strongly graded meshes make the system so ill-conditioned that a small CG
//! residual no longer means a small error, so `Auto` prefers a sparse direct
//! Cholesky factorization and only uses Jacobi-preconditioned CG for systems
//! above [`DIRECT_LIMIT`] unknowns.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(
        "matrix is not positive definite (curvature {curvature:e} at iteration {iteration}); \
         the penalty parameter is probably too small"
    )]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("CG did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },
    #[error("Cholesky factorization failed{}; matrix is not positive definite, \
         the penalty parameter is probably too small", pivot.map(|p| format!(" at pivot {p}")).unwrap_or_default())]
    FactorizationFailed { pivot: Option<usize> },
    #[error("system of size {n} is too large for the {method} solver")]
    TooLarge { n: usize, method: SolverKind },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("dimension mismatch: matrix {matrix}, rhs {rhs}")]
    Dimension { matrix: usize, rhs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse Cholesky up to [`DIRECT_LIMIT`] unknowns, CG above.
    #[default]
    Auto,
    Cg,
    DenseCholesky,
    SparseCholesky,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Auto => "auto",
            SolverKind::Cg => "cg",
            SolverKind::DenseCholesky => "dense-cholesky",
            SolverKind::SparseCholesky => "sparse-cholesky",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(SolverKind::Auto),
            "cg" => Ok(SolverKind::Cg),
            "dense-cholesky" | "dense" => Ok(SolverKind::DenseCholesky),
            "sparse-cholesky" | "sparse" => Ok(SolverKind::SparseCholesky),
            _ => Err(format!("unknown solver `{s}` (auto, cg, dense-cholesky, sparse-cholesky)")),
        }
    }
}

/// Largest system solved by the dense factorization.
pub const DENSE_LIMIT: usize = 2000;

/// Largest system `Auto` hands to the sparse factorization.
pub const DIRECT_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual `|Ax - b| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Unknowns above which the sparse factorization refuses to run.
    pub direct_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { kind: SolverKind::Auto, tol: 1e-10, max_iter: 20_000, direct_limit: DIRECT_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: SolverKind,
    pub iterations: usize,
    pub residual: f64,
    pub wall_time: Duration,
    /// `Auto` skipped the direct factorization and ran CG instead.
    pub fell_back: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| q - p).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Solves `a x = b`.
pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport), SolverError> {
    if a.dim() != b.len() {
        return Err(SolverError::Dimension { matrix: a.dim(), rhs: b.len() });
    }
    if b.iter().chain(a.values()).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite);
    }
    let start = Instant::now();
    let finish = |x: Vec<f64>, method, iterations, fell_back| {
        let residual = relative_residual(a, &x, b);
        (x, SolveReport { method, iterations, residual, wall_time: start.elapsed(), fell_back })
    };
    match opts.kind {
        SolverKind::Cg => {
            let (x, it) = conjugate_gradient(a, b, opts.tol, opts.max_iter)?;
            Ok(finish(x, SolverKind::Cg, it, false))
        }
        SolverKind::DenseCholesky => Ok(finish(dense_cholesky(a, b)?, SolverKind::DenseCholesky, 0, false)),
        SolverKind::SparseCholesky => {
            let (x, steps) = direct_refined(a, b, opts.tol, opts.direct_limit)?;
            Ok(finish(x, SolverKind::SparseCholesky, steps, false))
        }
        SolverKind::Auto => match direct_refined(a, b, opts.tol, opts.direct_limit) {
            Ok((x, steps)) => Ok(finish(x, SolverKind::SparseCholesky, steps, false)),
            Err(SolverError::TooLarge { .. }) => {
                let (x, it) = conjugate_gradient(a, b, opts.tol, opts.max_iter)?;
                Ok(finish(x, SolverKind::Cg, it, true))
            }
            Err(e) => Err(e),
        },
    }
}

/// Jacobi-preconditioned CG. Returns the iterate and the iteration count.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), SolverError> {
    let n = a.dim();
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let diag = a.diagonal();
    if let Some(&d) = diag.iter().find(|&&d| !(d > 0.0)) {
        return Err(SolverError::Indefinite { iteration: 0, curvature: d });
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::Indefinite { iteration: it, curvature: pap / dot(&p, &p) });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm2(&r) / nb;
        history.push(res);
        if res <= tol {
            // guard against drift of the recursive residual
            let true_res = relative_residual(a, &x, b);
            if true_res <= tol {
                return Ok((x, it));
            }
            let ax = a.mul_vec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = relative_residual(a, &x, b);
    Err(SolverError::NotConverged { iterations: max_iter, residual, history })
}

/// Dense Cholesky through nalgebra; limited to [`DENSE_LIMIT`] unknowns.
pub fn dense_cholesky(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    if a.dim() > DENSE_LIMIT {
        return Err(SolverError::TooLarge { n: a.dim(), method: SolverKind::DenseCholesky });
    }
    let chol = nalgebra::Cholesky::new(a.to_dense()).ok_or(SolverError::FactorizationFailed { pivot: None })?;
    Ok(chol.solve(&nalgebra::DVector::from_column_slice(b)).as_slice().to_vec())
}

/// Sparse Cholesky factor with a fill-reducing ordering, computed by `faer`.
pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseCholesky").finish_non_exhaustive()
    }
}

impl SparseCholesky {
    /// Factors `a`; only its lower triangle is read.
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolverError> {
        use faer::sparse::linalg::LltError;
        use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};

        let n = a.dim();
        let symbolic = SymbolicSparseRowMat::new_checked(n, n, a.row_ptr().to_vec(), None, a.col_indices().to_vec());
        let m = SparseRowMat::new(symbolic, a.values().to_vec());
        let llt = m.sp_cholesky(faer::Side::Lower).map_err(|e| match e {
            LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
                SolverError::FactorizationFailed { pivot: Some(index) }
            }
            LltError::Generic(_) => SolverError::TooLarge { n, method: SolverKind::SparseCholesky },
        })?;
        Ok(Self { llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = self.llt.solve(&rhs);
        x.iter().copied().collect()
    }
}

/// Sparse Cholesky followed by a few steps of iterative refinement.
fn direct_refined(a: &CsrMatrix, b: &[f64], tol: f64, limit: usize) -> Result<(Vec<f64>, usize), SolverError> {
    if a.dim() > limit {
        return Err(SolverError::TooLarge { n: a.dim(), method: SolverKind::SparseCholesky });
    }
    let f = SparseCholesky::factor(a)?;
    let mut x = f.solve(b);
    let mut steps = 0;
    for _ in 0..3 {
        if relative_residual(a, &x, b) <= tol {
            break;
        }
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = f.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        steps += 1;
    }
    Ok((x, steps))
}
