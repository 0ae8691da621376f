//! Broken energy-norm errors and convergence studies.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::assembly::{
    assemble, face_rules, tensor_points, AssemblyError, LocalBasis, MultiPatchProblem, PenaltyScale,
};
use crate::problems::{BenchmarkCase, Discretization, ExactSolution, ProblemError};
use crate::quadrature::gauss_legendre;
use crate::solver::{solve, SolveReport, SolverError, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("level {level}: {source}")]
    Solver {
        level: usize,
        #[source]
        source: SolverError,
    },
    #[error("invalid study: {0}")]
    Invalid(String),
}

/// Squared error contributions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorParts {
    /// `sum alpha |grad (u - u_h)|^2` over the patches.
    pub volume: f64,
    /// Penalty terms on interior faces (both one-sided terms).
    pub interface: f64,
    pub boundary: f64,
}

impl ErrorParts {
    pub fn total(&self) -> f64 {
        (self.volume + self.interface + self.boundary).sqrt()
    }
}

/// dG-norm error of `coeffs` against `exact`, with one more Gauss point per
/// direction than the assembly.
///
/// `norm_scale` fixes the mesh size in the jump terms of the norm; with
/// [`PenaltyScale::PatchMax`] it is the largest element diameter of each patch.
pub fn dg_error(
    problem: &MultiPatchProblem,
    coeffs: &[f64],
    exact: &ExactSolution,
    norm_scale: PenaltyScale,
) -> Result<ErrorParts, AssemblyError> {
    let dofs = problem.dof_map();
    let mut parts = ErrorParts::default();
    let mut lb = LocalBasis::default();
    for (pi, p) in problem.patches().iter().enumerate() {
        let d = p.space.dim();
        let (gx, gw) = gauss_legendre(problem.points_per_dir(pi) + 1);
        let off = dofs.offset(pi);
        for e in p.space.elements() {
            let bx = p.space.element_box(&e);
            for (xh, w) in tensor_points(&bx, d, &gx, &gw) {
                problem.local_basis(pi, e, &xh, off, &mut lb)?;
                let (_, gh) = lb.combine(coeffs);
                let g = exact.gradient(&lb.x);
                let err2: f64 = (0..d).map(|m| (g[m] - gh[m]).powi(2)).sum();
                parts.volume += w * lb.det.abs() * p.alpha * err2;
            }
        }
    }
    let (iface, bnd) = face_rules(problem, 1)?;
    let mut lb2 = LocalBasis::default();
    for (it, qs) in problem.interfaces().iter().zip(&iface) {
        for q in qs {
            problem.local_basis(it.patch_a, q.a.element, &q.a.param, dofs.offset(it.patch_a), &mut lb)?;
            problem.local_basis(it.patch_b, q.b.element, &q.b.param, dofs.offset(it.patch_b), &mut lb2)?;
            let jump = lb.combine(coeffs).0 - lb2.combine(coeffs).0;
            parts.interface += q.weight * 2.0 * problem.interface_weight_with(norm_scale, it, q) * jump * jump;
        }
    }
    for (bf, qs) in problem.boundary_faces().iter().zip(&bnd) {
        for q in qs {
            problem.local_basis(bf.patch, q.trace.element, &q.trace.param, dofs.offset(bf.patch), &mut lb)?;
            let e = exact.value(&q.x) - lb.combine(coeffs).0;
            parts.boundary += q.weight * problem.boundary_weight_with(norm_scale, bf.patch, q) * e * e;
        }
    }
    Ok(parts)
}

/// One refinement level of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub n_elems: usize,
    pub dofs: usize,
    /// Size `1 / n` of the equivalent uniform parametric mesh.
    pub h: f64,
    /// Largest physical element diameter.
    pub max_diameter: f64,
    pub error: f64,
    pub parts: ErrorParts,
    /// `log2(e_{s-1} / e_s)`.
    pub rate: Option<f64>,
    pub solve: SolveReport,
    pub assembly_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case: String,
    pub degree: usize,
    pub mu: f64,
    pub penalty: f64,
    pub levels: Vec<LevelResult>,
}

impl ConvergenceReport {
    pub fn last_rate(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.rate)
    }

    pub fn rates(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.rate).collect()
    }

    pub const CSV_HEADER: &'static str = "case,k,mu,s,dofs,h,dg_error,rate";

    /// Rows in the CSV layout, without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for l in &self.levels {
            let rate = l.rate.map(|r| format!("{r:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6e},{:.10e},{}",
                self.case, self.degree, self.mu, l.level, l.dofs, l.h, l.error, rate
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", Self::CSV_HEADER, self.csv_rows())
    }

    /// Whitespace-separated `h dofs error` columns for log-log plots.
    pub fn plot_data(&self) -> String {
        let mut out = format!("# {} k={} mu={}\n# h dofs dg_error\n", self.case, self.degree, self.mu);
        for l in &self.levels {
            let _ = writeln!(out, "{:.6e} {} {:.10e}", l.h, l.dofs, l.error);
        }
        out
    }
}

/// Settings of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub degree: usize,
    pub mu: f64,
    /// Levels `0..=max_level`, with `n0 2^s` elements per direction.
    pub max_level: usize,
    pub n0: usize,
    pub penalty: Option<f64>,
    pub penalty_scale: PenaltyScale,
    /// Mesh size used in the jump terms of the error norm.
    pub norm_scale: PenaltyScale,
    pub solver: SolverOptions,
}

impl StudyOptions {
    pub fn new(degree: usize, mu: f64, max_level: usize) -> Self {
        Self {
            degree,
            mu,
            max_level,
            n0: 2,
            penalty: None,
            penalty_scale: PenaltyScale::default(),
            norm_scale: PenaltyScale::PatchMax,
            solver: SolverOptions::default(),
        }
    }
}

/// Result of one discrete solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub problem: MultiPatchProblem,
    pub coeffs: Vec<f64>,
    pub report: SolveReport,
    pub assembly_time: Duration,
}

pub fn solve_case(
    case: &BenchmarkCase,
    disc: &Discretization,
    solver: &SolverOptions,
    level: usize,
) -> Result<Solution, ConvergenceError> {
    let problem = case.discretize(disc)?;
    let t0 = Instant::now();
    let system = assemble(&problem)?;
    let assembly_time = t0.elapsed();
    let (coeffs, report) =
        solve(&system.matrix, &system.rhs, solver).map_err(|source| ConvergenceError::Solver { level, source })?;
    Ok(Solution { problem, coeffs, report, assembly_time })
}

pub fn run_level(case: &BenchmarkCase, opts: &StudyOptions, level: usize) -> Result<LevelResult, ConvergenceError> {
    let n = opts.n0 << level;
    let disc = Discretization {
        degree: opts.degree,
        n_elems: n,
        mu: opts.mu,
        penalty: opts.penalty,
        penalty_scale: opts.penalty_scale,
    };
    let sol = solve_case(case, &disc, &opts.solver, level)?;
    let parts = dg_error(&sol.problem, &sol.coeffs, &case.exact, opts.norm_scale)?;
    Ok(LevelResult {
        level,
        n_elems: n,
        dofs: sol.coeffs.len(),
        h: 1.0 / n as f64,
        max_diameter: sol.problem.max_element_diameter(),
        error: parts.total(),
        parts,
        rate: None,
        solve: sol.report,
        assembly_time: sol.assembly_time,
    })
}

/// Runs levels `0..=max_level`, calling `progress` after each level.
pub fn run_convergence_with(
    case: &BenchmarkCase,
    opts: &StudyOptions,
    mut progress: impl FnMut(&LevelResult),
) -> Result<ConvergenceReport, ConvergenceError> {
    if opts.n0 == 0 {
        return Err(ConvergenceError::Invalid("n0 must be positive".into()));
    }
    if !(opts.mu > 0.0 && opts.mu <= 1.0) {
        return Err(ConvergenceError::Invalid(format!("mu = {} must lie in (0, 1]", opts.mu)));
    }
    let mut levels: Vec<LevelResult> = Vec::with_capacity(opts.max_level + 1);
    let penalty = opts.penalty.unwrap_or_else(|| crate::assembly::default_penalty(opts.degree, case.dim()));
    for s in 0..=opts.max_level {
        let mut l = run_level(case, opts, s)?;
        if let Some(prev) = levels.last() {
            l.rate = Some((prev.error / l.error).log2());
        }
        progress(&l);
        levels.push(l);
    }
    Ok(ConvergenceReport { case: case.name.clone(), degree: opts.degree, mu: opts.mu, penalty, levels })
}

pub fn run_convergence(case: &BenchmarkCase, opts: &StudyOptions) -> Result<ConvergenceReport, ConvergenceError> {
    run_convergence_with(case, opts, |_| {})
}
