//! Multipatch discontinuous Galerkin isogeometric solver for
//! `-div(alpha grad u) = f` with piecewise constant `alpha`, graded B-spline
//! meshes near singular points and convergence-rate studies.
//!
//! ```no_run
//! use dgiga::convergence::{run_convergence, StudyOptions};
//! use dgiga::problems::case_by_name;
//!
//! let case = case_by_name("heart2d")?;
//! let report = run_convergence(&case, &StudyOptions::new(1, 0.6, 4))?;
//! print!("{}", report.to_csv());
//! # Ok::<(), dgiga::Error>(())
//! ```

pub mod assembly;
pub mod convergence;
pub mod geometry;
pub mod grading;
pub mod multipatch;
pub mod output;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod spline;

pub use assembly::{assemble, DgSystem, MultiPatchProblem, PenaltyScale};
pub use convergence::{run_convergence, ConvergenceReport, StudyOptions};
pub use problems::{case_by_name, BenchmarkCase};
pub use solver::{solve, SolverKind, SolverOptions};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Spline(#[from] spline::SplineError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Grading(#[from] grading::GradingError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    #[error(transparent)]
    Assembly(#[from] assembly::AssemblyError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Problem(#[from] problems::ProblemError),
    #[error(transparent)]
    Convergence(#[from] convergence::ConvergenceError),
    #[error(transparent)]
    Multipatch(#[from] multipatch::MultipatchError),
}

impl Error {
    /// The failure comes from the numerics (solver, assembly, geometry) rather than from the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Solver(_) | Error::Assembly(_) | Error::Quadrature(_) => true,
            Error::Convergence(c) => !matches!(c, convergence::ConvergenceError::Invalid(_)),
            _ => false,
        }
    }
}
