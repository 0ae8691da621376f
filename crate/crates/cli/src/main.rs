//! `dgiga`: single solves, convergence studies and grading previews.
//!
//! Exit codes: 0 on success, 1 when the numerics fail (indefinite system,
//! folded geometry, solver breakdown) or output cannot be written, 2 for
//! usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{MuSetting, PenaltySetting, RunConfig, OUTPUT_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] dgiga::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(e) if !e.is_numerical() => 2,
            CliError::Run(_) | CliError::Io { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "dgiga", version, about = "Multipatch dG isogeometric solver with graded meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once at the finest level and write the field and coefficients.
    Solve(RunArgs),
    /// Convergence study over levels 0..=S: table, CSV and plot data.
    Rates {
        #[command(flatten)]
        run: RunArgs,
        /// Also run the uniform mesh and print both columns.
        #[arg(long)]
        compare_uniform: bool,
    },
    /// Print graded breakpoints and the adjacent size ratio without assembling.
    GradePreview {
        #[command(flatten)]
        source: CaseArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        mu: Option<MuSetting>,
        /// Elements per direction.
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Parametric position of the singular point when no case is given.
        #[arg(long, default_value_t = 0.0)]
        s_star: f64,
    },
    /// List the bundled benchmark cases.
    ListCases,
}

#[derive(Args)]
struct CaseArgs {
    /// Bundled case, see `list-cases`.
    #[arg(long, conflicts_with = "file")]
    case: Option<String>,
    /// Multipatch geometry file (TOML).
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: CaseArgs,
    /// Spline degree.
    #[arg(long)]
    k: Option<usize>,
    /// Grading parameter in (0, 1] or `auto`.
    #[arg(long, conflicts_with = "no_grading")]
    mu: Option<MuSetting>,
    /// Uniform meshes, same as `--mu 1`.
    #[arg(long)]
    no_grading: bool,
    /// Finest level S, with n0 2^S elements per direction.
    #[arg(long, visible_alias = "level")]
    levels: Option<usize>,
    #[arg(long)]
    n0: Option<usize>,
    /// Penalty parameter or `default`.
    #[arg(long)]
    eta: Option<PenaltySetting>,
    /// local-normal, patch-max or local-diameter.
    #[arg(long)]
    penalty_scale: Option<String>,
    /// auto, cg, dense-cholesky or sparse-cholesky.
    #[arg(long)]
    solver: Option<String>,
    /// Relative residual tolerance of the iterative solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory; the DGIGA_OUTPUT_DIR environment variable takes precedence over a config file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run configuration file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Samples per direction and patch in the field dump.
    #[arg(long)]
    samples: Option<usize>,
}

impl RunArgs {
    /// The config file overlaid by flags, and the output directory override.
    fn into_config(self) -> Result<(RunConfig, Option<PathBuf>), CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            case: self.source.case,
            file: self.source.file,
            k: self.k,
            mu: if self.no_grading { Some(MuSetting::Value(1.0)) } else { self.mu },
            eta: self.eta,
            penalty_scale: self.penalty_scale,
            levels: self.levels,
            n0: self.n0,
            solver: self.solver,
            tol: self.tol,
            output: None,
            samples: self.samples,
        };
        let env = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        Ok((base.overlay(flags), self.output.or(env)))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let (config, output) = args.into_config()?;
            commands::solve(&config, output)
        }
        Command::Rates { run, compare_uniform } => {
            let (config, output) = run.into_config()?;
            commands::rates(&config, compare_uniform, output)
        }
        Command::GradePreview { source, k, mu, n, s_star } => {
            let config = RunConfig { case: source.case, file: source.file, k, mu, ..Default::default() };
            print!("{}", commands::grade_preview(&config, n, s_star)?);
            Ok(())
        }
        Command::ListCases => {
            print!("{}", commands::list_cases()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
