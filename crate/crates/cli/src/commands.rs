use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dgiga::assembly::PenaltyScale;
use dgiga::convergence::{dg_error, run_convergence_with, solve_case, ConvergenceReport, LevelResult, StudyOptions};
use dgiga::grading::{grade_knots_1d, GradingSpec};
use dgiga::output::{coefficient_dump, field_dump};
use dgiga::problems::{Discretization, CASE_NAMES};
use dgiga::spline::KnotVector;
use dgiga::BenchmarkCase;

use crate::config::{Resolved, RunConfig, Setting};
use crate::CliError;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn stem(case: &BenchmarkCase, r: &Resolved) -> String {
    format!("{}_k{}_mu{}", case.name, r.k, r.mu)
}

fn study_options(r: &Resolved, mu: f64) -> StudyOptions {
    StudyOptions {
        n0: r.n0,
        penalty: r.penalty,
        penalty_scale: r.penalty_scale,
        solver: r.solver,
        ..StudyOptions::new(r.k, mu, r.levels)
    }
}

pub fn solve(config: &RunConfig, env_output: Option<PathBuf>) -> Result<(), CliError> {
    let case = config.load_case()?;
    let r = config.resolve(&case, env_output)?;
    let n = r.n0 << r.levels;
    let disc = Discretization { degree: r.k, n_elems: n, mu: r.mu, penalty: r.penalty, penalty_scale: r.penalty_scale };
    let sol = solve_case(&case, &disc, &r.solver, r.levels).map_err(dgiga::Error::from)?;
    let error = dg_error(&sol.problem, &sol.coeffs, &case.exact, PenaltyScale::PatchMax).map_err(dgiga::Error::from)?;

    let name = format!("{}_s{}", stem(&case, &r), r.levels);
    let field = field_dump(&sol.problem, &sol.coeffs, r.samples).map_err(dgiga::Error::from)?;
    let field_path = write_file(&r.output, &format!("{name}_field.txt"), &field)?;
    let coeff_path =
        write_file(&r.output, &format!("{name}_coeffs.txt"), &coefficient_dump(&sol.problem, &sol.coeffs))?;

    let rep = &sol.report;
    println!("case        {}", case.name);
    println!("k, mu, s    {}, {}, {} ({n} elements per direction)", r.k, r.mu, r.levels);
    println!("penalty     {} ({})", sol.problem.penalty_eta(), r.penalty_scale);
    println!("dofs        {}", sol.coeffs.len());
    println!("solver      {} ({} iterations, residual {:.2e})", rep.method, rep.iterations, rep.residual);
    println!("dG error    {:.6e}", error.total());
    println!("time        assembly {:.2?}, solve {:.2?}", sol.assembly_time, rep.wall_time);
    println!("field       {}", field_path.display());
    println!("coeffs      {}", coeff_path.display());
    Ok(())
}

fn progress(label: &str) -> impl FnMut(&LevelResult) + '_ {
    move |l| {
        eprintln!(
            "{label} s={} dofs={} error={:.4e} ({:.2?})",
            l.level,
            l.dofs,
            l.error,
            l.assembly_time + l.solve.wall_time
        )
    }
}

fn format_rate(rate: Option<f64>) -> String {
    rate.map_or("-".into(), |r| format!("{r:.4}"))
}

/// Text table with one row per level and one error/rate column pair per report.
pub fn rates_table(reports: &[ConvergenceReport]) -> String {
    let mut out = String::new();
    let mut header = format!("{:>3} {:>6}", "s", "h");
    for rep in reports {
        let tag = if rep.mu == 1.0 { "uniform".to_string() } else { format!("mu={}", rep.mu) };
        write!(header, " | {:>10} {:>12} {:>7}", "dofs", format!("err {tag}"), "rate").unwrap();
    }
    out.push_str(header.trim_end());
    out.push('\n');
    for (s, first) in reports[0].levels.iter().enumerate() {
        write!(out, "{:>3} {:>6}", s, format!("1/{}", first.n_elems)).unwrap();
        for rep in reports {
            let l = &rep.levels[s];
            write!(out, " | {:>10} {:>12.4e} {:>7}", l.dofs, l.error, format_rate(l.rate)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn rates(config: &RunConfig, compare_uniform: bool, env_output: Option<PathBuf>) -> Result<(), CliError> {
    let case = config.load_case()?;
    let r = config.resolve(&case, env_output)?;
    let mut mus = vec![r.mu];
    if compare_uniform && r.mu < 1.0 {
        mus.insert(0, 1.0);
    }
    let mut reports = Vec::new();
    for &mu in &mus {
        let label = format!("{} k={} mu={mu}", case.name, r.k);
        let report =
            run_convergence_with(&case, &study_options(&r, mu), progress(&label)).map_err(dgiga::Error::from)?;
        reports.push(report);
    }

    print!("{}", rates_table(&reports));
    let predicted: Vec<String> = mus.iter().map(|&mu| format!("{:.4}", case.predicted_rate(r.k, mu))).collect();
    println!("predicted asymptotic rate: {}", predicted.join(", "));

    let mut csv = String::from(ConvergenceReport::CSV_HEADER);
    csv.push('\n');
    let mut plot = String::new();
    for rep in &reports {
        csv.push_str(&rep.csv_rows());
        plot.push_str(&rep.plot_data());
        plot.push('\n');
    }
    let name = stem(&case, &r);
    let csv_path = write_file(&r.output, &format!("{name}_rates.csv"), &csv)?;
    let plot_path = write_file(&r.output, &format!("{name}_plot.dat"), &plot)?;
    let run_path = write_file(&r.output, &format!("{name}_run.toml"), &config.to_toml_string())?;
    println!("csv: {}\nplot data: {}\nconfig: {}", csv_path.display(), plot_path.display(), run_path.display());
    Ok(())
}

fn breakpoint_listing(label: &str, kv: &KnotVector) -> String {
    let b: Vec<String> = kv.breakpoints().iter().map(|t| format!("{t:.10}")).collect();
    format!("{label}: {} elements, sigma = {:.6}\n  {}\n", kv.num_elements(), kv.max_adjacent_ratio(), b.join(" "))
}

/// Graded breakpoints of a single direction, or of every patch of a case.
pub fn grade_preview(config: &RunConfig, n: usize, s_star: f64) -> Result<String, CliError> {
    if n == 0 {
        return Err(CliError::Usage("need at least one element".into()));
    }
    if config.case.is_none() && config.file.is_none() {
        let mu = match config.mu {
            Some(Setting::Value(mu)) => mu,
            None => 1.0,
            Some(Setting::Keyword) => return Err(CliError::Usage("mu = auto needs a case or file".into())),
        };
        if !(0.0..=1.0).contains(&s_star) {
            return Err(CliError::Usage(format!("s* = {s_star} must lie in [0, 1]")));
        }
        let b = grade_knots_1d(n, mu, s_star).map_err(|e| CliError::Usage(e.to_string()))?;
        let kv = KnotVector::from_breakpoints(1, &b).map_err(dgiga::Error::from)?;
        return Ok(breakpoint_listing(&format!("mu = {mu}, s* = {s_star}"), &kv));
    }

    let case = config.load_case()?;
    let r = config.resolve(&case, None)?;
    let mut out = format!("case {} k={} mu={} n={n}\n", case.name, r.k, r.mu);
    for (pi, patch) in case.patches.iter().enumerate() {
        let spec = match &case.singularity {
            Some(s) => {
                GradingSpec { mu: r.mu, singular_point: s.point, graded_dirs: s.graded_dirs, n_elems: n, degree: r.k }
            }
            None => GradingSpec { mu: 1.0, singular_point: [0.0; 3], graded_dirs: [false; 3], n_elems: n, degree: r.k },
        };
        let space = spec.discretization_space(patch).map_err(dgiga::Error::from)?;
        for (dir, kv) in space.directions().iter().enumerate() {
            out.push_str(&breakpoint_listing(&format!("patch {pi} direction {dir}"), kv));
        }
    }
    Ok(out)
}

pub fn list_cases() -> Result<String, CliError> {
    let mut out = String::new();
    for name in CASE_NAMES {
        let case = dgiga::case_by_name(name).map_err(dgiga::Error::from)?;
        let singular = match &case.singularity {
            Some(s) => format!("singular exponent {:.4}", s.lambda),
            None => "smooth".into(),
        };
        let recommended: Vec<String> = case.recommended.iter().map(|(k, mu)| format!("k={k} mu={mu}")).collect();
        writeln!(
            out,
            "{name:<14} {}d, {} patch{}, {singular}{}",
            case.dim(),
            case.patches.len(),
            if case.patches.len() == 1 { "" } else { "es" },
            if recommended.is_empty() { String::new() } else { format!(", try {}", recommended.join("; ")) }
        )
        .unwrap();
    }
    Ok(out)
}
