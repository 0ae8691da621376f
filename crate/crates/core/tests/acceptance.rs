//! Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on failure.
//!
//! Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use dgiga::assembly::{assemble, PenaltyScale};
use dgiga::convergence::{dg_error, run_convergence, solve_case, StudyOptions};
use dgiga::grading::grade_knots_1d;
use dgiga::problems::{case_by_name, Discretization, ExactSolution, KelloggParams};
use dgiga::solver::{dense_cholesky, solve, SolverKind, SolverOptions};
use dgiga::spline::{KnotVector, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

/// Last-level rate of a study.
fn rate(case: &str, k: usize, mu: f64, levels: usize) -> Result<f64, String> {
    let case = case_by_name(case).map_err(|e| e.to_string())?;
    let report = run_convergence(&case, &StudyOptions::new(k, mu, levels)).map_err(|e| e.to_string())?;
    report.last_rate().ok_or_else(|| "no rate".to_string())
}

enum Target {
    Near(f64, f64),
    AtLeast(f64),
}

impl Target {
    fn holds(&self, r: f64) -> bool {
        match *self {
            Target::Near(v, tol) => (r - v).abs() <= tol,
            Target::AtLeast(v) => r >= v,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Target::Near(v, tol) => format!("{v} +- {tol}"),
            Target::AtLeast(v) => format!(">= {v}"),
        }
    }
}

/// Runs every study and reports all of them, failing if any misses its target.
fn rate_checks(studies: &[(&str, usize, f64, usize, Target)]) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (case, k, mu, levels, target) in studies {
        let label = if *mu == 1.0 { format!("{case} k={k} uniform") } else { format!("{case} k={k} mu={mu}") };
        match rate(case, *k, *mu, *levels) {
            Ok(r) => {
                let pass = target.holds(r);
                ok &= pass;
                parts.push(format!(
                    "{label}: {r:.4} (want {}{})",
                    target.describe(),
                    if pass { "" } else { ", MISSED" }
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{label}: error {e}"));
            }
        }
    }
    let line = parts.join("; ");
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn heart_graded() -> Check {
    rate_checks(&[
        ("heart2d", 1, 0.6, 5, Target::Near(0.951475, 0.10)),
        ("heart2d", 2, 0.3, 5, Target::Near(2.00987, 0.15)),
    ])
}

fn heart_uniform() -> Check {
    rate_checks(&[("heart2d", 1, 1.0, 5, Target::Near(0.667, 0.05)), ("heart2d", 2, 1.0, 5, Target::Near(0.667, 0.05))])
}

fn kellogg() -> Check {
    let params = KelloggParams::solve(0.4).map_err(|e| e.to_string())?;
    let worst = params.residuals().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let rates = rate_checks(&[
        ("kellogg", 1, 1.0, 5, Target::Near(0.385, 0.05)),
        ("kellogg", 2, 1.0, 5, Target::Near(0.385, 0.05)),
        ("kellogg", 1, 0.4, 5, Target::Near(0.906, 0.10)),
        ("kellogg", 2, 0.2, 5, Target::Near(1.95, 0.20)),
    ]);
    let residuals = format!("parameter residual {worst:.1e}");
    match rates {
        Ok(line) if worst <= 1e-10 && params.satisfies_constraints() => Ok(format!("{line}; {residuals}")),
        Ok(line) | Err(line) => Err(format!("{line}; {residuals}")),
    }
}

fn cube() -> Check {
    rate_checks(&[
        ("cube", 1, 1.0, 3, Target::AtLeast(0.85)),
        ("cube", 2, 0.6, 3, Target::AtLeast(1.75)),
        ("cube", 3, 0.4, 3, Target::AtLeast(2.5)),
    ])
}

fn lshape() -> Check {
    rate_checks(&[("lshape3d", 1, 1.0, 3, Target::Near(0.65, 0.07)), ("lshape3d", 1, 0.6, 3, Target::AtLeast(0.85))])
}

fn heart3d() -> Check {
    rate_checks(&[("heart3d", 1, 0.6, 3, Target::AtLeast(0.85))])
}

fn mu_sweep() -> Check {
    let case = case_by_name("heart2d").map_err(|e| e.to_string())?;
    let lambda = case.singularity.as_ref().map(|s| s.lambda).ok_or("heart2d has no singularity")?;
    let k = 2;
    let studies: Vec<_> = [0.3, 0.5, 0.8, 1.0]
        .into_iter()
        .map(|mu| ("heart2d", k, mu, 5, Target::Near((k as f64).min(lambda / mu), 0.15)))
        .collect();
    rate_checks(&studies)
}

fn disc(k: usize, n: usize, mu: f64) -> Discretization {
    Discretization { degree: k, n_elems: n, mu, penalty: None, penalty_scale: PenaltyScale::default() }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn spline_checks(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for _ in 0..200 {
        let p = rng.gen_range(1..=4);
        let mut breaks: Vec<f64> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0.05..0.95)).collect();
        breaks.extend([0.0, 1.0]);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 0.02);
        let kv = KnotVector::from_breakpoints(p, &breaks).map_err(|e| e.to_string())?;
        let x: f64 = rng.gen_range(0.0..=1.0);
        let (_, vals) = kv.eval_basis(x).map_err(|e| e.to_string())?;
        let sum: f64 = vals.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-13, || format!("partition of unity off by {:e}", sum - 1.0))?;

        let h = 1e-6;
        let e = kv.element_of(x).map_err(|e| e.to_string())?;
        let (a, b) = kv.element_bounds(e);
        if x - h <= a || x + h >= b {
            continue;
        }
        let (_, ders) = kv.eval_basis_deriv(x).map_err(|e| e.to_string())?;
        let (_, plus) = kv.eval_basis(x + h).map_err(|e| e.to_string())?;
        let (_, minus) = kv.eval_basis(x - h).map_err(|e| e.to_string())?;
        let scale = kv.element_sizes().iter().fold(f64::INFINITY, |m, &s| m.min(s)).recip().max(1.0);
        for j in 0..ders.len() {
            let fd = (plus[j] - minus[j]) / (2.0 * h);
            ensure((ders[j] - fd).abs() <= 1e-5 * scale, || format!("derivative {} vs {fd}", ders[j]))?;
        }
    }
    Ok(())
}

fn grading_checks() -> Result<(), String> {
    let sizes = |b: &[f64]| b.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    for mu in [0.2, 0.3, 0.5, 0.8] {
        let ratios: Vec<f64> = [8usize, 16, 32, 64]
            .iter()
            .map(|&n| {
                let b = grade_knots_1d(n, mu, 0.0).unwrap();
                sizes(&b)[0] / (1.0 / n as f64).powf(1.0 / mu)
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        ensure(hi / lo < 1.0 + 1e-9, || format!("smallest element not ~ h^(1/mu) for mu {mu}: {ratios:?}"))?;
        for n in [8usize, 16, 32, 64] {
            let b = grade_knots_1d(n, mu, 0.0).map_err(|e| e.to_string())?;
            for w in b.windows(2).filter(|w| w[0] >= 0.25) {
                let mid = 0.5 * (w[0] + w[1]);
                let r = (w[1] - w[0]) * n as f64 / mid.powf(1.0 - mu);
                ensure(r > 0.5 && r < 2.0 / mu, || format!("element at {mid} breaks h D^(1-mu) for mu {mu}: {r}"))?;
            }
        }
    }
    let uniform = grade_knots_1d(16, 1.0, 0.0).map_err(|e| e.to_string())?;
    ensure(uniform.iter().enumerate().all(|(j, &t)| t == j as f64 / 16.0), || "mu = 1 is not uniform".into())
}

fn patch_test() -> Result<(), String> {
    let mut case = case_by_name("kellogg").map_err(|e| e.to_string())?;
    case.alpha.iter_mut().for_each(|a| *a = 1.0);
    case.singularity = None;
    case.exact = ExactSolution::Quadratic {
        coeffs: [0.3, -1.0, 0.5, 0.0],
        hessian: [[2.0, 0.7, 0.0], [0.7, -1.0, 0.0], [0.0, 0.0, 0.0]],
    };
    let strict = SolverOptions { tol: 1e-14, ..Default::default() };
    let sol = solve_case(&case, &disc(2, 2, 1.0), &strict, 0).map_err(|e| e.to_string())?;
    let err = dg_error(&sol.problem, &sol.coeffs, &case.exact, PenaltyScale::PatchMax).map_err(|e| e.to_string())?;
    ensure(err.total() <= 1e-9, || format!("patch test error {:e}", err.total()))
}

fn matrix_checks() -> Result<(), String> {
    for (name, k, n, mu) in [("heart2d", 2, 8, 0.5), ("kellogg", 2, 8, 1.0), ("lshape3d", 1, 4, 0.6)] {
        let case = case_by_name(name).map_err(|e| e.to_string())?;
        let problem = case.discretize(&disc(k, n, mu)).map_err(|e| e.to_string())?;
        let sys = assemble(&problem).map_err(|e| e.to_string())?;
        let again = assemble(&problem).map_err(|e| e.to_string())?;
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(sys.matrix == again.matrix && bits(sys.matrix.values()) == bits(again.matrix.values()), || {
            format!("{name}: repeated assembly differs")
        })?;
        let defect = sys.matrix.symmetry_defect();
        ensure(defect <= 1e-12, || format!("{name}: symmetry defect {defect:e}"))?;

        ensure(sys.matrix.dim() <= 2000, || format!("{name}: fixture too large"))?;
        let dense = dense_cholesky(&sys.matrix, &sys.rhs).map_err(|e| e.to_string())?;
        let cg = SolverOptions { kind: SolverKind::Cg, tol: 1e-13, max_iter: 100_000, ..Default::default() };
        let (x, _) = solve(&sys.matrix, &sys.rhs, &cg).map_err(|e| e.to_string())?;
        let max_abs = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0f64, |m, a| m.max(a.abs()));
        let rel = max_abs(&mut x.iter().zip(&dense).map(|(a, b)| a - b)) / max_abs(&mut dense.iter().copied());
        ensure(rel <= 1e-9, || format!("{name}: CG vs dense {rel:e}"))?;
    }
    Ok(())
}

fn interface_checks() -> Result<(), String> {
    let g = |x: &Point| x[0].sin() + x[1] * x[1] - 0.5 * x[2];
    for (name, k, n, mu) in [("heart2d", 2, 8, 0.3), ("kellogg", 1, 4, 0.4), ("heart3d", 1, 4, 0.6)] {
        let case = case_by_name(name).map_err(|e| e.to_string())?;
        let problem = case.discretize(&disc(k, n, mu)).map_err(|e| e.to_string())?;
        for it in problem.interfaces() {
            let (pa, pb) = (&problem.patches()[it.patch_a].geometry, &problem.patches()[it.patch_b].geometry);
            let (mut ia, mut ib) = (0.0, 0.0);
            for q in problem.interface_points(it, k + 2).map_err(|e| e.to_string())? {
                let xa = pa.map_point(&q.a.param).map_err(|e| e.to_string())?;
                let xb = pb.map_point(&q.b.param).map_err(|e| e.to_string())?;
                let gap = dgiga::geometry::distance(&xa, &xb);
                ensure(gap <= 1e-9, || format!("{name}: interface points {gap:e} apart"))?;
                ia += q.weight * g(&xa);
                ib += q.weight * g(&xb);
            }
            ensure((ia - ib).abs() <= 1e-9, || format!("{name}: interface integrals {ia} vs {ib}"))?;
        }
    }
    Ok(())
}

fn properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let checks: [(&str, Result<(), String>); 5] = [
        ("basis", spline_checks(&mut rng)),
        ("grading", grading_checks()),
        ("patch test", patch_test()),
        ("symmetry, determinism, CG vs dense", matrix_checks()),
        ("two-sided interface", interface_checks()),
    ];
    let failures: Vec<String> =
        checks.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    if failures.is_empty() {
        Ok(checks.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ") + " ok")
    } else {
        Err(failures.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 heart 2d graded rates", heart_graded),
        ("2 heart 2d uniform rates", heart_uniform),
        ("3 kellogg rates and parameters", kellogg),
        ("4 cube interior point", cube),
        ("5 3d l-shape", lshape),
        ("6 3d heart", heart3d),
        ("7 rate tracks min(k, lambda/mu)", mu_sweep),
        ("8 property suite", properties),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{name}] {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail} ({secs:.1}s)");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
