use dgiga::assembly::{assemble, PenaltyScale};
use dgiga::problems::{case_by_name, Discretization};
use dgiga::solver::{conjugate_gradient, dense_cholesky, solve, SolverError, SolverKind, SolverOptions, DENSE_LIMIT};
use proptest::prelude::*;

fn fixture(name: &str, k: usize, n: usize, mu: f64) -> dgiga::DgSystem {
    let case = case_by_name(name).unwrap();
    let d = Discretization { degree: k, n_elems: n, mu, penalty: None, penalty_scale: PenaltyScale::default() };
    assemble(&case.discretize(&d).unwrap()).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn iterative_and_direct_solutions_agree() {
    for (name, k, n, mu) in [
        ("heart2d", 1, 8, 0.6),
        ("heart2d", 2, 8, 0.5),
        ("kellogg", 2, 8, 1.0),
        ("lshape3d", 1, 4, 0.6),
        ("sine", 3, 8, 1.0),
    ] {
        let sys = fixture(name, k, n, mu);
        assert!(sys.matrix.dim() <= DENSE_LIMIT);
        let dense = dense_cholesky(&sys.matrix, &sys.rhs).unwrap();
        let cg = SolverOptions { kind: SolverKind::Cg, tol: 1e-13, max_iter: 100_000, ..Default::default() };
        let sparse = SolverOptions { kind: SolverKind::SparseCholesky, ..Default::default() };
        for opts in [cg, sparse] {
            let (x, rep) = solve(&sys.matrix, &sys.rhs, &opts).unwrap();
            let diff: Vec<f64> = x.iter().zip(&dense).map(|(a, b)| a - b).collect();
            let rel = max_abs(&diff) / max_abs(&dense);
            assert!(rel <= 1e-9, "{name} {}: {rel:e}", rep.method);
            assert!(rep.residual <= opts.tol.max(1e-12), "{name}: {:e}", rep.residual);
        }
    }
}

#[test]
fn residual_history_has_no_large_jumps() {
    let sys = fixture("heart2d", 2, 8, 0.5);
    match conjugate_gradient(&sys.matrix, &sys.rhs, 1e-30, 150) {
        Err(SolverError::NotConverged { history, .. }) => {
            assert_eq!(history.len(), 150);
            for w in history.windows(2) {
                assert!(w[1] <= 10.0 * w[0], "{} -> {}", w[0], w[1]);
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn dense_factorization_refuses_large_systems() {
    let sys = fixture("kellogg", 2, 32, 1.0);
    assert!(sys.matrix.dim() > DENSE_LIMIT);
    assert!(matches!(dense_cholesky(&sys.matrix, &sys.rhs), Err(SolverError::TooLarge { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linearity_of_the_solve(scale in -10.0f64..10.0, seed in 0u64..1000) {
        prop_assume!(scale.abs() > 1e-3);
        let sys = fixture("heart2d", 1, 4, 0.6);
        let b: Vec<f64> = (0..sys.rhs.len()).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 50.0 - 1.0).collect();
        let opts = SolverOptions::default();
        let (x, _) = solve(&sys.matrix, &b, &opts).unwrap();
        let sb: Vec<f64> = b.iter().map(|v| v * scale).collect();
        let (sx, _) = solve(&sys.matrix, &sb, &opts).unwrap();
        for (a, c) in x.iter().zip(&sx) {
            prop_assert!((a * scale - c).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }
}
