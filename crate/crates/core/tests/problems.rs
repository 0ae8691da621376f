use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use dgiga::problems::{case_by_name, ExactSolution, KelloggParams, ProblemError, CASE_NAMES};
use dgiga::spline::Point;

#[test]
fn kellogg_parameters_solve_the_interface_relations() {
    let p = KelloggParams::solve(0.4).unwrap();
    for r in p.residuals() {
        assert!(r.abs() <= 1e-10, "{:?}", p.residuals());
    }
    assert!(p.satisfies_constraints());
    // regression values; R = 5 + 2 sqrt(5) in closed form
    assert!((p.rho - FRAC_PI_4).abs() < 1e-12);
    assert!((p.sigma + PI).abs() < 1e-12);
    assert!((p.ratio - (5.0 + 2.0 * 5f64.sqrt())).abs() < 1e-10);
    for lambda in [0.2, 0.5, 0.8] {
        let q = KelloggParams::solve(lambda).unwrap();
        assert!(q.residuals().iter().all(|r| r.abs() <= 1e-10), "lambda {lambda}");
        assert!(q.satisfies_constraints());
    }
    assert!(KelloggParams::solve(1.5).is_err());
}

#[test]
fn kellogg_solution_is_continuous_with_balanced_flux() {
    let case = case_by_name("kellogg").unwrap();
    let ExactSolution::Kellogg { params } = case.exact else { panic!() };
    // coefficient R in the first and third quadrant, 1 in the others
    let alpha = |t: f64| if (t < FRAC_PI_2) || (PI..1.5 * PI).contains(&t) { params.ratio } else { 1.0 };
    for t in [FRAC_PI_2, PI, 1.5 * PI, 2.0 * PI - 1e-12] {
        let eps = 1e-7;
        let (lo, hi) = (t - eps, (t + eps) % (2.0 * PI));
        assert!((params.phi(lo) - params.phi(hi)).abs() < 1e-6, "value at {t}");
        let (_, dlo) = params.phi_and_derivative(lo);
        let (_, dhi) = params.phi_and_derivative(hi);
        assert!(
            (alpha(lo) * dlo - alpha(hi) * dhi).abs() < 1e-5,
            "flux at {t}: {} vs {}",
            alpha(lo) * dlo,
            alpha(hi) * dhi
        );
    }
}

#[test]
fn re_entrant_corner_values() {
    let case = case_by_name("heart2d").unwrap();
    let u = |x: Point| case.exact.value(&x);
    // unit radius in the middle of the domain's opening gives sin(pi / 2)
    let omega = 1.5 * PI;
    let theta = omega / 2.0 - FRAC_PI_2;
    assert!((u([theta.cos(), theta.sin(), 0.0]) - 1.0).abs() < 1e-14);
    // both legs of the corner carry zero data
    assert!(u([0.0, -0.5, 0.0]).abs() < 1e-14);
    assert!(u([-0.5, 0.0, 0.0]).abs() < 1e-14);
    assert_eq!(case.patches[0].map_point(&[0.0; 3]).unwrap(), [0.0; 3]);
    assert!((case.singularity.unwrap().lambda - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn cube_source_matches_formula() {
    let case = case_by_name("cube").unwrap();
    assert!((case.exact.value(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    let f = case.source_fn();
    let expect = -0.85 * 1.85 * 0.5f64.powf(-1.15);
    assert!((f(&[0.5, 0.0, 0.0]) - expect).abs() < 1e-12);
    assert_eq!(case.patches.len(), 8);
}

#[test]
fn extruded_solutions_do_not_depend_on_height() {
    for name in ["lshape3d", "heart3d"] {
        let case = case_by_name(name).unwrap();
        for (x, y) in [(0.3, 0.4), (-0.2, 0.7), (0.5, -0.5)] {
            assert_eq!(case.exact.value(&[x, y, 0.2]), case.exact.value(&[x, y, 0.9]), "{name}");
        }
    }
}

#[test]
fn catalogue_lookup() {
    for name in CASE_NAMES {
        let case = case_by_name(name).unwrap();
        assert_eq!(case.name, name);
        assert_eq!(case.patches.len(), case.alpha.len());
    }
    match case_by_name("square") {
        Err(e @ ProblemError::UnknownCase { .. }) => {
            let msg = e.to_string();
            assert!(CASE_NAMES.iter().all(|n| msg.contains(n)), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn exact_solutions_satisfy_the_equation() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let h = 1e-3;
    for name in CASE_NAMES {
        let case = case_by_name(name).unwrap();
        let d = case.dim();
        let f = case.source_fn();
        let u = |x: &Point| case.exact.value(x);
        for (patch, alpha) in case.patches.iter().zip(&case.alpha) {
            let mut checked = 0;
            while checked < 100 {
                // stay clear of patch faces so stencils never cross a coefficient jump
                let mut xh = [0.0; 3];
                xh.iter_mut().take(d).for_each(|t| *t = rng.gen_range(0.05..0.95));
                let x = patch.map_point(&xh).unwrap();
                if let Some(s) = &case.singularity {
                    if dgiga::geometry::distance(&x, &s.point) < 0.1 {
                        continue;
                    }
                }
                let (mut lap, mut scale) = (0.0, 1.0);
                for i in 0..d {
                    let at = |k: f64| {
                        let mut y = x;
                        y[i] += k * h;
                        u(&y)
                    };
                    // fourth-order stencil; the singular solutions have large high derivatives
                    let second =
                        (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * h * h);
                    lap += second;
                    scale += second.abs();
                }
                let residual = -alpha * lap - f(&x);
                assert!(residual.abs() <= 1e-4 * (scale + f(&x).abs()), "{name} at {x:?}: {residual:e}");
                checked += 1;
            }
        }
    }
}
