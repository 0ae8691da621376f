use dgiga::grading::{choose_mu, grade_knots_1d, zone_mesh_sizes, ZoneDivisor};
use dgiga::spline::KnotVector;
use proptest::prelude::*;

const SIZES: [usize; 4] = [8, 16, 32, 64];

fn sizes(b: &[f64]) -> Vec<f64> {
    b.windows(2).map(|w| w[1] - w[0]).collect()
}

#[test]
fn smallest_element_scales_like_h_to_one_over_mu() {
    for mu in [0.2, 0.3, 0.5, 0.8] {
        for s_star in [0.0, 1.0, 0.5, 0.3] {
            let ratios: Vec<f64> = SIZES
                .iter()
                .map(|&n| {
                    let b = grade_knots_1d(n, mu, s_star).unwrap();
                    let smallest = sizes(&b).into_iter().fold(f64::INFINITY, f64::min);
                    smallest / (1.0 / n as f64).powf(1.0 / mu)
                })
                .collect();
            let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
            assert!(lo > 0.05 && hi < 20.0, "mu {mu} s* {s_star}: {ratios:?}");
            assert!(hi / lo < 4.0, "mu {mu} s* {s_star}: {ratios:?}");
        }
    }
}

#[test]
fn distant_elements_scale_like_h_times_distance_power() {
    for mu in [0.3, 0.5, 0.8] {
        for &n in &SIZES {
            let b = grade_knots_1d(n, mu, 0.0).unwrap();
            let h = 1.0 / n as f64;
            for w in b.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                if mid < 0.25 {
                    continue;
                }
                // d/dt t^{1/mu} = t^{1/mu - 1} / mu = D^{1 - mu} / mu
                let r = (w[1] - w[0]) / (h * mid.powf(1.0 - mu));
                assert!(r > 0.5 && r < 2.0 / mu, "mu {mu} n {n} D {mid}: {r}");
            }
        }
    }
}

#[test]
fn unit_mu_is_bitwise_uniform() {
    for &n in &SIZES {
        for s_star in [0.0, 1.0] {
            let g = grade_knots_1d(n, 1.0, s_star).unwrap();
            let u: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
            assert_eq!(g, u);
        }
    }
}

#[test]
fn square_grading_of_four_elements() {
    assert_eq!(grade_knots_1d(4, 0.5, 0.0).unwrap(), vec![0.0, 0.0625, 0.25, 0.5625, 1.0]);
}

#[test]
fn adjacent_ratio_matches_direct_scan() {
    for mu in [0.3, 0.6, 1.0] {
        for &n in &SIZES {
            let b = grade_knots_1d(n, mu, 0.0).unwrap();
            let kv = KnotVector::from_breakpoints(2, &b).unwrap();
            let s = sizes(&b);
            let mut scan: f64 = 1.0;
            for i in 0..s.len() - 1 {
                scan = scan.max(s[i] / s[i + 1]).max(s[i + 1] / s[i]);
            }
            assert_eq!(kv.max_adjacent_ratio(), scan);
            assert!(kv.check_quasi_uniform(scan));
            if scan > 1.0 + 1e-12 {
                assert!(!kv.check_quasi_uniform(scan * 0.999));
            }
        }
    }
}

#[test]
fn zone_sizes_grow_away_from_the_point() {
    for divisor in [ZoneDivisor::default(), ZoneDivisor::NegativePower] {
        let zones = zone_mesh_sizes(1.0 / 32.0, 0.5, 2.0, &[0.0, 4.0, 8.0, 16.0], 1.0, divisor).unwrap();
        assert!(zones.windows(2).all(|w| w[1].size > w[0].size && w[1].distance > w[0].distance));
    }
    assert!(zone_mesh_sizes(0.1, 0.5, 20.0, &[0.0], 1.0, ZoneDivisor::default()).is_err());
}

#[test]
fn mu_choice() {
    assert!((choose_mu(2.0 / 3.0, 2, None).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(choose_mu(0.4, 1, None).unwrap(), 0.4);
    assert_eq!(choose_mu(3.0, 1, None).unwrap(), 1.0);
    assert!((choose_mu(0.85, 3, Some(1.2)).unwrap() - 0.4).abs() < 1e-15);
    assert!(choose_mu(-1.0, 1, None).is_err());
    assert!(choose_mu(0.5, 0, None).is_err());
}

proptest! {
    #[test]
    fn graded_sizes_monotone_from_the_point(n in 2usize..80, mu in 0.15f64..=1.0, s_star in prop::sample::select(vec![0.0, 0.25, 0.5, 0.7, 1.0])) {
        let b = grade_knots_1d(n, mu, s_star).unwrap();
        prop_assert_eq!(b[0], 0.0);
        prop_assert_eq!(*b.last().unwrap(), 1.0);
        prop_assert!(b.windows(2).all(|w| w[1] > w[0]));
        if mu < 1.0 {
            prop_assert!(b.iter().any(|&t| (t - s_star).abs() < 1e-14));
        }
        let s = sizes(&b);
        // nondecreasing with distance on each side of s*
        for i in 0..s.len() - 1 {
            if b[i] >= s_star - 1e-14 {
                prop_assert!(s[i + 1] >= s[i] * (1.0 - 1e-9), "right of s* at {}", b[i]);
            } else if b[i + 2] <= s_star + 1e-14 {
                prop_assert!(s[i] >= s[i + 1] * (1.0 - 1e-9), "left of s* at {}", b[i]);
            }
        }
    }
}
