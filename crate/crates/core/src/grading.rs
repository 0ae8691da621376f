//! A priori mesh grading toward a singular point.
//!
//! Graded meshes keep the knot count of the equivalent uniform mesh and pull
//! the breakpoints toward the pre-image of the singular point with the map
//! `t -> |t - s*|^{1/mu}` (rescaled so that `0`, `s*` and `1` stay fixed).
//! The smallest element then has size `h^{1/mu}` and an element at distance
//! `D` from the singular point has size of order `h D^{1 - mu}`.

use thiserror::Error;

use crate::geometry::{GeometryError, Patch};
use crate::spline::{KnotVector, Point, SplineError, TensorSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradingError {
    #[error("grading parameter mu = {0} must lie in (0, 1]")]
    InvalidMu(f64),
    #[error("singular exponent must be positive, got {0}")]
    InvalidExponent(f64),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Grading parameter giving the rate `min{k, lambda/mu} = k`.
///
/// With `delta` (a Sobolev regularity index) the parameter is `delta / k`
/// instead, as used for the three-dimensional cases. Values are clamped
/// to `(0, 1]`.
pub fn choose_mu(lambda: f64, k: usize, delta: Option<f64>) -> Result<f64, GradingError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(GradingError::InvalidExponent(lambda));
    }
    if k == 0 {
        return Err(GradingError::OutOfRange("degree must be at least 1".into()));
    }
    let exponent = match delta {
        Some(d) if !(d > 0.0) => return Err(GradingError::InvalidExponent(d)),
        Some(d) => d,
        None => lambda,
    };
    Ok((exponent / k as f64).min(1.0))
}

fn check_mu(mu: f64) -> Result<(), GradingError> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(GradingError::InvalidMu(mu))
    }
}

/// Graded breakpoints of an `n`-element mesh on `[0, 1]`.
///
/// For `s_star` strictly inside `(0, 1)` the elements are shared between the
/// two sides in proportion to their lengths (at least one each), both sides
/// are graded and `s_star` becomes a breakpoint.
pub fn grade_knots_1d(n: usize, mu: f64, s_star: f64) -> Result<Vec<f64>, GradingError> {
    check_mu(mu)?;
    if n == 0 {
        return Err(GradingError::OutOfRange("need at least one element".into()));
    }
    if !(0.0..=1.0).contains(&s_star) {
        return Err(GradingError::OutOfRange(format!("singular coordinate {s_star} outside [0, 1]")));
    }
    let nf = n as f64;
    if mu == 1.0 {
        return Ok((0..=n).map(|j| j as f64 / nf).collect());
    }
    let inv = 1.0 / mu;
    let mut out = Vec::with_capacity(n + 2);
    if s_star == 0.0 {
        out.extend((0..=n).map(|j| (j as f64 / nf).powf(inv)));
        return Ok(out);
    }
    if s_star == 1.0 {
        out.extend((0..=n).map(|j| 1.0 - ((n - j) as f64 / nf).powf(inv)));
        return Ok(out);
    }
    // each side gets its share of the n elements (at least one) and is graded on its own
    let left = ((nf * s_star).round() as usize).clamp(1, n.max(2) - 1);
    let right = n.max(2) - left;
    for j in 0..left {
        let rel = (left - j) as f64 / left as f64;
        out.push(s_star - s_star * rel.powf(inv));
    }
    out.push(s_star);
    for j in 1..=right {
        let rel = j as f64 / right as f64;
        out.push(s_star + (1.0 - s_star) * rel.powf(inv));
    }
    *out.last_mut().unwrap() = 1.0;
    Ok(out)
}

/// How the subdivision count of a ring zone is rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZoneDivisor {
    /// Nearest integer to `nu^{1/mu}`.
    #[default]
    InversePower,
    /// Nearest integer to `nu^{-mu}` (at least 1).
    NegativePower,
}

impl ZoneDivisor {
    fn value(self, nu: f64, mu: f64) -> f64 {
        let raw = match self {
            ZoneDivisor::InversePower => nu.powf(1.0 / mu),
            ZoneDivisor::NegativePower => nu.powf(-mu),
        };
        raw.round().max(1.0)
    }
}

/// Mesh size assigned to one ring zone around the singular point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneSize {
    pub n_zeta: f64,
    /// Distance of the zone's inner boundary from the singular point.
    pub distance: f64,
    pub size: f64,
}

/// Per-zone grid sizes `C (((n+nu) h)^{1/mu} - (n h)^{1/mu}) / int(.)` with `C = R^{1-1/mu}`.
pub fn zone_mesh_sizes(
    h: f64,
    mu: f64,
    nu: f64,
    n_zeta: &[f64],
    radius: f64,
    divisor: ZoneDivisor,
) -> Result<Vec<ZoneSize>, GradingError> {
    check_mu(mu)?;
    if !(h > 0.0) || !(radius > 0.0) {
        return Err(GradingError::OutOfRange("h and R must be positive".into()));
    }
    let layers = radius / h;
    if !(nu >= 1.0 && nu < layers - 1.0) {
        return Err(GradingError::OutOfRange(format!("nu = {nu} must satisfy 1 <= nu < {}", layers - 1.0)));
    }
    let inv = 1.0 / mu;
    let c = radius.powf(1.0 - inv);
    let div = divisor.value(nu, mu);
    n_zeta
        .iter()
        .map(|&n| {
            if !(n >= 0.0 && n < layers) {
                return Err(GradingError::OutOfRange(format!("n_zeta = {n} must satisfy 0 <= n < {layers}")));
            }
            let size = c * (((n + nu) * h).powf(inv) - (n * h).powf(inv)) / div;
            Ok(ZoneSize { n_zeta: n, distance: c * (n * h).powf(inv), size })
        })
        .collect()
}

/// Where and how strongly to grade the discretization of a multipatch domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GradingSpec {
    pub mu: f64,
    pub singular_point: Point,
    /// Parametric directions that are graded; the others stay uniform.
    pub graded_dirs: [bool; 3],
    /// Element count per direction of the equivalent uniform mesh.
    pub n_elems: usize,
    pub degree: usize,
}

impl GradingSpec {
    /// Pre-image of the singular point in `patch`, snapped onto nearby faces.
    pub fn singular_parameter(&self, patch: &Patch) -> Result<Point, GradingError> {
        let mut xh = patch.invert_point_multistart(&self.singular_point, 1e-12, 60)?;
        for v in xh.iter_mut().take(patch.dim()) {
            if v.abs() < 1e-9 {
                *v = 0.0;
            } else if (1.0 - *v).abs() < 1e-9 {
                *v = 1.0;
            }
        }
        Ok(xh)
    }

    /// Graded (or uniform) discretization space over `patch`, with the
    /// geometry's own interior breakpoints inserted.
    pub fn discretization_space(&self, patch: &Patch) -> Result<TensorSpace, GradingError> {
        check_mu(self.mu)?;
        let d = patch.dim();
        let graded = self.mu < 1.0 && self.graded_dirs[..d].iter().any(|&g| g);
        let s_star = if graded { Some(self.singular_parameter(patch)?) } else { None };
        let mut dirs = Vec::with_capacity(d);
        for i in 0..d {
            let mut breaks = match (&s_star, self.graded_dirs[i]) {
                (Some(s), true) => grade_knots_1d(self.n_elems, self.mu, s[i])?,
                _ => grade_knots_1d(self.n_elems, 1.0, 0.0)?,
            };
            let geo = patch.space().direction(i).breakpoints();
            if geo.len() > 2 {
                breaks = crate::quadrature::merge_breakpoints(&breaks, geo, 1e-12);
            }
            dirs.push(KnotVector::from_breakpoints(self.degree, &breaks)?);
        }
        Ok(TensorSpace::new(dirs)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_selection() {
        assert!((choose_mu(2.0 / 3.0, 1, None).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((choose_mu(0.4, 1, None).unwrap() - 0.4).abs() < 1e-15);
        assert!((choose_mu(0.4, 2, None).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(choose_mu(1.5, 1, None).unwrap(), 1.0);
        assert!((choose_mu(0.85, 2, Some(1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!(choose_mu(0.0, 1, None).is_err());
        assert!(choose_mu(-0.3, 2, None).is_err());
    }

    #[test]
    fn uniform_when_mu_is_one() {
        for s in [0.0, 0.3, 1.0] {
            let b = grade_knots_1d(7, 1.0, s).unwrap();
            let expected: Vec<f64> = (0..=7).map(|j| j as f64 / 7.0).collect();
            assert_eq!(b, expected);
        }
    }

    #[test]
    fn square_grading_closed_form() {
        let b = grade_knots_1d(4, 0.5, 0.0).unwrap();
        assert_eq!(b, vec![0.0, 1.0 / 16.0, 4.0 / 16.0, 9.0 / 16.0, 1.0]);
        let r = grade_knots_1d(4, 0.5, 1.0).unwrap();
        let expected = [0.0, 7.0 / 16.0, 12.0 / 16.0, 15.0 / 16.0, 1.0];
        for (a, e) in r.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn first_element_and_ratio() {
        let n = 16;
        let mu = 0.6;
        let b = grade_knots_1d(n, mu, 0.0).unwrap();
        let first = b[1] - b[0];
        assert!((first - (n as f64).powf(-1.0 / mu)).abs() < 1e-12);
        let last = b[n] - b[n - 1];
        let ratio = last / first;
        // largest / smallest behaves like n^{1/mu - 1} up to a factor 1/mu
        let scale = (n as f64).powf(1.0 / mu - 1.0);
        assert!(ratio > scale && ratio < scale / mu, "{ratio} vs {scale}");
    }

    #[test]
    fn interior_singular_point_inserted() {
        let b = grade_knots_1d(4, 0.5, 0.3).unwrap();
        // one element left of s*, three right of it
        let r = 0.7 / 9.0;
        let expect = [0.0, 0.3, 0.3 + r, 0.3 + 4.0 * r, 1.0];
        assert_eq!(b.len(), expect.len());
        assert!(b.iter().zip(expect).all(|(x, y)| (x - y).abs() < 1e-15), "{b:?}");
        assert_eq!(grade_knots_1d(4, 0.5, 0.5).unwrap(), vec![0.0, 0.375, 0.5, 0.625, 1.0]);
        // a single element is split at s*
        assert_eq!(grade_knots_1d(1, 0.5, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn invalid_arguments() {
        assert!(grade_knots_1d(4, 0.0, 0.0).is_err());
        assert!(grade_knots_1d(4, 1.2, 0.0).is_err());
        assert!(grade_knots_1d(0, 0.5, 0.0).is_err());
        assert!(grade_knots_1d(4, 0.5, 1.5).is_err());
    }

    #[test]
    fn zone_sizes() {
        let z = zone_mesh_sizes(0.1, 1.0, 1.0, &[0.0, 3.0, 5.0], 1.0, ZoneDivisor::InversePower).unwrap();
        for s in &z {
            assert!((s.size - 0.1).abs() < 1e-15);
        }
        // hand evaluation: C = 1, ((0.4)^2 - (0.3)^2) / 1 = 0.07
        let z = zone_mesh_sizes(0.1, 0.5, 1.0, &[3.0], 1.0, ZoneDivisor::InversePower).unwrap();
        assert!((z[0].size - 0.07).abs() < 1e-15);
        assert!((z[0].distance - 0.09).abs() < 1e-15);
        // innermost zone is of order h^{1/mu}
        let z0 = zone_mesh_sizes(0.05, 0.5, 2.0, &[0.0], 1.0, ZoneDivisor::InversePower).unwrap();
        assert!((z0[0].size - (2.0 * 0.05f64).powi(2) / 4.0).abs() < 1e-15);
        assert!(zone_mesh_sizes(0.1, 0.5, 0.5, &[0.0], 1.0, ZoneDivisor::InversePower).is_err());
        assert!(zone_mesh_sizes(0.1, 0.5, 1.0, &[12.0], 1.0, ZoneDivisor::InversePower).is_err());
        let alt = zone_mesh_sizes(0.1, 0.5, 2.0, &[1.0], 1.0, ZoneDivisor::NegativePower).unwrap();
        assert!((alt[0].size - ((0.3f64).powi(2) - (0.1f64).powi(2))).abs() < 1e-15);
    }
}
