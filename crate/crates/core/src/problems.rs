//! Benchmark problems with known exact solutions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, DiscretePatch, MultiPatchProblem, PenaltyScale, ScalarFn};
use crate::geometry::{dot, find_interfaces, GeometryError, InterfaceSpec, Patch};
use crate::grading::{GradingError, GradingSpec};
use crate::spline::{KnotVector, Point, TensorSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("unknown case `{name}`; available cases: {}", available.join(", "))]
    UnknownCase { name: String, available: Vec<String> },
    #[error("Kellogg parameters for lambda = {lambda} not found: {reason}")]
    Kellogg { lambda: f64, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grading(#[from] GradingError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Parameters of the checkerboard-coefficient solution `r^lambda phi(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KelloggParams {
    pub lambda: f64,
    pub rho: f64,
    pub sigma: f64,
    /// `alpha_13 / alpha_24`.
    pub ratio: f64,
}

impl KelloggParams {
    /// Residuals of the three tangent/cotangent relations.
    pub fn residuals(&self) -> [f64; 3] {
        let (l, r, s, big_r) = (self.lambda, self.rho, self.sigma, self.ratio);
        [
            big_r + ((FRAC_PI_2 - s) * l).tan() / (r * l).tan(),
            1.0 / big_r + (r * l).tan() / (s * l).tan(),
            big_r + (s * l).tan() / ((FRAC_PI_2 - r) * l).tan(),
        ]
    }

    /// The bracket inequalities on `lambda`, `rho` and `sigma`.
    pub fn satisfies_constraints(&self) -> bool {
        let (l, r, s) = (self.lambda, self.rho, self.sigma);
        let two_lr = 2.0 * l * r;
        let m2ls = -2.0 * l * s;
        l > 0.0
            && l < 2.0
            && (PI * l - PI).max(0.0) < two_lr
            && two_lr < (PI * l).min(PI)
            && (PI - PI * l).max(0.0) < m2ls
            && m2ls < PI.min(2.0 * PI - l * PI)
    }

    /// Damped Newton from a grid of starting points inside the brackets.
    pub fn solve(lambda: f64) -> Result<Self, ProblemError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(ProblemError::Kellogg { lambda, reason: "lambda must lie in (0, 1)".into() });
        }
        let mut best: Option<(f64, Self)> = None;
        for rho_frac in [0.5, 0.3, 0.7, 0.15, 0.85] {
            for sigma_frac in [0.5, 0.3, 0.7, 0.15, 0.85] {
                // interior points of the rho and sigma brackets
                let rho = rho_frac * (PI * lambda).min(PI) / (2.0 * lambda);
                let lo = (PI - PI * lambda).max(0.0);
                let hi = PI.min(2.0 * PI - lambda * PI);
                let sigma = -(lo + sigma_frac * (hi - lo)) / (2.0 * lambda);
                let ratio = -((FRAC_PI_2 - sigma) * lambda).tan() / (rho * lambda).tan();
                let start = Self { lambda, rho, sigma, ratio: if ratio > 0.0 { ratio } else { 1.0 } };
                if let Some(p) = newton(start) {
                    let res = p.residuals().iter().fold(0.0f64, |m, r| m.max(r.abs()));
                    if p.satisfies_constraints() && p.ratio > 0.0 && best.as_ref().is_none_or(|b| res < b.0) {
                        best = Some((res, p));
                    }
                }
            }
        }
        match best {
            Some((res, p)) if res <= 1e-10 => Ok(p),
            Some((res, _)) => Err(ProblemError::Kellogg { lambda, reason: format!("best residual {res:e}") }),
            None => Err(ProblemError::Kellogg { lambda, reason: "no start converged inside the brackets".into() }),
        }
    }

    /// Angular factor for `theta` in `[0, 2 pi)`.
    pub fn phi(&self, theta: f64) -> f64 {
        self.phi_and_derivative(theta).0
    }

    pub fn phi_and_derivative(&self, theta: f64) -> (f64, f64) {
        let (l, r, s) = (self.lambda, self.rho, self.sigma);
        let (amp, shift) = if theta < FRAC_PI_2 {
            (((FRAC_PI_2 - s) * l).cos(), -FRAC_PI_2 + r)
        } else if theta < PI {
            ((r * l).cos(), -PI + s)
        } else if theta < 3.0 * FRAC_PI_2 {
            ((s * l).cos(), -PI - r)
        } else {
            (((FRAC_PI_2 - r) * l).cos(), -3.0 * FRAC_PI_2 - s)
        };
        let arg = (theta + shift) * l;
        (amp * arg.cos(), -amp * l * arg.sin())
    }
}

fn newton(mut p: KelloggParams) -> Option<KelloggParams> {
    let f = |q: &KelloggParams| nalgebra::Vector3::from(q.residuals());
    let pack = |q: &KelloggParams| nalgebra::Vector3::new(q.rho, q.sigma, q.ratio);
    let unpack = |v: nalgebra::Vector3<f64>, l: f64| KelloggParams { lambda: l, rho: v[0], sigma: v[1], ratio: v[2] };
    let mut fx = f(&p);
    for _ in 0..100 {
        if !fx.iter().all(|v| v.is_finite()) {
            return None;
        }
        if fx.amax() < 1e-14 {
            break;
        }
        let x = pack(&p);
        let mut jac = nalgebra::Matrix3::zeros();
        for c in 0..3 {
            let h = 1e-7 * x[c].abs().max(1.0);
            let mut xp = x;
            xp[c] += h;
            let mut xm = x;
            xm[c] -= h;
            jac.set_column(c, &((f(&unpack(xp, p.lambda)) - f(&unpack(xm, p.lambda))) / (2.0 * h)));
        }
        let step = jac.lu().solve(&fx)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = unpack(x - step * t, p.lambda);
            let ft = f(&trial);
            if ft.iter().all(|v| v.is_finite()) && ft.norm() < fx.norm() {
                p = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(p)
}

/// Exact solutions of the benchmark problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExactSolution {
    /// `r^lambda sin(lambda theta)` with `theta = atan2(y, x) + theta_offset` in `[0, 2 pi)`;
    /// independent of `z` in three dimensions.
    CornerPower { lambda: f64, theta_offset: f64 },
    /// `r^lambda phi(theta)` with the four-branch Kellogg factor.
    Kellogg { params: KelloggParams },
    /// `|x|^lambda`.
    RadialPower { lambda: f64 },
    /// Product of `sin(pi x_i)` over the coordinates.
    SineProduct { dim: usize },
    /// `c0 + c1 x + c2 y + c3 z`.
    Linear { coeffs: [f64; 4] },
    /// `c0 + c1 x + c2 y + c3 z + x^T H x / 2` with symmetric `H`; in two
    /// dimensions the third row and column of `H` must vanish.
    Quadratic { coeffs: [f64; 4], hessian: [[f64; 3]; 3] },
}

fn polar(x: &Point, offset: f64) -> (f64, f64) {
    let r = x[0].hypot(x[1]);
    let mut theta = x[1].atan2(x[0]) + offset;
    if theta < 0.0 {
        theta += 2.0 * PI;
    }
    if theta >= 2.0 * PI {
        theta -= 2.0 * PI;
    }
    (r, theta)
}

fn mat_vec(m: &[[f64; 3]; 3], x: &Point) -> Point {
    [0, 1, 2].map(|i| m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2])
}

/// Cartesian gradient from polar derivatives `(du/dr, du/dtheta / r)`.
fn polar_gradient(x: &Point, dr: f64, dt_over_r: f64) -> Point {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return [f64::NAN; 3];
    }
    let (c, s) = (x[0] / r, x[1] / r);
    [dr * c - dt_over_r * s, dr * s + dt_over_r * c, 0.0]
}

impl ExactSolution {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            ExactSolution::CornerPower { lambda, theta_offset } => {
                let (r, t) = polar(x, *theta_offset);
                r.powf(*lambda) * (lambda * t).sin()
            }
            ExactSolution::Kellogg { params } => {
                let (r, t) = polar(x, 0.0);
                r.powf(params.lambda) * params.phi(t)
            }
            ExactSolution::RadialPower { lambda } => (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().powf(*lambda),
            ExactSolution::SineProduct { dim } => x.iter().take(*dim).map(|v| (PI * v).sin()).product(),
            ExactSolution::Linear { coeffs } => coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1] + coeffs[3] * x[2],
            ExactSolution::Quadratic { coeffs, hessian } => {
                let hx = mat_vec(hessian, x);
                coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1] + coeffs[3] * x[2] + 0.5 * dot(x, &hx)
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> Point {
        match self {
            ExactSolution::CornerPower { lambda, theta_offset } => {
                let (r, t) = polar(x, *theta_offset);
                let rl1 = r.powf(lambda - 1.0);
                polar_gradient(x, lambda * rl1 * (lambda * t).sin(), lambda * rl1 * (lambda * t).cos())
            }
            ExactSolution::Kellogg { params } => {
                let (r, t) = polar(x, 0.0);
                let (phi, dphi) = params.phi_and_derivative(t);
                let rl1 = r.powf(params.lambda - 1.0);
                polar_gradient(x, params.lambda * rl1 * phi, rl1 * dphi)
            }
            ExactSolution::RadialPower { lambda } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let c = lambda * r.powf(lambda - 2.0);
                [c * x[0], c * x[1], c * x[2]]
            }
            ExactSolution::SineProduct { dim } => {
                let mut g = [0.0; 3];
                for (i, gi) in g.iter_mut().enumerate().take(*dim) {
                    *gi = (0..*dim).map(|j| if i == j { PI * (PI * x[j]).cos() } else { (PI * x[j]).sin() }).product();
                }
                g
            }
            ExactSolution::Linear { coeffs } => [coeffs[1], coeffs[2], coeffs[3]],
            ExactSolution::Quadratic { coeffs, hessian } => {
                let hx = mat_vec(hessian, x);
                [coeffs[1] + hx[0], coeffs[2] + hx[1], coeffs[3] + hx[2]]
            }
        }
    }

    /// `-Laplace u`; multiply by the (constant) coefficient for the source.
    pub fn negative_laplacian(&self, x: &Point) -> f64 {
        match self {
            ExactSolution::CornerPower { .. } | ExactSolution::Kellogg { .. } | ExactSolution::Linear { .. } => 0.0,
            ExactSolution::RadialPower { lambda } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                -lambda * (lambda + 1.0) * r.powf(lambda - 2.0)
            }
            ExactSolution::SineProduct { dim } => *dim as f64 * PI * PI * self.value(x),
            ExactSolution::Quadratic { hessian, .. } => -(hessian[0][0] + hessian[1][1] + hessian[2][2]),
        }
    }
}

/// Where the discretization is graded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Singularity {
    pub point: Point,
    /// Parametric directions graded toward the point.
    pub graded_dirs: [bool; 3],
    /// Singular exponent of the solution near the point.
    pub lambda: f64,
    /// Exponent `e` in the expected rate `min(k, e / mu)`.
    pub rate_exponent: f64,
    /// Sobolev index used to pick `mu` in three dimensions.
    pub delta: Option<f64>,
    /// The source itself is singular at the point.
    pub singular_source: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub name: String,
    pub patches: Vec<Patch>,
    pub alpha: Vec<f64>,
    pub interfaces: Vec<InterfaceSpec>,
    pub exact: ExactSolution,
    pub singularity: Option<Singularity>,
    /// `(k, mu)` pairs with reference rates.
    pub recommended: Vec<(usize, f64)>,
}

/// Discretization settings of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub degree: usize,
    /// Element count per direction of the equivalent uniform mesh.
    pub n_elems: usize,
    /// Grading parameter; `1` is uniform.
    pub mu: f64,
    pub penalty: Option<f64>,
    pub penalty_scale: PenaltyScale,
}

impl BenchmarkCase {
    pub fn dim(&self) -> usize {
        self.patches[0].dim()
    }

    /// Expected asymptotic rate `min(k, e / mu)`.
    pub fn predicted_rate(&self, k: usize, mu: f64) -> f64 {
        match &self.singularity {
            Some(s) => (k as f64).min(s.rate_exponent / mu),
            None => k as f64,
        }
    }

    pub fn source_fn(&self) -> ScalarFn {
        let exact = self.exact.clone();
        // the coefficient is constant wherever the source is nonzero
        let alpha = self.alpha[0];
        Arc::new(move |x| alpha * exact.negative_laplacian(x))
    }

    pub fn dirichlet_fn(&self) -> ScalarFn {
        let exact = self.exact.clone();
        Arc::new(move |x| exact.value(x))
    }

    pub fn discretize(&self, disc: &Discretization) -> Result<MultiPatchProblem, ProblemError> {
        let mut parts = Vec::with_capacity(self.patches.len());
        for (patch, &alpha) in self.patches.iter().zip(&self.alpha) {
            let space = match &self.singularity {
                Some(s) => GradingSpec {
                    mu: disc.mu,
                    singular_point: s.point,
                    graded_dirs: s.graded_dirs,
                    n_elems: disc.n_elems,
                    degree: disc.degree,
                }
                .discretization_space(patch)?,
                None => GradingSpec {
                    mu: 1.0,
                    singular_point: [0.0; 3],
                    graded_dirs: [false; 3],
                    n_elems: disc.n_elems,
                    degree: disc.degree,
                }
                .discretization_space(patch)?,
            };
            parts.push(DiscretePatch { geometry: patch.clone(), space, alpha });
        }
        let mut problem =
            MultiPatchProblem::new(parts, self.interfaces.clone(), self.source_fn(), self.dirichlet_fn())?
                .with_penalty_scale(disc.penalty_scale)
                .with_source_singularity(self.singularity.filter(|s| s.singular_source).map(|s| s.point));
        if let Some(eta) = disc.penalty {
            problem = problem.with_penalty(eta);
        }
        Ok(problem)
    }
}

/// Heart-shaped control nets; the first direction runs fastest.
pub const HEART_PATCH_1: [[f64; 2]; 9] = [
    [0.0, 0.0],
    [0.49, 0.49],
    [0.97, 0.97],
    [0.0, -0.81],
    [0.46, -0.16],
    [1.00, 0.94],
    [0.35, -0.84],
    [0.71, -0.84],
    [0.85, 0.042],
];

pub const HEART_PATCH_2: [[f64; 2]; 9] = [
    [0.0, 0.0],
    [0.49, 0.49],
    [0.97, 0.97],
    [-0.81, 0.0],
    [-0.16, 0.46],
    [0.94, 1.00],
    [-0.84, 0.35],
    [-0.84, 0.71],
    [0.04, 0.85],
];

/// The published nets fold near the far corner of each patch (the Jacobian
/// changes sign); moving one control point per patch by 0.02 removes the fold.
fn repaired_heart_nets() -> ([[f64; 2]; 9], [[f64; 2]; 9]) {
    let mut a = HEART_PATCH_1;
    let mut b = HEART_PATCH_2;
    a[7] = [0.69, -0.84];
    b[7] = [-0.84, 0.69];
    (a, b)
}

fn quadratic_patch(id: usize, net: &[[f64; 2]; 9]) -> Result<Patch, ProblemError> {
    let space = TensorSpace::new(vec![KnotVector::uniform(2, 1).map_err(GeometryError::from)?; 2])
        .map_err(GeometryError::from)?;
    Ok(Patch::new(id, space, net.iter().map(|c| [c[0], c[1], 0.0]).collect())?)
}

fn with_interfaces(
    name: &str,
    patches: Vec<Patch>,
    alpha: Vec<f64>,
    exact: ExactSolution,
    singularity: Option<Singularity>,
    recommended: Vec<(usize, f64)>,
) -> BenchmarkCase {
    let interfaces = find_interfaces(&patches, 1e-10);
    BenchmarkCase { name: name.into(), patches, alpha, interfaces, exact, singularity, recommended }
}

const RE_ENTRANT: ExactSolution = ExactSolution::CornerPower { lambda: 2.0 / 3.0, theta_offset: FRAC_PI_2 };

fn corner_singularity(graded_dirs: [bool; 3]) -> Singularity {
    Singularity {
        point: [0.0; 3],
        graded_dirs,
        lambda: 2.0 / 3.0,
        rate_exponent: 2.0 / 3.0,
        delta: None,
        singular_source: false,
    }
}

fn heart_patches(exact_table: bool) -> Result<Vec<Patch>, ProblemError> {
    let (a, b) = if exact_table { (HEART_PATCH_1, HEART_PATCH_2) } else { repaired_heart_nets() };
    Ok(vec![quadratic_patch(0, &a)?, quadratic_patch(1, &b)?])
}

/// Two-patch heart with a re-entrant corner of angle `3 pi / 2` at the origin.
pub fn heart2d_case() -> Result<BenchmarkCase, ProblemError> {
    Ok(with_interfaces(
        "heart2d",
        heart_patches(false)?,
        vec![1.0; 2],
        RE_ENTRANT,
        Some(corner_singularity([true, true, false])),
        vec![(1, 0.6), (2, 0.3)],
    ))
}

/// The heart with the control nets exactly as tabulated (folded geometry).
pub fn heart2d_table_case() -> Result<BenchmarkCase, ProblemError> {
    let mut c = heart2d_case()?;
    c.name = "heart2d-table".into();
    c.patches = heart_patches(true)?;
    c.interfaces = find_interfaces(&c.patches, 1e-10);
    Ok(c)
}

/// Checkerboard coefficients on `(-1, 1)^2`, one patch per quadrant.
pub fn kellogg_case(lambda: f64) -> Result<BenchmarkCase, ProblemError> {
    let params = KelloggParams::solve(lambda)?;
    let quads =
        [([0.0, 0.0], [1.0, 1.0]), ([-1.0, 0.0], [0.0, 1.0]), ([-1.0, -1.0], [0.0, 0.0]), ([0.0, -1.0], [1.0, 0.0])];
    let patches = quads
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| Patch::aligned_box(i, 2, [lo[0], lo[1], 0.0], [hi[0], hi[1], 0.0]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(with_interfaces(
        "kellogg",
        patches,
        vec![params.ratio, 1.0, params.ratio, 1.0],
        ExactSolution::Kellogg { params },
        Some(Singularity {
            point: [0.0; 3],
            graded_dirs: [true, true, false],
            lambda,
            rate_exponent: lambda,
            delta: None,
            singular_source: false,
        }),
        vec![(1, 0.4), (2, 0.2)],
    ))
}

/// `(-1, 1)^3` as eight unit cubes with `|x|^0.85` singular at the shared corner.
pub fn cube_case() -> Result<BenchmarkCase, ProblemError> {
    let lambda = 0.85;
    let mut patches = Vec::with_capacity(8);
    for c in 0..8usize {
        let lo: Point = std::array::from_fn(|i| if (c >> i) & 1 == 1 { 0.0 } else { -1.0 });
        let hi: Point = std::array::from_fn(|i| lo[i] + 1.0);
        patches.push(Patch::aligned_box(c, 3, lo, hi)?);
    }
    Ok(with_interfaces(
        "cube",
        patches,
        vec![1.0; 8],
        ExactSolution::RadialPower { lambda },
        Some(Singularity {
            point: [0.0; 3],
            graded_dirs: [true; 3],
            lambda,
            // |x|^lambda lies in H^{1 + s} for s < lambda + 1/2 in three dimensions
            rate_exponent: lambda + 0.5,
            delta: Some(1.0),
            singular_source: true,
        }),
        vec![(1, 1.0), (2, 0.6), (3, 0.4)],
    ))
}

/// L-shaped prism `((-1,1)^2 \ (-1,0)^2) x (0,1)` split along the diagonal.
pub fn lshape3d_case() -> Result<BenchmarkCase, ProblemError> {
    let a = Patch::multilinear(0, &[[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [1.0, -1.0, 0.0]])?;
    let b = Patch::multilinear(1, &[[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [-1.0, 1.0, 0.0]])?;
    let patches = vec![a.extrude(0, 0.0, 1.0)?, b.extrude(1, 0.0, 1.0)?];
    Ok(with_interfaces(
        "lshape3d",
        patches,
        vec![1.0; 2],
        RE_ENTRANT,
        Some(corner_singularity([true, true, false])),
        vec![(1, 0.6)],
    ))
}

/// The (repaired) heart extruded over `z in (0, 1)`.
pub fn heart3d_case() -> Result<BenchmarkCase, ProblemError> {
    let patches = heart_patches(false)?.iter().map(|p| p.extrude(p.id(), 0.0, 1.0)).collect::<Result<Vec<_>, _>>()?;
    Ok(with_interfaces(
        "heart3d",
        patches,
        vec![1.0; 2],
        RE_ENTRANT,
        Some(corner_singularity([true, true, false])),
        vec![(1, 0.6)],
    ))
}

/// Smooth `sin(pi x) sin(pi y)` on the unit square.
pub fn sine_case() -> Result<BenchmarkCase, ProblemError> {
    Ok(with_interfaces(
        "sine",
        vec![Patch::aligned_box(0, 2, [0.0; 3], [1.0, 1.0, 0.0])?],
        vec![1.0],
        ExactSolution::SineProduct { dim: 2 },
        None,
        vec![(1, 1.0), (2, 1.0)],
    ))
}

pub const CASE_NAMES: [&str; 7] = ["heart2d", "heart2d-table", "kellogg", "cube", "lshape3d", "heart3d", "sine"];

pub fn case_by_name(name: &str) -> Result<BenchmarkCase, ProblemError> {
    match name {
        "heart2d" => heart2d_case(),
        "heart2d-table" => heart2d_table_case(),
        "kellogg" => kellogg_case(0.4),
        "cube" => cube_case(),
        "lshape3d" => lshape3d_case(),
        "heart3d" => heart3d_case(),
        "sine" => sine_case(),
        _ => Err(ProblemError::UnknownCase {
            name: name.into(),
            available: CASE_NAMES.iter().map(|s| s.to_string()).collect(),
        }),
    }
}
