//! B-spline patch maps, their Jacobians, face traces and point inversion.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::spline::{KnotVector, Point, SplineError, TensorSpace, MAX_DEGREE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("patch {patch}: {count} control points for a space of dimension {expected}")]
    ControlPointCount { patch: usize, count: usize, expected: usize },
    #[error("patch {patch}: singular Jacobian (det = {det:e}) at parameter {param:?}")]
    SingularJacobian { patch: usize, param: Point, det: f64 },
    #[error("patch {patch}: Jacobian changes sign (det = {det:e}) at parameter {param:?}")]
    Orientation { patch: usize, param: Point, det: f64 },
    #[error("patch {patch}: point {point:?} not inverted, residual {residual:e} after {iterations} iterations")]
    Inversion { patch: usize, point: Point, residual: f64, iterations: usize },
    #[error("patch {patch}: degenerate face {face} at {param:?}")]
    DegenerateFace { patch: usize, face: Face, param: Point },
    #[error("unknown face `{0}` (expected u0, u1, v0, v1, w0 or w1)")]
    UnknownFace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Low,
    High,
}

/// A parametric face: the coordinate `dir` fixed at 0 (`Low`) or 1 (`High`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub dir: usize,
    pub side: Side,
}

impl Face {
    pub fn new(dir: usize, side: Side) -> Self {
        Self { dir, side }
    }

    pub fn all(dim: usize) -> Vec<Face> {
        (0..dim).flat_map(|dir| [Face::new(dir, Side::Low), Face::new(dir, Side::High)]).collect()
    }

    pub fn fixed_value(&self) -> f64 {
        match self.side {
            Side::Low => 0.0,
            Side::High => 1.0,
        }
    }

    /// Tangential directions, increasing.
    pub fn tangents(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|&i| i != self.dir).collect()
    }

    /// Lifts local face coordinates `t` to a parameter point on this face.
    pub fn lift(&self, dim: usize, t: &[f64]) -> Point {
        let mut p = [0.0; 3];
        p[self.dir] = self.fixed_value();
        for (m, &i) in self.tangents(dim).iter().enumerate() {
            p[i] = t[m];
        }
        p
    }

    /// Local face coordinates of a parameter point.
    pub fn project(&self, dim: usize, p: &Point) -> [f64; 2] {
        let mut t = [0.0; 2];
        for (m, &i) in self.tangents(dim).iter().enumerate() {
            t[m] = p[i];
        }
        t
    }

    pub fn outward_sign(&self) -> f64 {
        match self.side {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = ['u', 'v', 'w'][self.dir];
        let s = match self.side {
            Side::Low => 0,
            Side::High => 1,
        };
        write!(f, "{c}{s}")
    }
}

impl FromStr for Face {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() != 2 {
            return Err(GeometryError::UnknownFace(s.into()));
        }
        let dir = match b[0] {
            b'u' => 0,
            b'v' => 1,
            b'w' => 2,
            _ => return Err(GeometryError::UnknownFace(s.into())),
        };
        let side = match b[1] {
            b'0' => Side::Low,
            b'1' => Side::High,
            _ => return Err(GeometryError::UnknownFace(s.into())),
        };
        Ok(Face { dir, side })
    }
}

/// `m[a][b] = d x_a / d xh_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub dim: usize,
    pub m: [[f64; 3]; 3],
    pub det: f64,
}

impl Jacobian {
    fn from_matrix(dim: usize, m: [[f64; 3]; 3]) -> Self {
        let det = if dim == 2 {
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        } else {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        Self { dim, m, det }
    }

    /// `J^{-T}`, so that physical gradients are `inv_t * parametric gradients`.
    pub fn inverse_transpose(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        let inv_det = 1.0 / self.det;
        let mut r = [[0.0; 3]; 3];
        if self.dim == 2 {
            // (J^{-1})^T of a 2x2 matrix
            r[0][0] = m[1][1] * inv_det;
            r[0][1] = -m[1][0] * inv_det;
            r[1][0] = -m[0][1] * inv_det;
            r[1][1] = m[0][0] * inv_det;
        } else {
            // cofactor matrix divided by the determinant
            r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
            r[0][1] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
            r[0][2] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
            r[1][0] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
            r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
            r[1][2] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
            r[2][0] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
            r[2][1] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
            r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        }
        r
    }

    /// Solves `J dx = rhs`.
    pub fn solve(&self, rhs: &Point) -> Point {
        let it = self.inverse_transpose();
        // J^{-1} = (J^{-T})^T
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            for b in 0..self.dim {
                x[a] += it[b][a] * rhs[b];
            }
        }
        x
    }
}

pub fn apply(m: &[[f64; 3]; 3], v: &Point, dim: usize) -> Point {
    let mut r = [0.0; 3];
    for a in 0..dim {
        for b in 0..dim {
            r[a] += m[a][b] * v[b];
        }
    }
    r
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// A trace point on a patch face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacePoint {
    pub param: Point,
    pub x: Point,
    /// Outward unit normal of the patch.
    pub normal: Point,
    /// Surface measure per unit parametric face measure.
    pub measure: f64,
    /// Physical length per unit parametric length in the normal direction.
    pub normal_stretch: f64,
}

/// A geometry map from `[0,1]^d` given by control points over a tensor space.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    id: usize,
    space: TensorSpace,
    control_points: Vec<Point>,
}

impl Patch {
    pub fn new(id: usize, space: TensorSpace, control_points: Vec<Point>) -> Result<Self, GeometryError> {
        if control_points.len() != space.num_basis() {
            return Err(GeometryError::ControlPointCount {
                patch: id,
                count: control_points.len(),
                expected: space.num_basis(),
            });
        }
        Ok(Self { id, space, control_points })
    }

    /// Multilinear patch through `2^d` corners listed with the first direction fastest.
    pub fn multilinear(id: usize, corners: &[Point]) -> Result<Self, GeometryError> {
        let dim = match corners.len() {
            4 => 2,
            8 => 3,
            n => return Err(GeometryError::ControlPointCount { patch: id, count: n, expected: 4 }),
        };
        Self::new(id, TensorSpace::uniform(dim, 1, 1)?, corners.to_vec())
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn aligned_box(id: usize, dim: usize, lo: Point, hi: Point) -> Result<Self, GeometryError> {
        let n = 1 << dim;
        let corners: Vec<Point> = (0..n)
            .map(|c| {
                let mut p = [0.0; 3];
                for i in 0..dim {
                    p[i] = if (c >> i) & 1 == 1 { hi[i] } else { lo[i] };
                }
                p
            })
            .collect();
        Self::multilinear(id, &corners)
    }

    /// Extrudes a planar patch along `z in [z0, z1]` using the same degree in `z`.
    pub fn extrude(&self, id: usize, z0: f64, z1: f64) -> Result<Self, GeometryError> {
        assert_eq!(self.dim(), 2, "only planar patches can be extruded");
        let p = self.space.degree();
        let mut dirs = self.space.directions().to_vec();
        dirs.push(KnotVector::uniform(p, 1)?);
        let space = TensorSpace::new(dirs)?;
        let mut cps = Vec::with_capacity(space.num_basis());
        for l in 0..=p {
            // Greville abscissae of a single Bezier segment are l / p
            let z = z0 + (z1 - z0) * l as f64 / p as f64;
            for c in &self.control_points {
                cps.push([c[0], c[1], z]);
            }
        }
        Self::new(id, space, cps)
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn control_points(&self) -> &[Point] {
        &self.control_points
    }

    fn check_domain(xh: &[f64], dim: usize) -> Result<(), GeometryError> {
        for &v in &xh[..dim] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SplineError::OutOfDomain { value: v }.into());
            }
        }
        Ok(())
    }

    /// Evaluates the map and, when `with_jacobian`, its derivative matrix.
    fn evaluate(&self, xh: &Point, with_jacobian: bool) -> Result<(Point, [[f64; 3]; 3]), GeometryError> {
        let d = self.dim();
        Self::check_domain(xh, d)?;
        let p = self.space.degree();
        let order = usize::from(with_jacobian);
        let mut tabs = [[[0.0; MAX_DEGREE + 1]; 2]; 3];
        let mut first = [0usize; 3];
        for i in 0..d {
            let kv = self.space.direction(i);
            let e = kv.element_of(xh[i])?;
            first[i] = kv.first_active(e);
            kv.eval_in_element(e, xh[i], order, &mut tabs[i][..=order]);
        }
        let counts = self.space.basis_counts();
        let mut x = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        let n3 = if d == 3 { p + 1 } else { 1 };
        for c in 0..n3 {
            for b in 0..=p {
                for a in 0..=p {
                    let loc = [a, b, c];
                    let idx = (first[0] + a) + counts[0] * ((first[1] + b) + counts[1] * (first[2] + c));
                    let cp = &self.control_points[idx];
                    let mut v = 1.0;
                    for i in 0..d {
                        v *= tabs[i][0][loc[i]];
                    }
                    for comp in 0..d {
                        x[comp] += v * cp[comp];
                    }
                    if with_jacobian {
                        for j in 0..d {
                            let mut g = 1.0;
                            for i in 0..d {
                                g *= tabs[i][usize::from(i == j)][loc[i]];
                            }
                            for comp in 0..d {
                                jac[comp][j] += g * cp[comp];
                            }
                        }
                    }
                }
            }
        }
        Ok((x, jac))
    }

    pub fn map_point(&self, xh: &Point) -> Result<Point, GeometryError> {
        Ok(self.evaluate(xh, false)?.0)
    }

    pub fn jacobian(&self, xh: &Point) -> Result<Jacobian, GeometryError> {
        self.map_with_jacobian(xh).map(|(_, j)| j)
    }

    pub fn map_with_jacobian(&self, xh: &Point) -> Result<(Point, Jacobian), GeometryError> {
        let (x, m) = self.evaluate(xh, true)?;
        Ok((x, Jacobian::from_matrix(self.dim(), m)))
    }

    /// Like [`Patch::map_with_jacobian`] but rejects (near) singular Jacobians.
    pub fn regular_jacobian(&self, xh: &Point) -> Result<(Point, Jacobian), GeometryError> {
        let (x, j) = self.map_with_jacobian(xh)?;
        if !(j.det.abs() > 1e-14) {
            return Err(GeometryError::SingularJacobian { patch: self.id, param: *xh, det: j.det });
        }
        Ok((x, j))
    }

    /// Damped Newton inversion of the map, clamped to the unit box.
    pub fn invert_point(&self, x: &Point, tol: f64, max_iter: usize) -> Result<Point, GeometryError> {
        let mut guess = [0.0; 3];
        for g in guess.iter_mut().take(self.dim()) {
            *g = 0.5;
        }
        self.invert_point_from(x, guess, tol, max_iter)
    }

    pub fn invert_point_from(
        &self,
        x: &Point,
        start: Point,
        tol: f64,
        max_iter: usize,
    ) -> Result<Point, GeometryError> {
        let d = self.dim();
        let mut xh = start;
        let residual_of = |xh: &Point| -> Result<(Point, f64), GeometryError> {
            let y = self.map_point(xh)?;
            let r = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
            Ok((r, norm(&r)))
        };
        let (mut r, mut rn) = residual_of(&xh)?;
        for _ in 0..max_iter {
            if rn <= tol {
                return Ok(xh);
            }
            let jac = self.jacobian(&xh)?;
            if jac.det == 0.0 {
                break;
            }
            let step = jac.solve(&r);
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=10 {
                let mut trial = xh;
                for i in 0..d {
                    trial[i] = (xh[i] - scale * step[i]).clamp(0.0, 1.0);
                }
                let (tr, tn) = residual_of(&trial)?;
                if tn < rn {
                    xh = trial;
                    r = tr;
                    rn = tn;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if rn <= tol {
            return Ok(xh);
        }
        Err(GeometryError::Inversion { patch: self.id, point: *x, residual: rn, iterations: max_iter })
    }

    /// Retries inversion from a `3^d` grid of starting points.
    pub fn invert_point_multistart(&self, x: &Point, tol: f64, max_iter: usize) -> Result<Point, GeometryError> {
        let first = self.invert_point(x, tol, max_iter);
        if first.is_ok() {
            return first;
        }
        let d = self.dim();
        let seeds = [1.0 / 6.0, 0.5, 5.0 / 6.0];
        let total = 3usize.pow(d as u32);
        for c in 0..total {
            let mut start = [0.0; 3];
            let mut rest = c;
            for s in start.iter_mut().take(d) {
                *s = seeds[rest % 3];
                rest /= 3;
            }
            if let Ok(xh) = self.invert_point_from(x, start, tol, max_iter) {
                return Ok(xh);
            }
        }
        first
    }

    /// Trace of the patch on `face` at local face coordinates `t`.
    pub fn face_point(&self, face: Face, t: &[f64]) -> Result<FacePoint, GeometryError> {
        let d = self.dim();
        let param = face.lift(d, t);
        let (x, jac) = self.map_with_jacobian(&param)?;
        if jac.det == 0.0 {
            return Err(GeometryError::DegenerateFace { patch: self.id, face, param });
        }
        let it = jac.inverse_transpose();
        let mut nh = [0.0; 3];
        nh[face.dir] = face.outward_sign();
        let n = apply(&it, &nh, d);
        let len = norm(&n);
        let measure = jac.det.abs() * len;
        if !(measure > 0.0) || !len.is_finite() {
            return Err(GeometryError::DegenerateFace { patch: self.id, face, param });
        }
        Ok(FacePoint { param, x, normal: [n[0] / len, n[1] / len, n[2] / len], measure, normal_stretch: 1.0 / len })
    }

    /// Physical elements of a discretization space laid over this patch.
    pub fn physical_mesh(&self, space: &TensorSpace) -> Result<PhysicalMesh, GeometryError> {
        let d = self.dim();
        let mut diameters = Vec::with_capacity(space.num_elements());
        for e in space.elements() {
            let bx = space.element_box(&e);
            let mut corners = Vec::with_capacity(1 << d);
            for c in 0..(1usize << d) {
                let mut p = [0.0; 3];
                for i in 0..d {
                    p[i] = if (c >> i) & 1 == 1 { bx[i].1 } else { bx[i].0 };
                }
                corners.push(self.map_point(&p)?);
            }
            let mut diam: f64 = 0.0;
            for a in 0..corners.len() {
                for b in a + 1..corners.len() {
                    diam = diam.max(distance(&corners[a], &corners[b]));
                }
            }
            diameters.push(diam);
        }
        let max_diameter = diameters.iter().cloned().fold(0.0, f64::max);
        Ok(PhysicalMesh { counts: space.element_counts(), diameters, max_diameter })
    }

    /// Sign of `det J` over the given parameter points; errors on a sign change.
    pub fn check_orientation<'a>(&self, points: impl IntoIterator<Item = &'a Point>) -> Result<f64, GeometryError> {
        let mut sign = 0.0;
        for p in points {
            let jac = self.jacobian(p)?;
            if jac.det == 0.0 {
                return Err(GeometryError::SingularJacobian { patch: self.id, param: *p, det: 0.0 });
            }
            let s = jac.det.signum();
            if sign == 0.0 {
                sign = s;
            } else if s != sign {
                return Err(GeometryError::Orientation { patch: self.id, param: *p, det: jac.det });
            }
        }
        Ok(sign)
    }
}

/// Images of the parametric elements of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalMesh {
    counts: [usize; 3],
    diameters: Vec<f64>,
    max_diameter: f64,
}

impl PhysicalMesh {
    pub fn num_elements(&self) -> usize {
        self.diameters.len()
    }

    pub fn diameter(&self, e: &[usize; 3]) -> f64 {
        let c = self.counts;
        self.diameters[e[0] + c[0] * (e[1] + c[1] * e[2])]
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    /// Patch grid size `h_i`.
    pub fn grid_size(&self) -> f64 {
        self.max_diameter
    }
}

/// Correspondence between the local coordinates of two matched faces:
/// `t_b[m] = flip[m] ? 1 - s[m] : s[m]` with `s` = `t_a`, swapped when `permute`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Orientation {
    pub permute: bool,
    pub flip: [bool; 2],
}

impl Orientation {
    pub fn map(&self, t: [f64; 2]) -> [f64; 2] {
        let s = if self.permute { [t[1], t[0]] } else { t };
        let mut out = [0.0; 2];
        for m in 0..2 {
            out[m] = if self.flip[m] { 1.0 - s[m] } else { s[m] };
        }
        out
    }

    pub fn inverse(&self) -> Orientation {
        if self.permute {
            Orientation { permute: true, flip: [self.flip[1], self.flip[0]] }
        } else {
            *self
        }
    }

    fn candidates(dim: usize) -> Vec<Orientation> {
        let mut v = Vec::new();
        let perms: &[bool] = if dim == 3 { &[false, true] } else { &[false] };
        for &permute in perms {
            for f0 in [false, true] {
                let f1s: &[bool] = if dim == 3 { &[false, true] } else { &[false] };
                for &f1 in f1s {
                    v.push(Orientation { permute, flip: [f0, f1] });
                }
            }
        }
        v
    }
}

/// A face shared by two patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSpec {
    pub patch_a: usize,
    pub face_a: Face,
    pub patch_b: usize,
    pub face_b: Face,
    pub orientation: Orientation,
}

fn face_samples(dim: usize) -> Vec<[f64; 2]> {
    if dim == 2 {
        vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.25, 0.0]]
    } else {
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5], [0.25, 0.6]]
    }
}

/// Finds how face `fb` of `b` traces the same set as face `fa` of `a`, if it does.
pub fn detect_orientation(a: &Patch, fa: Face, b: &Patch, fb: Face, tol: f64) -> Option<Orientation> {
    let d = a.dim();
    let samples = face_samples(d);
    Orientation::candidates(d).into_iter().find(|o| {
        samples.iter().all(|t| {
            let pa = a.map_point(&fa.lift(d, t));
            let pb = b.map_point(&fb.lift(d, &o.map(*t)));
            matches!((pa, pb), (Ok(pa), Ok(pb)) if distance(&pa, &pb) <= tol)
        })
    })
}

/// Pairs up coinciding faces of distinct patches.
pub fn find_interfaces(patches: &[Patch], tol: f64) -> Vec<InterfaceSpec> {
    let mut out = Vec::new();
    for (i, a) in patches.iter().enumerate() {
        for (j, b) in patches.iter().enumerate().skip(i + 1) {
            for fa in Face::all(a.dim()) {
                for fb in Face::all(b.dim()) {
                    if let Some(orientation) = detect_orientation(a, fa, b, fb, tol) {
                        out.push(InterfaceSpec { patch_a: i, face_a: fa, patch_b: j, face_b: fb, orientation });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Patch {
        Patch::aligned_box(0, 2, [0.0; 3], [1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn identity_patch() {
        let p = unit_square();
        let x = p.map_point(&[0.3, 0.7, 0.0]).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-15 && (x[1] - 0.7).abs() < 1e-15);
        let j = p.jacobian(&[0.2, 0.9, 0.0]).unwrap();
        assert!((j.det - 1.0).abs() < 1e-15);
        let back = p.invert_point(&[0.3, 0.7, 0.0], 1e-13, 20).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-12 && (back[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn affine_scaling_determinant() {
        let p = Patch::aligned_box(0, 2, [0.0; 3], [2.0, 3.0, 0.0]).unwrap();
        for xh in [[0.1, 0.2, 0.0], [0.9, 0.5, 0.0]] {
            assert!((p.jacobian(&xh).unwrap().det - 6.0).abs() < 1e-13);
        }
        let fp = p.face_point(Face::new(1, Side::High), &[0.5]).unwrap();
        assert!((fp.measure - 2.0).abs() < 1e-14);
        assert!((fp.normal[1] - 1.0).abs() < 1e-14);
        assert!((fp.normal_stretch - 3.0).abs() < 1e-14);
    }

    #[test]
    fn unit_square_face_normal() {
        let p = unit_square();
        let fp = p.face_point(Face::new(0, Side::High), &[0.4]).unwrap();
        assert!((fp.normal[0] - 1.0).abs() < 1e-15 && fp.normal[1].abs() < 1e-15);
        assert!((fp.measure - 1.0).abs() < 1e-15);
        let low = p.face_point(Face::new(1, Side::Low), &[0.4]).unwrap();
        assert!((low.normal[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn outside_point_fails_to_invert() {
        let p = unit_square();
        let r = p.invert_point(&[1.5, 0.5, 0.0], 1e-12, 30);
        assert!(matches!(r, Err(GeometryError::Inversion { .. })));
        assert!(p.invert_point_multistart(&[1.5, 0.5, 0.0], 1e-12, 30).is_err());
    }

    #[test]
    fn face_names_round_trip() {
        for f in Face::all(3) {
            assert_eq!(f.to_string().parse::<Face>().unwrap(), f);
        }
        assert!("x0".parse::<Face>().is_err());
    }

    #[test]
    fn orientation_inverse() {
        for o in Orientation::candidates(3) {
            let t = [0.2, 0.7];
            let back = o.inverse().map(o.map(t));
            assert!((back[0] - t[0]).abs() < 1e-15 && (back[1] - t[1]).abs() < 1e-15, "{o:?}");
        }
    }

    #[test]
    fn detects_shared_faces_of_adjacent_boxes() {
        let a = Patch::aligned_box(0, 3, [0.0; 3], [1.0; 3]).unwrap();
        let b = Patch::aligned_box(1, 3, [1.0, 0.0, 0.0], [2.0, 1.0, 1.0]).unwrap();
        let found = find_interfaces(&[a, b], 1e-12);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].face_a, Face::new(0, Side::High));
        assert_eq!(found[0].face_b, Face::new(0, Side::Low));
        assert_eq!(found[0].orientation, Orientation::default());
    }

    #[test]
    fn extrusion_keeps_cross_section() {
        let sq = Patch::aligned_box(0, 2, [0.0; 3], [2.0, 1.0, 0.0]).unwrap();
        let cube = sq.extrude(0, 0.0, 3.0).unwrap();
        let x = cube.map_point(&[0.5, 0.5, 0.25]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14 && (x[2] - 0.75).abs() < 1e-14);
        assert!((cube.jacobian(&[0.3, 0.3, 0.3]).unwrap().det - 6.0).abs() < 1e-13);
    }
}
