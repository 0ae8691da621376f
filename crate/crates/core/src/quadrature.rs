//! Gauss–Legendre rules on elements, boundary faces and (possibly
//! non-matching) patch interfaces.

use thiserror::Error;

use crate::geometry::{distance, Face, GeometryError, Orientation, Patch};
use crate::spline::{Point, TensorSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("interface patch {patch_a}:{face_a} / patch {patch_b}:{face_b}: point {point:?} not found on the far side ({source})")]
    Interface {
        patch_a: usize,
        face_a: Face,
        patch_b: usize,
        face_b: Face,
        point: Point,
        #[source]
        source: Box<GeometryError>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            z = 0.0;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

/// Tensor Gauss rule on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly per direction.
    pub order: usize,
}

impl QuadRule {
    pub fn tensor(points_per_dir: usize, dim: usize) -> Self {
        let (x, w) = gauss_legendre(points_per_dir);
        let n = points_per_dir;
        let total = n.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for f in 0..total {
            let mut p = [0.0; 3];
            let mut wt = 1.0;
            let mut rest = f;
            for pi in p.iter_mut().take(dim) {
                let q = rest % n;
                rest /= n;
                *pi = x[q];
                wt *= w[q];
            }
            points.push(p);
            weights.push(wt);
        }
        Self { dim, points, weights, order: 2 * n - 1 }
    }

    /// Rule mapped onto an axis-aligned parametric box.
    pub fn on_box(&self, bx: &[(f64, f64); 3]) -> Vec<(Point, f64)> {
        let mut vol = 1.0;
        for b in bx.iter().take(self.dim) {
            vol *= b.1 - b.0;
        }
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| {
                let mut q = [0.0; 3];
                for i in 0..self.dim {
                    q[i] = bx[i].0 + (bx[i].1 - bx[i].0) * p[i];
                }
                (q, w * vol)
            })
            .collect()
    }
}

/// `k + 1` Gauss points per direction.
pub fn element_rule(k: usize, dim: usize) -> QuadRule {
    QuadRule::tensor(k + 1, dim)
}

/// Sorted union of two breakpoint sets, merging entries closer than `tol`.
pub fn merge_breakpoints(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for v in all {
        match out.last() {
            Some(&last) if (v - last).abs() <= tol => {}
            _ => out.push(v),
        }
    }
    out
}

/// A quadrature point on one side of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub param: Point,
    /// Element (multi-index) of the discretization space containing the point.
    pub element: [usize; 3],
    /// Outward unit normal of this side's patch.
    pub normal: Point,
    /// Physical normal height of the adjacent element.
    pub normal_height: f64,
}

/// Boundary-face quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub x: Point,
    /// Gauss weight times surface measure.
    pub weight: f64,
    pub trace: TracePoint,
}

/// Interface quadrature point seen from both patches; normal from side `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePoint {
    pub x: Point,
    pub weight: f64,
    pub a: TracePoint,
    pub b: TracePoint,
}

fn element_at(space: &TensorSpace, param: &Point) -> [usize; 3] {
    let mut e = [0; 3];
    for i in 0..space.dim() {
        e[i] = space.direction(i).element_of(param[i].clamp(0.0, 1.0)).unwrap_or(0);
    }
    e
}

fn adjacent_normal_size(space: &TensorSpace, face: Face) -> f64 {
    let sizes = space.direction(face.dir).element_sizes();
    match face.side {
        crate::geometry::Side::Low => sizes[0],
        crate::geometry::Side::High => sizes[sizes.len() - 1],
    }
}

/// Per-direction face partitions from a discretization space.
fn face_breaks(space: &TensorSpace, face: Face) -> Vec<Vec<f64>> {
    face.tangents(space.dim()).into_iter().map(|i| space.direction(i).breakpoints().to_vec()).collect()
}

/// Gauss cells over a (d-1)-dimensional partition: (lower, upper) bounds per cell.
fn cells(breaks: &[Vec<f64>]) -> Vec<[(f64, f64); 2]> {
    let mut out = Vec::new();
    match breaks.len() {
        1 => {
            for w in breaks[0].windows(2) {
                out.push([(w[0], w[1]), (0.0, 1.0)]);
            }
        }
        2 => {
            for w1 in breaks[1].windows(2) {
                for w0 in breaks[0].windows(2) {
                    out.push([(w0[0], w0[1]), (w1[0], w1[1])]);
                }
            }
        }
        _ => unreachable!("faces are one- or two-dimensional"),
    }
    out
}

fn cell_points(cell: &[(f64, f64); 2], fdim: usize, x: &[f64], w: &[f64]) -> Vec<([f64; 2], f64)> {
    let n = x.len();
    let mut out = Vec::new();
    let total = n.pow(fdim as u32);
    let mut area = 1.0;
    for c in cell.iter().take(fdim) {
        area *= c.1 - c.0;
    }
    for f in 0..total {
        let mut t = [0.0; 2];
        let mut wt = area;
        let mut rest = f;
        for (m, tm) in t.iter_mut().enumerate().take(fdim) {
            let q = rest % n;
            rest /= n;
            *tm = cell[m].0 + (cell[m].1 - cell[m].0) * x[q];
            wt *= w[q];
        }
        out.push((t, wt));
    }
    out
}

/// Gauss rule over a boundary face, cell by cell of the discretization mesh.
pub fn boundary_rule(
    geometry: &Patch,
    space: &TensorSpace,
    face: Face,
    points_per_dir: usize,
) -> Result<Vec<BoundaryPoint>, QuadratureError> {
    let d = geometry.dim();
    let (gx, gw) = gauss_legendre(points_per_dir);
    let delta = adjacent_normal_size(space, face);
    let mut out = Vec::new();
    for cell in cells(&face_breaks(space, face)) {
        for (t, w) in cell_points(&cell, d - 1, &gx, &gw) {
            let fp = geometry.face_point(face, &t)?;
            out.push(BoundaryPoint {
                x: fp.x,
                weight: w * fp.measure,
                trace: TracePoint {
                    param: fp.param,
                    element: element_at(space, &fp.param),
                    normal: fp.normal,
                    normal_height: delta * fp.normal_stretch,
                },
            });
        }
    }
    Ok(out)
}

/// One side of an interface: patch, its discretization space and the face.
#[derive(Clone, Copy)]
pub struct InterfaceSide<'a> {
    pub geometry: &'a Patch,
    pub space: &'a TensorSpace,
    pub face: Face,
}

/// Matched quadrature on a shared face.
///
/// The face is cut by the union of both sides' knot lines so that the
/// integrand is polynomial on each cell from either side; every physical
/// point is then located in patch `b` by Newton inversion, seeded with the
/// parametric correspondence given by `orientation` (face `a` -> face `b`).
pub fn interface_rule(
    a: InterfaceSide<'_>,
    b: InterfaceSide<'_>,
    orientation: Orientation,
    points_per_dir: usize,
) -> Result<Vec<InterfacePoint>, QuadratureError> {
    let d = a.geometry.dim();
    let fdim = d - 1;
    let breaks_a = face_breaks(a.space, a.face);
    let breaks_b = face_breaks(b.space, b.face);
    // express b's knot lines in a's face coordinates
    let inv = orientation.inverse();
    let mut merged = Vec::with_capacity(fdim);
    for m in 0..fdim {
        let src = if orientation.permute { 1 - m } else { m };
        let mapped: Vec<f64> = breaks_b[if fdim == 1 { 0 } else { src }]
            .iter()
            .map(|&t| {
                let mut probe = [0.5; 2];
                probe[if fdim == 1 { 0 } else { src }] = t;
                inv.map(probe)[m]
            })
            .collect();
        merged.push(merge_breakpoints(&breaks_a[m], &mapped, 1e-13));
    }
    let (gx, gw) = gauss_legendre(points_per_dir);
    let delta_a = adjacent_normal_size(a.space, a.face);
    let delta_b = adjacent_normal_size(b.space, b.face);
    let mut out = Vec::new();
    for cell in cells(&merged) {
        for (t, w) in cell_points(&cell, fdim, &gx, &gw) {
            let fa = a.geometry.face_point(a.face, &t)?;
            let seed = b.face.lift(d, &orientation.map(t));
            let located = a_locate(b.geometry, &fa.x, seed).map_err(|source| QuadratureError::Interface {
                patch_a: a.geometry.id(),
                face_a: a.face,
                patch_b: b.geometry.id(),
                face_b: b.face,
                point: fa.x,
                source: Box::new(source),
            })?;
            let tb = b.face.project(d, &located);
            let fb = b.geometry.face_point(b.face, &tb[..fdim])?;
            out.push(InterfacePoint {
                x: fa.x,
                weight: w * fa.measure,
                a: TracePoint {
                    param: fa.param,
                    element: element_at(a.space, &fa.param),
                    normal: fa.normal,
                    normal_height: delta_a * fa.normal_stretch,
                },
                b: TracePoint {
                    param: fb.param,
                    element: element_at(b.space, &fb.param),
                    normal: fb.normal,
                    normal_height: delta_b * fb.normal_stretch,
                },
            });
        }
    }
    Ok(out)
}

fn a_locate(patch: &Patch, x: &Point, seed: Point) -> Result<Point, GeometryError> {
    let scale = patch.control_points().iter().map(|c| distance(c, &[0.0; 3])).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    if let Ok(y) = patch.map_point(&seed) {
        if distance(&y, x) <= tol {
            return Ok(seed);
        }
    }
    patch.invert_point_from(x, seed, tol, 50).or_else(|_| patch.invert_point_multistart(x, tol, 50))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;
    use crate::spline::KnotVector;

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_legendre(2);
        let off = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - off)).abs() < 1e-15 && (x[1] - (0.5 + off)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exactness() {
        let r = element_rule(1, 1);
        let cube: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(3)).sum();
        assert!((cube - 0.25).abs() < 1e-16);
        let r = element_rule(2, 2);
        let v: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(w.iter().all(|&wi| wi > 0.0));
            let deg = 2 * n - 1;
            let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert!((integral - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn merged_partition() {
        let m = merge_breakpoints(&[0.0, 0.5, 1.0], &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 1e-13);
        assert_eq!(m, vec![0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0]);
        let same = merge_breakpoints(&[0.0, 0.25, 1.0], &[0.0, 0.25, 1.0], 1e-13);
        assert_eq!(same, vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn non_matching_interface_cells() {
        let a = Patch::aligned_box(0, 2, [0.0; 3], [1.0, 1.0, 0.0]).unwrap();
        let b = Patch::aligned_box(1, 2, [1.0, 0.0, 0.0], [2.0, 1.0, 0.0]).unwrap();
        let sa = TensorSpace::new(vec![KnotVector::uniform(1, 2).unwrap(); 2]).unwrap();
        let sb = TensorSpace::new(vec![KnotVector::uniform(1, 3).unwrap(); 2]).unwrap();
        let rule = interface_rule(
            InterfaceSide { geometry: &a, space: &sa, face: Face::new(0, Side::High) },
            InterfaceSide { geometry: &b, space: &sb, face: Face::new(0, Side::Low) },
            Orientation::default(),
            2,
        )
        .unwrap();
        assert_eq!(rule.len(), 4 * 2);
        let len: f64 = rule.iter().map(|q| q.weight).sum();
        assert!((len - 1.0).abs() < 1e-15);
        for q in &rule {
            assert!((q.a.param[1] - q.b.param[1]).abs() < 1e-14);
            assert_eq!(q.b.param[0], 0.0);
            assert!((q.a.normal[0] - 1.0).abs() < 1e-15 && (q.b.normal[0] + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn flipped_interface_locates_points() {
        // b parameterized in the opposite direction along the shared edge
        let a = Patch::aligned_box(0, 2, [0.0; 3], [1.0, 1.0, 0.0]).unwrap();
        let b = Patch::multilinear(1, &[[1.0, 1.0, 0.0], [2.0, 1.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let s = TensorSpace::uniform(2, 2, 3).unwrap();
        let rule = interface_rule(
            InterfaceSide { geometry: &a, space: &s, face: Face::new(0, Side::High) },
            InterfaceSide { geometry: &b, space: &s, face: Face::new(0, Side::Low) },
            Orientation { permute: false, flip: [true, false] },
            3,
        )
        .unwrap();
        for q in &rule {
            assert!((q.a.param[1] + q.b.param[1] - 1.0).abs() < 1e-12);
        }
    }
}
