//! Symmetric interior penalty dG assembly over the broken B-spline space.
//!
//! Every interior face is visited once, from the patch with the lower index,
//! and receives the net contribution of both one-sided visits:
//! `-s(u, v) + 2 p(u, v)` with
//! `s(u, v) = ∫ {alpha grad u}.n [v] + {alpha grad v}.n [u]` and
//! `p(u, v) = ∫ eta (alpha_a / h_a + alpha_b / h_b) [u][v]`.
//! Boundary faces carry the full Nitsche terms.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{apply, dot, Face, GeometryError, InterfaceSpec, Patch, PhysicalMesh};
use crate::quadrature::{
    boundary_rule, gauss_legendre, interface_rule, BoundaryPoint, InterfacePoint, InterfaceSide, QuadratureError,
    TracePoint,
};
use crate::sparse::{CsrMatrix, PatternBuilder};
use crate::spline::{Point, TensorSpace, MAX_DEGREE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Scalar field of the physical coordinates.
pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// One patch with its discretization space and diffusion coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePatch {
    pub geometry: Patch,
    pub space: TensorSpace,
    pub alpha: f64,
}

/// Mesh size entering the penalty weight `eta alpha / h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyScale {
    /// Physical height of the adjacent element normal to the face, per quadrature point.
    #[default]
    LocalNormal,
    /// Largest element diameter of the patch.
    PatchMax,
    /// Diameter of the adjacent element.
    LocalDiameter,
}

impl fmt::Display for PenaltyScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyScale::LocalNormal => "local-normal",
            PenaltyScale::PatchMax => "patch-max",
            PenaltyScale::LocalDiameter => "local-diameter",
        })
    }
}

impl std::str::FromStr for PenaltyScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local-normal" => Ok(PenaltyScale::LocalNormal),
            "patch-max" => Ok(PenaltyScale::PatchMax),
            "local-diameter" => Ok(PenaltyScale::LocalDiameter),
            _ => Err(format!("unknown penalty scale `{s}` (local-normal, patch-max, local-diameter)")),
        }
    }
}

/// `eta = 4 (k + 1) (k + d)`.
pub fn default_penalty(k: usize, d: usize) -> f64 {
    (4 * (k + 1) * (k + d)) as f64
}

/// A boundary face of one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub patch: usize,
    pub face: Face,
}

#[derive(Clone)]
pub struct MultiPatchProblem {
    patches: Vec<DiscretePatch>,
    interfaces: Vec<InterfaceSpec>,
    boundary: Vec<BoundaryFace>,
    source: ScalarFn,
    dirichlet: ScalarFn,
    penalty_eta: f64,
    penalty_scale: PenaltyScale,
    source_singularity: Option<Point>,
    meshes: Vec<PhysicalMesh>,
}

impl fmt::Debug for MultiPatchProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiPatchProblem")
            .field("patches", &self.patches.len())
            .field("interfaces", &self.interfaces)
            .field("boundary", &self.boundary)
            .field("penalty_eta", &self.penalty_eta)
            .field("penalty_scale", &self.penalty_scale)
            .finish()
    }
}

impl MultiPatchProblem {
    /// Builds a problem; every face not listed as an interface is a Dirichlet face.
    /// Interfaces are normalized so that `patch_a < patch_b`.
    pub fn new(
        patches: Vec<DiscretePatch>,
        interfaces: Vec<InterfaceSpec>,
        source: ScalarFn,
        dirichlet: ScalarFn,
    ) -> Result<Self, AssemblyError> {
        if patches.is_empty() {
            return Err(AssemblyError::InvalidProblem("no patches".into()));
        }
        let d = patches[0].geometry.dim();
        let k = patches[0].space.degree();
        for (i, p) in patches.iter().enumerate() {
            if !(p.alpha > 0.0) || !p.alpha.is_finite() {
                return Err(AssemblyError::InvalidProblem(format!("patch {i}: alpha = {} must be positive", p.alpha)));
            }
            if p.geometry.dim() != d || p.space.dim() != d {
                return Err(AssemblyError::InvalidProblem(format!("patch {i}: dimension mismatch")));
            }
            if p.space.degree() != k {
                return Err(AssemblyError::InvalidProblem(format!("patch {i}: degree differs from patch 0")));
            }
            if k > MAX_DEGREE {
                return Err(AssemblyError::InvalidProblem(format!("degree {k} above {MAX_DEGREE}")));
            }
        }
        let mut used = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(interfaces.len());
        for it in interfaces {
            if it.patch_a >= patches.len() || it.patch_b >= patches.len() || it.patch_a == it.patch_b {
                return Err(AssemblyError::InvalidProblem(format!(
                    "interface between patches {} and {} is invalid",
                    it.patch_a, it.patch_b
                )));
            }
            for key in [(it.patch_a, it.face_a), (it.patch_b, it.face_b)] {
                if key.1.dir >= d || !used.insert(key) {
                    return Err(AssemblyError::InvalidProblem(format!(
                        "face {} of patch {} listed in more than one interface",
                        key.1, key.0
                    )));
                }
            }
            normalized.push(if it.patch_a < it.patch_b {
                it
            } else {
                InterfaceSpec {
                    patch_a: it.patch_b,
                    face_a: it.face_b,
                    patch_b: it.patch_a,
                    face_b: it.face_a,
                    orientation: it.orientation.inverse(),
                }
            });
        }
        let boundary = (0..patches.len())
            .flat_map(|patch| Face::all(d).into_iter().map(move |face| BoundaryFace { patch, face }))
            .filter(|b| !used.contains(&(b.patch, b.face)))
            .collect();
        let meshes = patches.iter().map(|p| p.geometry.physical_mesh(&p.space)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            patches,
            interfaces: normalized,
            boundary,
            source,
            dirichlet,
            penalty_eta: default_penalty(k, d),
            penalty_scale: PenaltyScale::default(),
            source_singularity: None,
            meshes,
        })
    }

    pub fn with_penalty(mut self, eta: f64) -> Self {
        self.penalty_eta = eta;
        self
    }

    pub fn with_penalty_scale(mut self, scale: PenaltyScale) -> Self {
        self.penalty_scale = scale;
        self
    }

    /// Point where the source is singular; touching elements get a doubled rule for the load.
    pub fn with_source_singularity(mut self, p: Option<Point>) -> Self {
        self.source_singularity = p;
        self
    }

    pub fn patches(&self) -> &[DiscretePatch] {
        &self.patches
    }

    pub fn interfaces(&self) -> &[InterfaceSpec] {
        &self.interfaces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn dim(&self) -> usize {
        self.patches[0].geometry.dim()
    }

    pub fn degree(&self) -> usize {
        self.patches[0].space.degree()
    }

    pub fn penalty_eta(&self) -> f64 {
        self.penalty_eta
    }

    pub fn penalty_scale(&self) -> PenaltyScale {
        self.penalty_scale
    }

    pub fn source(&self) -> &ScalarFn {
        &self.source
    }

    pub fn dirichlet(&self) -> &ScalarFn {
        &self.dirichlet
    }

    pub fn meshes(&self) -> &[PhysicalMesh] {
        &self.meshes
    }

    pub fn dof_map(&self) -> DofMap {
        DofMap::new(self.patches.iter().map(|p| p.space.num_basis()))
    }

    /// Largest element diameter over all patches.
    pub fn max_element_diameter(&self) -> f64 {
        self.meshes.iter().map(PhysicalMesh::grid_size).fold(0.0, f64::max)
    }

    /// Gauss points per direction: exact for the stiffness integrand on affine maps
    /// and never below the geometry degree plus one.
    pub fn points_per_dir(&self, patch: usize) -> usize {
        let p = &self.patches[patch];
        p.space.degree().max(p.geometry.space().degree()) + 1
    }

    fn face_points_per_dir(&self, a: usize, b: usize) -> usize {
        self.points_per_dir(a).max(self.points_per_dir(b))
    }

    fn side_h(&self, scale: PenaltyScale, patch: usize, t: &TracePoint) -> f64 {
        match scale {
            PenaltyScale::LocalNormal => t.normal_height,
            PenaltyScale::PatchMax => self.meshes[patch].grid_size(),
            PenaltyScale::LocalDiameter => self.meshes[patch].diameter(&t.element),
        }
    }

    /// One-sided penalty weight `eta (alpha_a / h_a + alpha_b / h_b)` of an interface point.
    pub fn interface_weight(&self, it: &InterfaceSpec, q: &InterfacePoint) -> f64 {
        self.interface_weight_with(self.penalty_scale, it, q)
    }

    /// Interface weight with the mesh size taken as `scale` prescribes.
    pub fn interface_weight_with(&self, scale: PenaltyScale, it: &InterfaceSpec, q: &InterfacePoint) -> f64 {
        let (pa, pb) = (&self.patches[it.patch_a], &self.patches[it.patch_b]);
        self.penalty_eta
            * (pa.alpha / self.side_h(scale, it.patch_a, &q.a) + pb.alpha / self.side_h(scale, it.patch_b, &q.b))
    }

    /// Penalty weight `eta alpha / h` of a boundary point.
    pub fn boundary_weight(&self, patch: usize, q: &BoundaryPoint) -> f64 {
        self.boundary_weight_with(self.penalty_scale, patch, q)
    }

    pub fn boundary_weight_with(&self, scale: PenaltyScale, patch: usize, q: &BoundaryPoint) -> f64 {
        self.penalty_eta * self.patches[patch].alpha / self.side_h(scale, patch, &q.trace)
    }

    pub fn interface_points(
        &self,
        it: &InterfaceSpec,
        points_per_dir: usize,
    ) -> Result<Vec<InterfacePoint>, AssemblyError> {
        let (pa, pb) = (&self.patches[it.patch_a], &self.patches[it.patch_b]);
        Ok(interface_rule(
            InterfaceSide { geometry: &pa.geometry, space: &pa.space, face: it.face_a },
            InterfaceSide { geometry: &pb.geometry, space: &pb.space, face: it.face_b },
            it.orientation,
            points_per_dir,
        )?)
    }

    pub fn boundary_points(
        &self,
        b: &BoundaryFace,
        points_per_dir: usize,
    ) -> Result<Vec<BoundaryPoint>, AssemblyError> {
        let p = &self.patches[b.patch];
        Ok(boundary_rule(&p.geometry, &p.space, b.face, points_per_dir)?)
    }

    /// Fills `out` with the functions of `patch` active on `element`, evaluated at `xh`.
    pub fn local_basis(
        &self,
        patch: usize,
        element: [usize; 3],
        xh: &Point,
        offset: usize,
        out: &mut LocalBasis,
    ) -> Result<(), AssemblyError> {
        let p = &self.patches[patch];
        let (x, jac) = p.geometry.regular_jacobian(xh)?;
        let it = jac.inverse_transpose();
        out.x = x;
        out.det = jac.det;
        let d = p.space.dim();
        let k = p.space.degree();
        let mut tabs = [[[0.0; MAX_DEGREE + 1]; 2]; 3];
        let mut first = [0usize; 3];
        for i in 0..d {
            let kv = p.space.direction(i);
            first[i] = kv.first_active(element[i]);
            kv.eval_in_element(element[i], xh[i], 1, &mut tabs[i][..2]);
        }
        fill_from_tables(&p.space, k, d, &first, &tabs, &it, offset, out);
        Ok(())
    }

    /// Discrete solution and its physical gradient at parameter `xh` of `patch`.
    pub fn evaluate(&self, coeffs: &[f64], patch: usize, xh: &Point) -> Result<(Point, f64, Point), AssemblyError> {
        let p = &self.patches[patch];
        let mut element = [0; 3];
        for i in 0..p.space.dim() {
            element[i] = p.space.direction(i).element_of(xh[i]).map_err(GeometryError::from)?;
        }
        let offset = self.dof_map().offset(patch);
        let mut lb = LocalBasis::default();
        self.local_basis(patch, element, xh, offset, &mut lb)?;
        let (u, g) = lb.combine(coeffs);
        Ok((lb.x, u, g))
    }
}

#[allow(clippy::too_many_arguments)]
fn fill_from_tables(
    space: &TensorSpace,
    k: usize,
    d: usize,
    first: &[usize; 3],
    tabs: &[[[f64; MAX_DEGREE + 1]; 2]; 3],
    jit: &[[f64; 3]; 3],
    offset: usize,
    out: &mut LocalBasis,
) {
    out.dofs.clear();
    out.values.clear();
    out.grads.clear();
    let counts = space.basis_counts();
    let n1 = k + 1;
    let n3 = if d == 3 { n1 } else { 1 };
    for c in 0..n3 {
        for b in 0..n1 {
            for a in 0..n1 {
                let loc = [a, b, c];
                let mut v = 1.0;
                let mut gh = [1.0; 3];
                for i in 0..d {
                    v *= tabs[i][0][loc[i]];
                    for (j, g) in gh.iter_mut().enumerate().take(d) {
                        *g *= tabs[i][usize::from(i == j)][loc[i]];
                    }
                }
                if d == 2 {
                    gh[2] = 0.0;
                }
                out.dofs.push(offset + (first[0] + a) + counts[0] * ((first[1] + b) + counts[1] * (first[2] + c)));
                out.values.push(v);
                out.grads.push(apply(jit, &gh, d));
            }
        }
    }
}

/// Active functions at one point: global dofs, values and physical gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalBasis {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
    pub x: Point,
    pub det: f64,
}

impl LocalBasis {
    /// `(u_h, grad u_h)` for global coefficients.
    pub fn combine(&self, coeffs: &[f64]) -> (f64, Point) {
        let mut u = 0.0;
        let mut g = [0.0; 3];
        for ((&dof, &v), gr) in self.dofs.iter().zip(&self.values).zip(&self.grads) {
            let c = coeffs[dof];
            u += c * v;
            for m in 0..3 {
                g[m] += c * gr[m];
            }
        }
        (u, g)
    }
}

/// Patchwise contiguous numbering of the broken space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    offsets: Vec<usize>,
}

impl DofMap {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self { offsets }
    }

    pub fn offset(&self, patch: usize) -> usize {
        self.offsets[patch]
    }

    pub fn patch_range(&self, patch: usize) -> std::ops::Range<usize> {
        self.offsets[patch]..self.offsets[patch + 1]
    }

    pub fn num_patches(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Global index of a local flat index.
    pub fn global(&self, patch: usize, local: usize) -> usize {
        self.offsets[patch] + local
    }
}

/// Assembled linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct DgSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dof_map: DofMap,
}

impl DgSystem {
    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }
}

/// Sparsity pattern: the tensor band of each patch plus interface couplings.
fn build_pattern(problem: &MultiPatchProblem, dofs: &DofMap, iface_points: &[Vec<InterfacePoint>]) -> CsrMatrix {
    let mut pb = PatternBuilder::new(dofs.total());
    for (pi, p) in problem.patches.iter().enumerate() {
        let k = p.space.degree();
        let counts = p.space.basis_counts();
        let d = p.space.dim();
        let off = dofs.offset(pi);
        for flat in 0..p.space.num_basis() {
            let m = p.space.multi_index(flat);
            let lo: Vec<usize> = (0..3).map(|i| if i < d { m[i].saturating_sub(k) } else { 0 }).collect();
            let hi: Vec<usize> = (0..3).map(|i| if i < d { (m[i] + k).min(counts[i] - 1) } else { 0 }).collect();
            let mut cols = Vec::new();
            for c in lo[2]..=hi[2] {
                for b in lo[1]..=hi[1] {
                    for a in lo[0]..=hi[0] {
                        cols.push(off + a + counts[0] * (b + counts[1] * c));
                    }
                }
            }
            pb.add_row_entries(off + flat, cols);
        }
    }
    for (it, points) in problem.interfaces.iter().zip(iface_points) {
        let mut seen = std::collections::HashSet::new();
        let (oa, ob) = (dofs.offset(it.patch_a), dofs.offset(it.patch_b));
        for q in points {
            if !seen.insert((q.a.element, q.b.element)) {
                continue;
            }
            let da = element_dofs(&problem.patches[it.patch_a].space, &q.a.element, oa);
            let db = element_dofs(&problem.patches[it.patch_b].space, &q.b.element, ob);
            pb.add_block(&da, &db);
            pb.add_block(&db, &da);
        }
    }
    pb.build()
}

fn element_dofs(space: &TensorSpace, e: &[usize; 3], offset: usize) -> Vec<usize> {
    let d = space.dim();
    let n1 = space.degree() + 1;
    let counts = space.basis_counts();
    let n3 = if d == 3 { n1 } else { 1 };
    let mut out = Vec::with_capacity(n1.pow(d as u32));
    for c in 0..n3 {
        for b in 0..n1 {
            for a in 0..n1 {
                let i2 = if d == 3 { e[2] + c } else { 0 };
                out.push(offset + (e[0] + a) + counts[0] * ((e[1] + b) + counts[1] * i2));
            }
        }
    }
    out
}

/// Stiffness and load contributions of all patch interiors.
pub fn assemble_volume(
    problem: &MultiPatchProblem,
    matrix: &mut CsrMatrix,
    rhs: &mut [f64],
) -> Result<(), AssemblyError> {
    let dofs = problem.dof_map();
    for (pi, p) in problem.patches.iter().enumerate() {
        let rules = VolumeRules::new(problem.points_per_dir(pi));
        let off = dofs.offset(pi);
        let elements: Vec<_> = p.space.elements().collect();
        let mut sign = 0.0;
        // element matrices are computed in parallel and scattered in element order
        for chunk in elements.chunks(VOLUME_CHUNK) {
            let blocks: Vec<_> = chunk
                .par_iter()
                .map_init(LocalBasis::default, |lb, e| element_block(problem, pi, *e, off, &rules, lb))
                .collect();
            for block in blocks {
                let block = block?;
                if sign == 0.0 {
                    sign = block.sign;
                } else if block.sign != sign {
                    return Err(GeometryError::Orientation { patch: pi, param: block.param, det: block.det }.into());
                }
                matrix.add_block(&block.dofs, &block.dofs, &block.matrix);
                for (dof, l) in block.dofs.iter().zip(&block.load) {
                    rhs[*dof] += l;
                }
            }
        }
    }
    Ok(())
}

const VOLUME_CHUNK: usize = 512;

struct VolumeRules {
    gx: Vec<f64>,
    gw: Vec<f64>,
    gx2: Vec<f64>,
    gw2: Vec<f64>,
}

impl VolumeRules {
    fn new(nq: usize) -> Self {
        let (gx, gw) = gauss_legendre(nq);
        let (gx2, gw2) = gauss_legendre(2 * nq);
        Self { gx, gw, gx2, gw2 }
    }
}

struct ElementBlock {
    dofs: Vec<usize>,
    matrix: Vec<f64>,
    load: Vec<f64>,
    sign: f64,
    // where the Jacobian sign was last seen, for error reports
    param: Point,
    det: f64,
}

fn element_block(
    problem: &MultiPatchProblem,
    pi: usize,
    e: [usize; 3],
    off: usize,
    rules: &VolumeRules,
    lb: &mut LocalBasis,
) -> Result<ElementBlock, AssemblyError> {
    let p = &problem.patches[pi];
    let d = p.space.dim();
    let nloc = (p.space.degree() + 1).pow(d as u32);
    let mut load = vec![0.0; nloc];
    let mut sign = 0.0;
    let (mut param, mut det) = ([0.0; 3], 0.0);
    let bx = p.space.element_box(&e);
    let points = tensor_points(&bx, d, &rules.gx, &rules.gw);
    // stiffness = G G^T with one column per (point, direction) scaled by sqrt(w |det| alpha)
    let mut g = nalgebra::DMatrix::<f64>::zeros(nloc, d * points.len());
    for (q, (xh, w)) in points.iter().enumerate() {
        problem.local_basis(pi, e, xh, off, lb)?;
        (param, det) = (*xh, lb.det);
        let s = lb.det.signum();
        if sign == 0.0 {
            sign = s;
        } else if s != sign {
            return Err(GeometryError::Orientation { patch: pi, param: *xh, det: lb.det }.into());
        }
        let c = (w * lb.det.abs() * p.alpha).sqrt();
        for (a, ga) in lb.grads.iter().enumerate() {
            for i in 0..d {
                g[(a, q * d + i)] = c * ga[i];
            }
        }
    }
    let gram = &g * g.transpose();
    let touches = problem.source_singularity.is_some_and(|s| element_touches(&p.geometry, &bx, d, &s));
    let (lx, lw) = if touches { (&rules.gx2, &rules.gw2) } else { (&rules.gx, &rules.gw) };
    for (xh, w) in tensor_points(&bx, d, lx, lw) {
        problem.local_basis(pi, e, &xh, off, lb)?;
        let fw = w * lb.det.abs() * (problem.source)(&lb.x);
        for (l, v) in load.iter_mut().zip(&lb.values) {
            *l += fw * v;
        }
    }
    // exact symmetry regardless of the product's rounding
    let mut local = vec![0.0; nloc * nloc];
    for a in 0..nloc {
        for b in a..nloc {
            local[a * nloc + b] = gram[(a, b)];
            local[b * nloc + a] = gram[(a, b)];
        }
    }
    Ok(ElementBlock { dofs: element_dofs(&p.space, &e, off), matrix: local, load, sign, param, det })
}

fn element_touches(geo: &Patch, bx: &[(f64, f64); 3], d: usize, s: &Point) -> bool {
    (0..1usize << d).any(|c| {
        let mut p = [0.0; 3];
        for i in 0..d {
            p[i] = if (c >> i) & 1 == 1 { bx[i].1 } else { bx[i].0 };
        }
        geo.map_point(&p).is_ok_and(|x| crate::geometry::distance(&x, s) < 1e-10)
    })
}

/// Tensor Gauss points on a parametric box.
pub fn tensor_points(bx: &[(f64, f64); 3], d: usize, gx: &[f64], gw: &[f64]) -> Vec<(Point, f64)> {
    let n = gx.len();
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for f in 0..total {
        let mut p = [0.0; 3];
        let mut w = 1.0;
        let mut rest = f;
        for i in 0..d {
            let q = rest % n;
            rest /= n;
            let len = bx[i].1 - bx[i].0;
            p[i] = bx[i].0 + len * gx[q];
            w *= gw[q] * len;
        }
        out.push((p, w));
    }
    out
}

/// Net interior-face contributions.
pub fn assemble_interface(
    problem: &MultiPatchProblem,
    points: &[Vec<InterfacePoint>],
    matrix: &mut CsrMatrix,
) -> Result<(), AssemblyError> {
    let dofs = problem.dof_map();
    let mut la = LocalBasis::default();
    let mut lb = LocalBasis::default();
    // consecutive points of one face cell share their element pair; their
    // contributions are summed before a single scatter
    let mut cell = LocalBlock::default();
    for (it, qs) in problem.interfaces.iter().zip(points) {
        let (pa, pb) = (&problem.patches[it.patch_a], &problem.patches[it.patch_b]);
        let (oa, ob) = (dofs.offset(it.patch_a), dofs.offset(it.patch_b));
        for q in qs {
            problem.local_basis(it.patch_a, q.a.element, &q.a.param, oa, &mut la)?;
            problem.local_basis(it.patch_b, q.b.element, &q.b.param, ob, &mut lb)?;
            let n = q.a.normal;
            let w2 = 2.0 * problem.interface_weight(it, q);
            if !cell.starts_with(&la.dofs, &lb.dofs) {
                cell.flush(matrix);
                cell.reset(&la.dofs, &lb.dofs);
            }
            // jump factor s_f phi_f and averaged flux 1/2 alpha grad phi_f . n of each function
            cell.jump.clear();
            cell.flux.clear();
            for (side, alpha, sign) in [(&la, pa.alpha, 1.0), (&lb, pb.alpha, -1.0)] {
                for (&v, g) in side.values.iter().zip(&side.grads) {
                    cell.jump.push(sign * v);
                    cell.flux.push(0.5 * alpha * dot(g, &n));
                }
            }
            let m = cell.dofs.len();
            for f in 0..m {
                let (jf, ff) = (cell.jump[f], cell.flux[f]);
                let row = &mut cell.values[f * m..(f + 1) * m];
                for ((r, &jg), &fg) in row.iter_mut().zip(&cell.jump).zip(&cell.flux) {
                    *r += q.weight * (-(fg * jf + ff * jg) + w2 * jf * jg);
                }
            }
        }
        cell.flush(matrix);
    }
    Ok(())
}

/// Dense block accumulated over the quadrature points of one face cell.
#[derive(Debug, Default)]
struct LocalBlock {
    dofs: Vec<usize>,
    split: usize,
    values: Vec<f64>,
    jump: Vec<f64>,
    flux: Vec<f64>,
}

impl LocalBlock {
    fn starts_with(&self, a: &[usize], b: &[usize]) -> bool {
        !self.dofs.is_empty() && self.split == a.len() && self.dofs[..self.split] == *a && self.dofs[self.split..] == *b
    }

    fn reset(&mut self, a: &[usize], b: &[usize]) {
        self.dofs.clear();
        self.dofs.extend_from_slice(a);
        self.dofs.extend_from_slice(b);
        self.split = a.len();
        self.values.clear();
        self.values.resize(self.dofs.len() * self.dofs.len(), 0.0);
    }

    fn flush(&mut self, matrix: &mut CsrMatrix) {
        if !self.dofs.is_empty() {
            matrix.add_block(&self.dofs, &self.dofs, &self.values);
            self.dofs.clear();
        }
    }
}

/// Nitsche terms on Dirichlet faces.
pub fn assemble_boundary(
    problem: &MultiPatchProblem,
    points: &[Vec<BoundaryPoint>],
    matrix: &mut CsrMatrix,
    rhs: &mut [f64],
) -> Result<(), AssemblyError> {
    let dofs = problem.dof_map();
    let mut lb = LocalBasis::default();
    let mut cell = LocalBlock::default();
    for (bf, qs) in problem.boundary.iter().zip(points) {
        let p = &problem.patches[bf.patch];
        let off = dofs.offset(bf.patch);
        for q in qs {
            problem.local_basis(bf.patch, q.trace.element, &q.trace.param, off, &mut lb)?;
            let n = q.trace.normal;
            let pen = problem.boundary_weight(bf.patch, q);
            let ud = (problem.dirichlet)(&q.x);
            if !cell.starts_with(&lb.dofs, &[]) {
                cell.flush(matrix);
                cell.reset(&lb.dofs, &[]);
            }
            cell.flux.clear();
            cell.flux.extend(lb.grads.iter().map(|g| p.alpha * dot(g, &n)));
            let m = lb.dofs.len();
            for f in 0..m {
                let (vf, ff) = (lb.values[f], cell.flux[f]);
                let row = &mut cell.values[f * m..(f + 1) * m];
                for ((r, &vg), &fg) in row.iter_mut().zip(&lb.values).zip(&cell.flux) {
                    *r += q.weight * (-(fg * vf + ff * vg) + pen * vf * vg);
                }
                rhs[lb.dofs[f]] += q.weight * ud * (pen * vf - ff);
            }
        }
        cell.flush(matrix);
    }
    Ok(())
}

/// Quadrature points per interface and per boundary face.
pub type FaceRules = (Vec<Vec<InterfacePoint>>, Vec<Vec<BoundaryPoint>>);

/// Quadrature on every interior and boundary face at the assembly resolution.
pub fn face_rules(problem: &MultiPatchProblem, extra_points: usize) -> Result<FaceRules, AssemblyError> {
    let iface = problem
        .interfaces
        .iter()
        .map(|it| problem.interface_points(it, problem.face_points_per_dir(it.patch_a, it.patch_b) + extra_points))
        .collect::<Result<Vec<_>, _>>()?;
    let bnd = problem
        .boundary
        .iter()
        .map(|b| problem.boundary_points(b, problem.points_per_dir(b.patch) + extra_points))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((iface, bnd))
}

/// Full system matrix and load vector.
pub fn assemble(problem: &MultiPatchProblem) -> Result<DgSystem, AssemblyError> {
    let dof_map = problem.dof_map();
    let (iface, bnd) = face_rules(problem, 0)?;
    let mut matrix = build_pattern(problem, &dof_map, &iface);
    let mut rhs = vec![0.0; dof_map.total()];
    assemble_volume(problem, &mut matrix, &mut rhs)?;
    assemble_interface(problem, &iface, &mut matrix)?;
    assemble_boundary(problem, &bnd, &mut matrix, &mut rhs)?;
    Ok(DgSystem { matrix, rhs, dof_map })
}
