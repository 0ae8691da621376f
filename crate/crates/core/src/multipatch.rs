//! Multipatch geometry files.
//!
//! A file is TOML. Every `[[patch]]` lists its dimension, the geometry degree,
//! one open knot vector per parametric direction, the control points with the
//! first direction running fastest, and the constant diffusion coefficient:
//!
//! ```toml
//! name = "two-squares"
//!
//! [[patch]]
//! dim = 2
//! degree = 1
//! knots = [[0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]]
//! control_points = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
//! alpha = 1.0
//!
//! [[interface]]
//! patch_a = 0
//! face_a = "u1"
//! patch_b = 1
//! face_b = "u0"
//! permute = false
//! flip = [false, false]
//!
//! [exact]
//! kind = "linear"
//! coeffs = [1.0, 2.0, 0.0, 0.0]
//! ```
//!
//! Faces are named `u0 u1 v0 v1 w0 w1` (direction, then the fixed parameter).
//! When no `[[interface]]` table is given the interfaces are detected from the
//! geometry. The optional `[singularity]` table drives mesh grading and
//! `[[recommended]]` lists `(k, mu)` pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{find_interfaces, Face, GeometryError, InterfaceSpec, Orientation, Patch};
use crate::problems::{BenchmarkCase, ExactSolution, Singularity};
use crate::spline::{KnotVector, Point, SplineError, TensorSpace};

/// Tolerance for matching faces when interfaces are detected.
const DETECT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MultipatchError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed multipatch file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize multipatch file: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("patch {patch}: {reason}")]
    Patch { patch: usize, reason: String },
    #[error("interface {index}: {reason}")]
    Interface { index: usize, reason: String },
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchEntry {
    pub dim: usize,
    pub degree: usize,
    pub knots: Vec<Vec<f64>>,
    pub control_points: Vec<Vec<f64>>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceEntry {
    pub patch_a: usize,
    pub face_a: String,
    pub patch_b: usize,
    pub face_b: String,
    #[serde(default)]
    pub permute: bool,
    #[serde(default)]
    pub flip: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recommended {
    pub k: usize,
    pub mu: f64,
}

/// On-disk form of a benchmark case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipatchFile {
    pub name: String,
    #[serde(rename = "patch")]
    pub patches: Vec<PatchEntry>,
    #[serde(rename = "interface", default, skip_serializing_if = "Vec::is_empty")]
    pub interfaces: Vec<InterfaceEntry>,
    pub exact: ExactSolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singularity: Option<Singularity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recommended: Vec<Recommended>,
}

impl MultipatchFile {
    pub fn from_toml_str(s: &str) -> Result<Self, MultipatchError> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String, MultipatchError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, MultipatchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| MultipatchError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), MultipatchError> {
        std::fs::write(path, self.to_toml_string()?)
            .map_err(|source| MultipatchError::Io { path: path.display().to_string(), source })
    }

    pub fn from_case(case: &BenchmarkCase) -> Self {
        let patches = case
            .patches
            .iter()
            .zip(&case.alpha)
            .map(|(p, &alpha)| PatchEntry {
                dim: p.dim(),
                degree: p.space().degree(),
                knots: p.space().directions().iter().map(|kv| kv.knots().to_vec()).collect(),
                control_points: p.control_points().iter().map(|c| c[..p.dim()].to_vec()).collect(),
                alpha,
            })
            .collect();
        let interfaces = case
            .interfaces
            .iter()
            .map(|it| InterfaceEntry {
                patch_a: it.patch_a,
                face_a: it.face_a.to_string(),
                patch_b: it.patch_b,
                face_b: it.face_b.to_string(),
                permute: it.orientation.permute,
                flip: it.orientation.flip,
            })
            .collect();
        Self {
            name: case.name.clone(),
            patches,
            interfaces,
            exact: case.exact.clone(),
            singularity: case.singularity,
            recommended: case.recommended.iter().map(|&(k, mu)| Recommended { k, mu }).collect(),
        }
    }

    pub fn into_case(self) -> Result<BenchmarkCase, MultipatchError> {
        if self.patches.is_empty() {
            return Err(MultipatchError::Patch { patch: 0, reason: "the file lists no patches".into() });
        }
        let mut patches = Vec::with_capacity(self.patches.len());
        let mut alpha = Vec::with_capacity(self.patches.len());
        for (i, entry) in self.patches.iter().enumerate() {
            patches.push(build_patch(i, entry)?);
            alpha.push(entry.alpha);
        }
        let interfaces = if self.interfaces.is_empty() {
            find_interfaces(&patches, DETECT_TOL)
        } else {
            self.interfaces
                .iter()
                .enumerate()
                .map(|(index, e)| build_interface(index, e, patches.len()))
                .collect::<Result<_, _>>()?
        };
        Ok(BenchmarkCase {
            name: self.name,
            patches,
            alpha,
            interfaces,
            exact: self.exact,
            singularity: self.singularity,
            recommended: self.recommended.into_iter().map(|r| (r.k, r.mu)).collect(),
        })
    }
}

fn build_patch(i: usize, e: &PatchEntry) -> Result<Patch, MultipatchError> {
    let bad = |reason: String| MultipatchError::Patch { patch: i, reason };
    if !(2..=3).contains(&e.dim) {
        return Err(bad(format!("dimension {} is not 2 or 3", e.dim)));
    }
    if e.knots.len() != e.dim {
        return Err(bad(format!("{} knot vectors for a {}-dimensional patch", e.knots.len(), e.dim)));
    }
    if !(e.alpha > 0.0 && e.alpha.is_finite()) {
        return Err(bad(format!("alpha = {} must be positive", e.alpha)));
    }
    let dirs = e.knots.iter().map(|k| KnotVector::new(e.degree, k.clone())).collect::<Result<Vec<_>, _>>()?;
    let space = TensorSpace::new(dirs)?;
    let mut cps = Vec::with_capacity(e.control_points.len());
    for (j, c) in e.control_points.iter().enumerate() {
        if c.len() != e.dim {
            return Err(bad(format!("control point {j} has {} coordinates, expected {}", c.len(), e.dim)));
        }
        let mut p: Point = [0.0; 3];
        p[..e.dim].copy_from_slice(c);
        cps.push(p);
    }
    Ok(Patch::new(i, space, cps)?)
}

fn build_interface(index: usize, e: &InterfaceEntry, n: usize) -> Result<InterfaceSpec, MultipatchError> {
    let bad = |reason: String| MultipatchError::Interface { index, reason };
    let face = |s: &str| s.parse::<Face>().map_err(|err| bad(format!("{err}")));
    if e.patch_a >= n || e.patch_b >= n {
        return Err(bad(format!("patch index out of range (there are {n} patches)")));
    }
    Ok(InterfaceSpec {
        patch_a: e.patch_a,
        face_a: face(&e.face_a)?,
        patch_b: e.patch_b,
        face_b: face(&e.face_b)?,
        orientation: Orientation { permute: e.permute, flip: e.flip },
    })
}

impl BenchmarkCase {
    pub fn to_toml_string(&self) -> Result<String, MultipatchError> {
        MultipatchFile::from_case(self).to_toml_string()
    }

    pub fn from_toml_str(s: &str) -> Result<Self, MultipatchError> {
        MultipatchFile::from_toml_str(s)?.into_case()
    }

    pub fn load(path: &Path) -> Result<Self, MultipatchError> {
        MultipatchFile::load(path)?.into_case()
    }
}
