//! Open knot vectors, Cox–de Boor basis evaluation and tensor-product spaces.
//!
//! Knot vectors are clamped on `[0, 1]` with simple interior knots, so every
//! nonempty span is an element and exactly `degree + 1` functions are active
//! on it. A parameter sitting on a breakpoint is assigned to the span on its
//! right, except `x = 1` which belongs to the last span.

use thiserror::Error;

/// Highest polynomial degree supported by the stack-allocated evaluators.
pub const MAX_DEGREE: usize = 7;

/// Coordinates in parameter or physical space; unused trailing entries are 0.
pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("parameter {value} lies outside [0, 1]")]
    OutOfDomain { value: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("invalid tensor space: {0}")]
    InvalidTensor(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self, SplineError> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(SplineError::InvalidKnots(format!("degree {degree} not in 1..={MAX_DEGREE}")));
        }
        let m = knots.len();
        if m < 2 * (degree + 1) {
            return Err(SplineError::InvalidKnots(format!("{m} knots cannot hold an open vector of degree {degree}")));
        }
        if knots[..=degree].iter().any(|&t| t != 0.0) {
            return Err(SplineError::InvalidKnots("first degree+1 knots must equal 0".into()));
        }
        if knots[m - degree - 1..].iter().any(|&t| t != 1.0) {
            return Err(SplineError::InvalidKnots("last degree+1 knots must equal 1".into()));
        }
        let interior = &knots[degree..m - degree];
        if interior.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SplineError::InvalidKnots("interior knots must be simple and strictly increasing".into()));
        }
        Ok(Self { degree, knots })
    }

    /// Builds the open knot vector whose distinct knots are `breaks`.
    pub fn from_breakpoints(degree: usize, breaks: &[f64]) -> Result<Self, SplineError> {
        if breaks.len() < 2 {
            return Err(SplineError::InvalidKnots("need at least two breakpoints".into()));
        }
        let mut knots = Vec::with_capacity(breaks.len() + 2 * degree);
        knots.extend(std::iter::repeat_n(breaks[0], degree));
        knots.extend_from_slice(breaks);
        knots.extend(std::iter::repeat_n(breaks[breaks.len() - 1], degree));
        Self::new(degree, knots)
    }

    pub fn uniform(degree: usize, elements: usize) -> Result<Self, SplineError> {
        if elements == 0 {
            return Err(SplineError::InvalidKnots("need at least one element".into()));
        }
        let breaks: Vec<f64> = (0..=elements).map(|j| j as f64 / elements as f64).collect();
        Self::from_breakpoints(degree, &breaks)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knots, `0 = b_0 < b_1 < ... < b_n = 1`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[self.degree..self.knots.len() - self.degree]
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints().len() - 1
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        let b = self.breakpoints();
        (b[e], b[e + 1])
    }

    pub fn element_sizes(&self) -> Vec<f64> {
        self.breakpoints().windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the first basis function active on element `e`.
    pub fn first_active(&self, e: usize) -> usize {
        e
    }

    /// Element containing `x` under the right-continuous convention.
    pub fn element_of(&self, x: f64) -> Result<usize, SplineError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(SplineError::OutOfDomain { value: x });
        }
        let b = self.breakpoints();
        let n = b.len() - 1;
        if x >= b[n - 1] {
            return Ok(n - 1);
        }
        // last breakpoint <= x
        let idx = b.partition_point(|&t| t <= x);
        Ok(idx - 1)
    }

    /// The `degree + 1` basis functions nonzero at `x`.
    pub fn eval_basis(&self, x: f64) -> Result<(usize, Vec<f64>), SplineError> {
        let e = self.element_of(x)?;
        let mut out = [[0.0; MAX_DEGREE + 1]; 1];
        self.eval_in_element(e, x, 0, &mut out);
        Ok((e, out[0][..=self.degree].to_vec()))
    }

    /// First derivatives of the active basis functions at `x`.
    pub fn eval_basis_deriv(&self, x: f64) -> Result<(usize, Vec<f64>), SplineError> {
        let (first, ders) = self.eval_basis_derivs(x, 1)?;
        Ok((first, ders.into_iter().nth(1).unwrap()))
    }

    /// Values and derivatives up to `order`; `result[r][j]` is the r-th
    /// derivative of basis function `first + j`.
    pub fn eval_basis_derivs(&self, x: f64, order: usize) -> Result<(usize, Vec<Vec<f64>>), SplineError> {
        let e = self.element_of(x)?;
        let mut out = vec![[0.0; MAX_DEGREE + 1]; order + 1];
        self.eval_in_element(e, x, order, &mut out);
        Ok((e, out.iter().map(|row| row[..=self.degree].to_vec()).collect()))
    }

    /// Cox–de Boor recursion with derivatives on a known element; `x` is
    /// not range checked so traces just outside an element can be taken.
    pub fn eval_in_element(&self, e: usize, x: f64, order: usize, out: &mut [[f64; MAX_DEGREE + 1]]) {
        let p = self.degree;
        let span = e + p;
        let u = &self.knots;
        let mut ndu = [[0.0f64; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for j in 0..=p {
            out[0][j] = ndu[j][p];
        }
        let n = order.min(p);
        for row in out.iter_mut().skip(n + 1) {
            row.fill(0.0);
        }
        if n == 0 {
            return;
        }
        let pi = p as isize;
        let mut a = [[0.0f64; MAX_DEGREE + 1]; 2];
        for r in 0..=pi {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n as isize {
                let mut d = 0.0;
                let rk = r - k;
                let pk = pi - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { -rk };
                let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
                for j in j1..=j2 {
                    let (ju, rkj) = (j as usize, (rk + j) as usize);
                    a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][rkj];
                    d += a[s2][ju] * ndu[rkj][pk as usize];
                }
                if r <= pk {
                    let ku = k as usize;
                    a[s2][ku] = -a[s1][ku - 1] / ndu[(pk + 1) as usize][r as usize];
                    d += a[s2][ku] * ndu[r as usize][pk as usize];
                }
                out[k as usize][r as usize] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=n {
            for j in 0..=p {
                out[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
    }

    /// Largest ratio between the sizes of two adjacent elements.
    pub fn max_adjacent_ratio(&self) -> f64 {
        self.element_sizes().windows(2).map(|w| (w[0] / w[1]).max(w[1] / w[0])).fold(1.0, f64::max)
    }

    /// Every adjacent pair satisfies `1/sigma <= h_m / h_{m+1} <= sigma`.
    pub fn check_quasi_uniform(&self, sigma: f64) -> bool {
        self.element_sizes().windows(2).all(|w| (w[0] / w[1]).max(w[1] / w[0]) <= sigma)
    }
}

/// One basis function active at a point of a tensor space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveBasis {
    pub index: usize,
    pub value: f64,
    pub grad: Option<Point>,
}

/// Tensor product of per-direction knot vectors sharing one degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace {
    dirs: Vec<KnotVector>,
}

impl TensorSpace {
    pub fn new(dirs: Vec<KnotVector>) -> Result<Self, SplineError> {
        if !(2..=3).contains(&dirs.len()) {
            return Err(SplineError::InvalidTensor(format!("dimension {} not supported", dirs.len())));
        }
        let k = dirs[0].degree();
        if dirs.iter().any(|kv| kv.degree() != k) {
            return Err(SplineError::InvalidTensor("all directions must share the same degree".into()));
        }
        Ok(Self { dirs })
    }

    pub fn uniform(dim: usize, degree: usize, elements: usize) -> Result<Self, SplineError> {
        let kv = KnotVector::uniform(degree, elements)?;
        Self::new(vec![kv; dim])
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    pub fn degree(&self) -> usize {
        self.dirs[0].degree()
    }

    pub fn direction(&self, i: usize) -> &KnotVector {
        &self.dirs[i]
    }

    pub fn directions(&self) -> &[KnotVector] {
        &self.dirs
    }

    /// Basis counts per direction; missing directions count as 1.
    pub fn basis_counts(&self) -> [usize; 3] {
        let mut c = [1; 3];
        for (i, kv) in self.dirs.iter().enumerate() {
            c[i] = kv.num_basis();
        }
        c
    }

    pub fn num_basis(&self) -> usize {
        self.basis_counts().iter().product()
    }

    pub fn element_counts(&self) -> [usize; 3] {
        let mut c = [1; 3];
        for (i, kv) in self.dirs.iter().enumerate() {
            c[i] = kv.num_elements();
        }
        c
    }

    pub fn num_elements(&self) -> usize {
        self.element_counts().iter().product()
    }

    /// Flat index with the first direction running fastest.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let c = self.basis_counts();
        let mut idx = 0;
        for i in (0..self.dim()).rev() {
            idx = idx * c[i] + multi[i];
        }
        idx
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let c = self.basis_counts();
        let mut m = [0; 3];
        for i in 0..self.dim() {
            m[i] = flat % c[i];
            flat /= c[i];
        }
        m
    }

    /// All element multi-indices, first direction fastest.
    pub fn elements(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let c = self.element_counts();
        (0..c[0] * c[1] * c[2]).map(move |f| [f % c[0], (f / c[0]) % c[1], f / (c[0] * c[1])])
    }

    pub fn element_box(&self, e: &[usize; 3]) -> [(f64, f64); 3] {
        let mut b = [(0.0, 1.0); 3];
        for i in 0..self.dim() {
            b[i] = self.dirs[i].element_bounds(e[i]);
        }
        b
    }

    /// Largest parametric element diameter.
    pub fn max_element_diameter(&self) -> f64 {
        let per_dir: Vec<f64> = self.dirs.iter().map(|kv| kv.element_sizes().into_iter().fold(0.0, f64::max)).collect();
        per_dir.iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// Active tensor-product functions at `xh`, with parametric gradients on request.
    pub fn tensor_eval(&self, xh: &[f64], with_gradient: bool) -> Result<Vec<ActiveBasis>, SplineError> {
        let d = self.dim();
        let p = self.degree();
        let order = usize::from(with_gradient);
        let mut firsts = [0usize; 3];
        let mut tabs = [[[0.0; MAX_DEGREE + 1]; 2]; 3];
        for i in 0..d {
            let e = self.dirs[i].element_of(xh[i])?;
            firsts[i] = self.dirs[i].first_active(e);
            self.dirs[i].eval_in_element(e, xh[i], order, &mut tabs[i][..=order]);
        }
        let n1 = p + 1;
        let n3 = if d == 3 { n1 } else { 1 };
        let mut out = Vec::with_capacity(n1 * n1 * n3);
        for c in 0..n3 {
            for b in 0..n1 {
                for a in 0..n1 {
                    let loc = [a, b, c];
                    let mut value = 1.0;
                    for i in 0..d {
                        value *= tabs[i][0][loc[i]];
                    }
                    let grad = with_gradient.then(|| {
                        let mut g = [0.0; 3];
                        for (j, gj) in g.iter_mut().enumerate().take(d) {
                            let mut v = 1.0;
                            for i in 0..d {
                                v *= tabs[i][usize::from(i == j)][loc[i]];
                            }
                            *gj = v;
                        }
                        g
                    });
                    let mut multi = [0; 3];
                    for i in 0..d {
                        multi[i] = firsts[i] + loc[i];
                    }
                    out.push(ActiveBasis { index: self.flat_index(&multi), value, grad });
                }
            }
        }
        Ok(out)
    }
}
