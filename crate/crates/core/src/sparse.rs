//! Compressed sparse row matrices with a precomputed pattern.

/// Square CSR matrix with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Collects the nonzero pattern row by row (duplicates allowed) before the values are accumulated.
#[derive(Debug, Clone)]
pub struct PatternBuilder {
    rows: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    /// Marks the dense block `rows x cols`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &r in rows {
            self.rows[r].extend(cols.iter().copied());
        }
    }

    pub fn add_row_entries(&mut self, row: usize, cols: impl IntoIterator<Item = usize>) {
        self.rows[row].extend(cols);
    }

    pub fn build(self) -> CsrMatrix {
        let n = self.rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut rows = self.rows;
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        for r in rows {
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals: vec![0.0; nnz] }
    }
}

impl CsrMatrix {
    /// Builds from explicit entries; duplicates are summed in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut pb = PatternBuilder::new(n);
        for &(r, c, _) in triplets {
            pb.add_row_entries(r, [c]);
        }
        let mut m = pb.build();
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        let slice = &self.cols[start..self.row_ptr[r + 1]];
        slice.binary_search(&c).ok().map(|p| start + p)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.vals[p])
    }

    /// Adds `v` at `(r, c)`; the entry must be in the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let p = self.position(r, c).unwrap_or_else(|| panic!("entry ({r}, {c}) not in the sparsity pattern"));
        self.vals[p] += v;
    }

    /// Adds a dense local block `local[a * cols.len() + b]` at `(rows[a], cols[b])`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], local: &[f64]) {
        let nc = cols.len();
        for (a, &r) in rows.iter().enumerate() {
            let start = self.row_ptr[r];
            let slice = &self.cols[start..self.row_ptr[r + 1]];
            for (b, &c) in cols.iter().enumerate() {
                let p = start
                    + slice
                        .binary_search(&c)
                        .unwrap_or_else(|_| panic!("entry ({r}, {c}) not in the sparsity pattern"));
                self.vals[p] += local[a * nc + b];
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += other` for matrices with identical patterns.
    pub fn add_assign_same_pattern(&mut self, other: &CsrMatrix) {
        assert_eq!(self.row_ptr, other.row_ptr);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.vals.iter_mut().zip(&other.vals) {
            *a += b;
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T| / max |A|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            worst / m
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }
}
