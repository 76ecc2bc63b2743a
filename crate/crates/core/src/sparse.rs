//! Compressed sparse matrices over complex doubles.
//!
//! Liouvillians are sparse but their dimension (the squared Hilbert-space
//! dimension) reaches tens of thousands here, so dense storage is not an
//! option. Column storage feeds the sparse LU in the steady-state solver;
//! row storage gives the cache-friendly matvec the trajectory integrator
//! needs. Row indices are u32: the largest superoperator built in this crate
//! is far below that limit and the index arrays dominate memory next to the
//! values.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Column-compressed sparse matrix.
#[derive(Clone, Debug)]
pub struct CscMat {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<Complex64>,
}

impl CscMat {
    /// Build from (row, col, value) triplets. Duplicates are summed; exact
    /// zeros after summation are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(u32, u32, Complex64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r as usize >= nrows || c as usize >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
        }
        let mut count = vec![0usize; ncols + 1];
        for &(_, c, _) in triplets {
            count[c as usize + 1] += 1;
        }
        for j in 0..ncols {
            count[j + 1] += count[j];
        }
        let mut rows = vec![0u32; triplets.len()];
        let mut vals = vec![ZERO; triplets.len()];
        let mut next = count.clone();
        for &(r, c, v) in triplets {
            let p = next[c as usize];
            rows[p] = r;
            vals[p] = v;
            next[c as usize] += 1;
        }
        // sort each column by row and merge duplicates
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut out_rows = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(u32, Complex64)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            for p in count[j]..count[j + 1] {
                scratch.push((rows[p], vals[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let r = scratch[k].0;
                let mut v = scratch[k].1;
                k += 1;
                while k < scratch.len() && scratch[k].0 == r {
                    v += scratch[k].1;
                    k += 1;
                }
                if v != ZERO {
                    out_rows.push(r);
                    out_vals.push(v);
                }
            }
            col_ptr[j + 1] = out_rows.len();
        }
        Ok(CscMat { nrows, ncols, col_ptr, row_idx: out_rows, values: out_vals })
    }

    pub fn identity(n: usize) -> Self {
        CscMat {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n as u32).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn from_dense(m: &Array2<Complex64>, drop_tol: f64) -> Self {
        let (nr, nc) = (m.nrows(), m.ncols());
        let mut col_ptr = vec![0usize; nc + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..nc {
            for i in 0..nr {
                let v = m[(i, j)];
                if v.norm() > drop_tol {
                    row_idx.push(i as u32);
                    values.push(v);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        CscMat { nrows: nr, ncols: nc, col_ptr, row_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[u32] {
        &self.row_idx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&(i as u32)) {
            Ok(p) => self.values[lo + p],
            Err(_) => ZERO,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.fill(ZERO);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p] as usize] += self.values[p] * xj;
            }
        }
    }

    /// y = A^dag x
    pub fn matvec_adjoint(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (j, yj) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += self.values[p].conj() * x[self.row_idx[p] as usize];
            }
            *yj = s;
        }
    }

    /// alpha * self + beta * other, matching shapes required.
    pub fn add_scaled(&self, alpha: Complex64, other: &CscMat, beta: Complex64) -> Result<CscMat> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for j in 0..self.ncols {
            let (mut p, pe) = (self.col_ptr[j], self.col_ptr[j + 1]);
            let (mut q, qe) = (other.col_ptr[j], other.col_ptr[j + 1]);
            while p < pe || q < qe {
                let (r, v) = if q >= qe || (p < pe && self.row_idx[p] < other.row_idx[q]) {
                    let e = (self.row_idx[p], alpha * self.values[p]);
                    p += 1;
                    e
                } else if p >= pe || other.row_idx[q] < self.row_idx[p] {
                    let e = (other.row_idx[q], beta * other.values[q]);
                    q += 1;
                    e
                } else {
                    let e = (self.row_idx[p], alpha * self.values[p] + beta * other.values[q]);
                    p += 1;
                    q += 1;
                    e
                };
                if v != ZERO {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        Ok(CscMat { nrows: self.nrows, ncols: self.ncols, col_ptr, row_idx, values })
    }

    pub fn scale(&self, c: Complex64) -> CscMat {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// Scale row i by diag[i]. Used to apply superoperators that are diagonal
    /// in the vectorized basis.
    pub fn scale_rows(&self, diag: &[Complex64]) -> Result<CscMat> {
        if diag.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "row scaling of length {} for {} rows",
                diag.len(),
                self.nrows
            )));
        }
        let mut out = self.clone();
        for p in 0..out.values.len() {
            out.values[p] *= diag[out.row_idx[p] as usize];
        }
        Ok(out)
    }

    /// self * other, dense scatter accumulator per output column.
    pub fn matmul(&self, other: &CscMat) -> Result<CscMat> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut col_ptr = vec![0usize; other.ncols + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![ZERO; self.nrows];
        let mut seen = vec![false; self.nrows];
        let mut touched: Vec<u32> = Vec::with_capacity(self.nrows);
        for j in 0..other.ncols {
            for q in other.col_ptr[j]..other.col_ptr[j + 1] {
                let k = other.row_idx[q] as usize;
                let vb = other.values[q];
                for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                    let r = self.row_idx[p];
                    if !seen[r as usize] {
                        seen[r as usize] = true;
                        touched.push(r);
                    }
                    acc[r as usize] += self.values[p] * vb;
                }
            }
            touched.sort_unstable();
            for &r in &touched {
                let v = acc[r as usize];
                acc[r as usize] = ZERO;
                seen[r as usize] = false;
                if v != ZERO {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            touched.clear();
            col_ptr[j + 1] = row_idx.len();
        }
        Ok(CscMat { nrows: self.nrows, ncols: other.ncols, col_ptr, row_idx, values })
    }

    /// Kronecker product, self (x) other.
    pub fn kron(&self, other: &CscMat) -> CscMat {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let nnz = self.nnz() * other.nnz();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for ja in 0..self.ncols {
            for jb in 0..other.ncols {
                for pa in self.col_ptr[ja]..self.col_ptr[ja + 1] {
                    let ra = self.row_idx[pa] as usize;
                    let va = self.values[pa];
                    for pb in other.col_ptr[jb]..other.col_ptr[jb + 1] {
                        row_idx.push((ra * other.nrows + other.row_idx[pb] as usize) as u32);
                        values.push(va * other.values[pb]);
                    }
                }
                col_ptr.push(row_idx.len());
            }
        }
        CscMat { nrows, ncols, col_ptr, row_idx, values }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CscMat {
        let mut count = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            count[r as usize + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let col_ptr = count.clone();
        let mut row_idx = vec![0u32; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        let mut next = count;
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let r = self.row_idx[p] as usize;
                let q = next[r];
                row_idx[q] = j as u32;
                values[q] = self.values[p].conj();
                next[r] += 1;
            }
        }
        CscMat { nrows: self.ncols, ncols: self.nrows, col_ptr, row_idx, values }
    }

    /// Square submatrix on the given (sorted, deduplicated) index set, applied
    /// to both rows and columns.
    pub fn restrict(&self, keep: &[usize]) -> Result<CscMat> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch("restrict needs a square matrix".into()));
        }
        const ABSENT: u32 = u32::MAX;
        let mut inv = vec![ABSENT; self.nrows];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.nrows {
                return Err(Error::DimensionMismatch(format!(
                    "restriction index {old} outside dimension {}",
                    self.nrows
                )));
            }
            inv[old] = new as u32;
        }
        let n = keep.len();
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for (new_j, &old_j) in keep.iter().enumerate() {
            for p in self.col_ptr[old_j]..self.col_ptr[old_j + 1] {
                let ni = inv[self.row_idx[p] as usize];
                if ni != ABSENT {
                    row_idx.push(ni);
                    values.push(self.values[p]);
                }
            }
            col_ptr[new_j + 1] = row_idx.len();
        }
        Ok(CscMat { nrows: n, ncols: n, col_ptr, row_idx, values })
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0f64; self.nrows];
        for p in 0..self.values.len() {
            sums[self.row_idx[p] as usize] += self.values[p].norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Largest |entry| of self - other without materializing the difference.
    pub fn max_abs_diff(&self, other: &CscMat) -> Result<f64> {
        let diff = self.add_scaled(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))?;
        Ok(diff.max_abs())
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                m[(self.row_idx[p] as usize, j)] = self.values[p];
            }
        }
        m
    }

    /// Iterate (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(move |p| (self.row_idx[p] as usize, j, self.values[p]))
        })
    }
}

/// Row-compressed sparse matrix, for repeated matvec.
#[derive(Clone, Debug)]
pub struct CsrMat {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<Complex64>,
}

impl CsrMat {
    pub fn from_csc(m: &CscMat) -> Self {
        let mut count = vec![0usize; m.nrows + 1];
        for &r in &m.row_idx {
            count[r as usize + 1] += 1;
        }
        for i in 0..m.nrows {
            count[i + 1] += count[i];
        }
        let row_ptr = count.clone();
        let mut col_idx = vec![0u32; m.nnz()];
        let mut values = vec![ZERO; m.nnz()];
        let mut next = count;
        for j in 0..m.ncols {
            for p in m.col_ptr[j]..m.col_ptr[j + 1] {
                let r = m.row_idx[p] as usize;
                let q = next[r];
                col_idx[q] = j as u32;
                values[q] = m.values[p];
                next[r] += 1;
            }
        }
        CsrMat { nrows: m.nrows, ncols: m.ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(m: &Array2<Complex64>, drop_tol: f64) -> Self {
        Self::from_csc(&CscMat::from_dense(m, drop_tol))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p] as usize];
            }
            *yi = s;
        }
    }

    /// y += coeff * A x
    pub fn matvec_scaled_add(&self, coeff: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p] as usize];
            }
            *yi += coeff * s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }
}
