//! Compressed sparse row matrices and banded direct solvers.
//!
//! Structured meshes number vertices row by row, so every operator assembled
//! here has a bandwidth of roughly one grid row. Direct banded factorizations
//! are therefore both exact and cheap at the sizes this toolkit targets.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[i];
            cols[p] = j;
            vals[p] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            scratch.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut s = 0.0;
                while k < scratch.len() && scratch[k].0 == c {
                    s += scratch[k].1;
                    k += 1;
                }
                col_idx.push(c);
                values.push(s);
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&DVector::from_element(n, 1.0))
    }

    pub fn from_diagonal(d: &DVector<f64>) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, &[])
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

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
        }
        t
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.nrows.min(self.ncols), |i, _| self.get(i, i))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        self.mul_vec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    /// Computes `Aᵀx` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.values[p] * x[i];
            }
        }
        y
    }

    /// Dense product `A·X`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for i in 0..self.nrows {
                let mut s = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.values[p] * col[self.col_idx[p]];
                }
                out[(i, c)] = s;
            }
        }
        out
    }

    /// Inner product `xᵀAy`.
    pub fn quad_form(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nrows {
            let mut r = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.values[p] * y[self.col_idx[p]];
            }
            s += x[i] * r;
        }
        s
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Returns `alpha·self + beta·other`.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        if self.row_ptr == other.row_ptr && self.col_idx == other.col_idx {
            let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
            return Self { values, ..self.clone() };
        }
        let mut t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)).collect();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, beta * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { values: self.values.iter().map(|v| alpha * v).collect(), ..self.clone() }
    }

    /// Returns `A·diag(d)`.
    pub fn scale_columns(&self, d: &DVector<f64>) -> Self {
        let values = self.col_idx.iter().zip(&self.values).map(|(&j, &v)| v * d[j]).collect();
        Self { values, ..self.clone() }
    }

    /// Returns `diag(d)·A`.
    pub fn scale_rows(&self, d: &DVector<f64>) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.nrows {
            for v in &mut values[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *v *= d[i];
            }
        }
        Self { values, ..self.clone() }
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        self.add_scaled(0.5, &self.transpose(), 0.5)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            a[(i, j)] += v;
        }
        a
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.add_scaled(1.0, &self.transpose(), -1.0).max_abs() <= tol
    }
}

/// LU factorization with partial pivoting in LAPACK band layout.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument("banded LU needs a square matrix".into()));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for (i, j, v) in a.triplets() {
            ab[j * ldab + kv + i - j] += v;
        }
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = ab[col].abs();
            for r in 1..=km {
                if ab[col + r].abs() > best {
                    best = ab[col + r].abs();
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { index: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(c * ldab + kv + j - c, c * ldab + kv + j + jp - c);
                }
            }
            let piv = ab[col];
            for r in 1..=km {
                ab[col + r] /= piv;
            }
            for c in (j + 1)..=ju {
                let ajc = ab[c * ldab + kv + j - c];
                if ajc != 0.0 {
                    for r in 1..=km {
                        ab[c * ldab + kv + j + r - c] -= ab[col + r] * ajc;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ldab, ab, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for r in 1..=kl.min(n - 1 - j) {
                    b[j + r] -= self.ab[j * ldab + kv + r] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[j * ldab + kv + i - j] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }
}

/// Cholesky factorization `A = L·Lᵀ` of a symmetric positive-definite band matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    k: usize,
    // Row-major: entry L(i, j) with i-k <= j <= i lives at i*(k+1) + (j + k - i).
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument("Cholesky needs a square matrix".into()));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidth();
        let k = kl.max(ku);
        let w = k + 1;
        let mut l = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j <= i {
                l[i * w + j + k - i] += v;
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(k);
            for j in i0..=i {
                let mut s = l[i * w + j + k - i];
                let k0 = i0.max(j.saturating_sub(k));
                for p in k0..j {
                    s -= l[i * w + p + k - i] * l[j * w + p + k - j];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { index: i });
                    }
                    l[i * w + k] = s.sqrt();
                } else {
                    l[i * w + j + k - i] = s / l[j * w + k];
                }
            }
        }
        Ok(Self { n, k, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        for i in 0..n {
            let mut s = b[i];
            for p in i.saturating_sub(k)..i {
                s -= self.l[i * w + p + k - i] * b[p];
            }
            b[i] = s / self.l[i * w + k];
        }
        for i in (0..n).rev() {
            b[i] /= self.l[i * w + k];
            let bi = b[i];
            for p in i.saturating_sub(k)..i {
                b[p] -= self.l[i * w + p + k - i] * bi;
            }
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        for i in (0..n).rev() {
            b[i] /= self.l[i * w + k];
            let bi = b[i];
            for p in i.saturating_sub(k)..i {
                b[p] -= self.l[i * w + p + k - i] * bi;
            }
        }
    }

    /// Computes `Lᵀ x`.
    pub fn mul_upper(&self, x: &DVector<f64>) -> DVector<f64> {
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        let mut y = DVector::zeros(n);
        for i in 0..n {
            for p in i.saturating_sub(k)..=i {
                y[p] += self.l[i * w + p + k - i] * x[i];
            }
        }
        y
    }
}
