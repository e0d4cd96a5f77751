use fem_core::{BandedCholesky, CsrMatrix};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which inner product a weight matrix realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightTag {
    /// Mass matrix (L² inner product).
    H,
    /// Mass plus stiffness (H¹ inner product).
    V,
    Identity,
    Custom,
}

/// `R^m` with the inner product `uᵀWv`, `W = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    w: CsrMatrix,
    chol: BandedCholesky,
    tag: WeightTag,
}

impl WeightedSpace {
    pub fn new(w: CsrMatrix, tag: WeightTag) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::InvalidArgument("weight matrix must be square".into()));
        }
        if !w.is_symmetric(1e-13 * w.max_abs()) {
            return Err(Error::InvalidArgument("weight matrix must be symmetric".into()));
        }
        let chol = BandedCholesky::factor(&w)?;
        Ok(Self { w, chol, tag })
    }

    pub fn identity(m: usize) -> Self {
        Self::new(CsrMatrix::identity(m), WeightTag::Identity).expect("identity is SPD")
    }

    pub fn from_dense(w: &DMatrix<f64>, tag: WeightTag) -> Result<Self> {
        Self::new(CsrMatrix::from_dense(w), tag)
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn tag(&self) -> WeightTag {
        self.tag
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.w
    }

    pub fn cholesky(&self) -> &BandedCholesky {
        &self.chol
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.w.quad_form(u, v)
    }

    pub fn norm_squared(&self, v: &DVector<f64>) -> f64 {
        self.w.quad_form(v, v)
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.norm_squared(v).max(0.0).sqrt()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.w.mul_vec(v)
    }

    /// `W·X` for a dense block.
    pub fn apply_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.w.mul_dense(x)
    }

    /// `Lᵀv`; its Euclidean norm equals the W-norm of `v`.
    pub fn to_euclidean(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.mul_upper(v)
    }

    /// Solves `Lᵀx = v`, inverting [`Self::to_euclidean`].
    pub fn from_euclidean(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut x = v.clone();
        self.chol.solve_upper_in_place(x.as_mut_slice());
        x
    }

    /// `W⁻¹v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// Gram matrix `XᵀWY`.
    pub fn gram(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        x.transpose() * self.apply_dense(y)
    }
}
