use fem_core::TimeGrid;
use nalgebra::{DMatrix, DVector};

use crate::space::WeightedSpace;
use crate::{Error, Result};

/// Snapshot trajectories over a common time grid.
///
/// Trajectory `k` contributes with weight `ω_k`; column `j` of every block with
/// the temporal weight `α_j`. When difference quotients are included they are
/// appended as extra blocks, one per trajectory, carrying the same `ω_k`.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    space: WeightedSpace,
    blocks: Vec<DMatrix<f64>>,
    omega: Vec<f64>,
    alpha: Vec<f64>,
    include_dq: bool,
}

impl SnapshotSet {
    pub fn new(space: WeightedSpace, blocks: Vec<DMatrix<f64>>, omega: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("at least one trajectory is required".into()));
        }
        if omega.len() != blocks.len() {
            return Err(Error::InvalidArgument("one trajectory weight per block is required".into()));
        }
        let (m, n) = blocks[0].shape();
        if m != space.dim() || blocks.iter().any(|b| b.shape() != (m, n)) || alpha.len() != n {
            return Err(Error::InvalidArgument("snapshot blocks must share the space dimension and node count".into()));
        }
        if omega.iter().chain(&alpha).any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive".into()));
        }
        Ok(Self { space, blocks, omega, alpha, include_dq: false })
    }

    /// Equal trajectory weights and the grid's trapezoidal weights.
    pub fn from_trajectories(space: WeightedSpace, blocks: Vec<DMatrix<f64>>, grid: &TimeGrid) -> Result<Self> {
        let k = blocks.len();
        Self::new(space, blocks, vec![1.0; k], grid.weights().to_vec())
    }

    /// Appends `(y_j − y_{j−1})/δt_j` blocks (first column zero).
    pub fn with_difference_quotients(mut self, grid: &TimeGrid) -> Result<Self> {
        if self.include_dq {
            return Ok(self);
        }
        if grid.len() != self.n() {
            return Err(Error::InvalidArgument("grid does not match the snapshot node count".into()));
        }
        let mut extra = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let mut dq = DMatrix::zeros(b.nrows(), b.ncols());
            for j in 1..b.ncols() {
                let col = (b.column(j) - b.column(j - 1)) / grid.dt(j);
                dq.set_column(j, &col);
            }
            extra.push(dq);
        }
        let w = self.omega.clone();
        self.blocks.extend(extra);
        self.omega.extend(w);
        self.include_dq = true;
        Ok(self)
    }

    /// Flags the trailing half of the blocks as difference quotients without
    /// recomputing them.
    pub(crate) fn mark_difference_quotients(mut self) -> Self {
        self.include_dq = true;
        self
    }

    pub fn space(&self) -> &WeightedSpace {
        &self.space
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn includes_difference_quotients(&self) -> bool {
        self.include_dq
    }

    pub fn m(&self) -> usize {
        self.space.dim()
    }

    /// Nodes per trajectory.
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Number of blocks, including difference-quotient blocks.
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total number of weighted columns.
    pub fn num_columns(&self) -> usize {
        self.blocks.len() * self.n()
    }

    /// All columns side by side, with matching weights `ω_k α_j`.
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n();
        let mut y = DMatrix::zeros(self.m(), self.num_columns());
        let mut d = DVector::zeros(self.num_columns());
        for (k, b) in self.blocks.iter().enumerate() {
            y.columns_mut(k * n, n).copy_from(b);
            for j in 0..n {
                d[k * n + j] = self.omega[k] * self.alpha[j];
            }
        }
        (y, d)
    }

    /// `Σ_k ω_k Σ_j α_j ‖y_j^k‖²_W`.
    pub fn total_energy(&self) -> f64 {
        let mut s = 0.0;
        for (k, b) in self.blocks.iter().enumerate() {
            let wb = self.space.apply_dense(b);
            for j in 0..self.n() {
                s += self.omega[k] * self.alpha[j] * b.column(j).dot(&wb.column(j));
            }
        }
        s
    }
}
