use fem_core::TimeGrid;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    State,
    Adjoint,
}

/// Coefficient vectors at every node of a time grid, one column per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    values: DMatrix<f64>,
    grid: TimeGrid,
    kind: Kind,
}

impl Trajectory {
    pub fn new(values: DMatrix<f64>, grid: TimeGrid, kind: Kind) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory has {} columns for {} time nodes",
                values.ncols(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("trajectory contains non-finite entries".into()));
        }
        Ok(Self { values, grid, kind })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn at(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    pub fn last(&self) -> DVector<f64> {
        self.at(self.len() - 1)
    }
}

/// Control values at time nodes (`m_c × n`), optionally with box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    values: DMatrix<f64>,
    bounds: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl ControlTrajectory {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("control contains non-finite entries".into()));
        }
        Ok(Self { values, bounds: None })
    }

    pub fn zeros(n_controls: usize, n: usize) -> Self {
        Self { values: DMatrix::zeros(n_controls, n), bounds: None }
    }

    /// The same control vector at every node.
    pub fn constant(u: &[f64], n: usize) -> Self {
        Self { values: DMatrix::from_fn(u.len(), n, |i, _| u[i]), bounds: None }
    }

    /// `values[i][j] = f(i, t_j)`.
    pub fn from_fn(n_controls: usize, grid: &TimeGrid, f: impl Fn(usize, f64) -> f64) -> Self {
        Self { values: DMatrix::from_fn(n_controls, grid.len(), |i, j| f(i, grid.t(j))), bounds: None }
    }

    pub fn with_bounds(mut self, lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        if lower.shape() != self.values.shape() || upper.shape() != self.values.shape() {
            return Err(Error::InvalidArgument("bounds must match the control shape".into()));
        }
        for ((u, a), b) in self.values.iter().zip(lower.iter()).zip(upper.iter()) {
            if a > b || *u < a - 1e-12 || *u > b + 1e-12 {
                return Err(Error::InvalidArgument("control violates its bounds".into()));
            }
        }
        self.bounds = Some((lower, upper));
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn bounds(&self) -> Option<&(DMatrix<f64>, DMatrix<f64>)> {
        self.bounds.as_ref()
    }

    pub fn n_controls(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn at(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

impl From<DMatrix<f64>> for ControlTrajectory {
    fn from(values: DMatrix<f64>) -> Self {
        Self { values, bounds: None }
    }
}
