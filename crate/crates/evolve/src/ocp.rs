//! Quadratic tracking cost and the pieces of its adjoint-based gradient.
//!
//! The discrete cost is
//!
//! ```text
//! J = σ₁/2 Σ_j α_j ‖y_j − yd_j‖²_M + σ₂/2 ‖y_n − yd₂‖²_M + σ/2 Σ_j α_j |u_j − uⁿ_j|²
//! ```
//!
//! and controls live in `R^{m_c × n}` with `⟨u, v⟩_U = Σ_j α_j u_j·v_j`.

use fem_core::{CsrMatrix, TimeGrid};
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Desired state along the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Constant(f64),
    /// One column per time node.
    Nodal(DMatrix<f64>),
}

impl Target {
    pub fn at(&self, j: usize, m: usize) -> DVector<f64> {
        match self {
            Target::Constant(c) => DVector::from_element(m, *c),
            Target::Nodal(v) => v.column(j).into_owned(),
        }
    }

    fn window(&self, start: usize, len: usize) -> Self {
        match self {
            Target::Constant(c) => Target::Constant(*c),
            Target::Nodal(v) => Target::Nodal(v.columns(start, len).into_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub yd1: Target,
    pub yd2: DVector<f64>,
    /// Nominal control `uⁿ`, `m_c × n`.
    pub u_nominal: DMatrix<f64>,
    pub ua: DMatrix<f64>,
    pub ub: DMatrix<f64>,
}

/// Cost split into state tracking, terminal and control parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostParts {
    pub tracking: f64,
    pub terminal: f64,
    pub control: f64,
}

impl CostParts {
    pub fn total(&self) -> f64 {
        self.tracking + self.terminal + self.control
    }

    /// Tracking plus terminal part.
    pub fn state(&self) -> f64 {
        self.tracking + self.terminal
    }
}

impl OcpSpec {
    /// Unconstrained problem with zero nominal control.
    pub fn new(sigma1: f64, sigma2: f64, sigma: f64, yd1: Target, yd2: DVector<f64>, n_controls: usize, n: usize) -> Self {
        Self {
            sigma1,
            sigma2,
            sigma,
            yd1,
            yd2,
            u_nominal: DMatrix::zeros(n_controls, n),
            ua: DMatrix::from_element(n_controls, n, f64::NEG_INFINITY),
            ub: DMatrix::from_element(n_controls, n, f64::INFINITY),
        }
    }

    pub fn with_nominal(mut self, u: DMatrix<f64>) -> Self {
        self.u_nominal = u;
        self
    }

    /// Time-independent box `lower ≤ u ≤ upper`.
    pub fn with_box(mut self, lower: &[f64], upper: &[f64]) -> Self {
        let (nc, n) = self.u_nominal.shape();
        self.ua = DMatrix::from_fn(nc, n, |i, _| lower[i]);
        self.ub = DMatrix::from_fn(nc, n, |i, _| upper[i]);
        self
    }

    pub fn n_controls(&self) -> usize {
        self.u_nominal.nrows()
    }

    pub fn n(&self) -> usize {
        self.u_nominal.ncols()
    }

    pub fn validate(&self, m: usize, grid: &TimeGrid) -> Result<()> {
        let n = grid.len();
        if self.u_nominal.ncols() != n || self.ua.shape() != self.u_nominal.shape() || self.ub.shape() != self.u_nominal.shape() {
            return Err(Error::InvalidArgument("control data does not match the time grid".into()));
        }
        if let Target::Nodal(v) = &self.yd1 {
            if v.shape() != (m, n) {
                return Err(Error::InvalidArgument("desired trajectory does not match the state shape".into()));
            }
        }
        if self.yd2.len() != m {
            return Err(Error::InvalidArgument("terminal target has the wrong length".into()));
        }
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 || self.sigma < 0.0 {
            return Err(Error::InvalidArgument("cost weights must be non-negative".into()));
        }
        if self.ua.iter().zip(self.ub.iter()).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument("lower control bound exceeds upper bound".into()));
        }
        Ok(())
    }

    /// Restriction to nodes `start..start+len`.
    pub fn window(&self, start: usize, len: usize) -> Self {
        Self {
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            sigma: self.sigma,
            yd1: self.yd1.window(start, len),
            yd2: self.yd2.clone(),
            u_nominal: self.u_nominal.columns(start, len).into_owned(),
            ua: self.ua.columns(start, len).into_owned(),
            ub: self.ub.columns(start, len).into_owned(),
        }
    }

    pub fn cost(&self, mass: &CsrMatrix, grid: &TimeGrid, y: &DMatrix<f64>, u: &DMatrix<f64>) -> CostParts {
        let (m, n) = y.shape();
        let alpha = grid.weights();
        let mut parts = CostParts::default();
        if self.sigma1 != 0.0 {
            for j in 0..n {
                let e = y.column(j) - self.yd1.at(j, m);
                parts.tracking += 0.5 * self.sigma1 * alpha[j] * mass.quad_form(&e, &e);
            }
        }
        if self.sigma2 != 0.0 {
            let e = y.column(n - 1) - &self.yd2;
            parts.terminal = 0.5 * self.sigma2 * mass.quad_form(&e, &e);
        }
        parts.control = 0.5 * self.sigma * u_norm_squared(grid, &(u - &self.u_nominal));
        parts
    }

    /// Adjoint right-hand sides `−∂J/∂y_j` as columns.
    pub fn adjoint_sources(&self, mass: &CsrMatrix, grid: &TimeGrid, y: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = y.shape();
        let alpha = grid.weights();
        let mut src = DMatrix::zeros(m, n);
        if self.sigma1 != 0.0 {
            for j in 0..n {
                let d = self.yd1.at(j, m) - y.column(j);
                src.set_column(j, &(mass.mul_vec(&d) * (self.sigma1 * alpha[j])));
            }
        }
        if self.sigma2 != 0.0 {
            let d = &self.yd2 - y.column(n - 1);
            let add = mass.mul_vec(&d) * self.sigma2;
            let mut col = src.column_mut(n - 1);
            col += add;
        }
        src
    }

    /// `σ(u − uⁿ) − (δt_j/α_j)·Bᵀq_j`; node 0 does not influence the state.
    pub fn gradient(&self, grid: &TimeGrid, u: &DMatrix<f64>, bt_q: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = (u - &self.u_nominal) * self.sigma;
        for j in 1..u.ncols() {
            let c = grid.dt(j) / grid.weights()[j];
            let mut col = g.column_mut(j);
            col.axpy(-c, &bt_q.column(j), 1.0);
        }
        g
    }

    /// Componentwise projection onto `[ua, ub]`.
    pub fn clip(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u.zip_zip_map(&self.ua, &self.ub, |v, a, b| v.max(a).min(b))
    }

    pub fn is_admissible(&self, u: &DMatrix<f64>, tol: f64) -> bool {
        u.iter().zip(self.ua.iter()).zip(self.ub.iter()).all(|((v, a), b)| *v >= a - tol && *v <= b + tol)
    }
}

/// `⟨a, b⟩_U = Σ_j α_j a_j·b_j`.
pub fn u_inner(grid: &TimeGrid, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let alpha = grid.weights();
    (0..a.ncols()).map(|j| alpha[j] * a.column(j).dot(&b.column(j))).sum()
}

pub fn u_norm_squared(grid: &TimeGrid, a: &DMatrix<f64>) -> f64 {
    u_inner(grid, a, a)
}

pub fn u_norm(grid: &TimeGrid, a: &DMatrix<f64>) -> f64 {
    u_norm_squared(grid, a).max(0.0).sqrt()
}
