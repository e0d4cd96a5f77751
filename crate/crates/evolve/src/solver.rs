use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use fem_core::{BandedLu, CsrMatrix, FeModel, TimeGrid};
use nalgebra::{DMatrix, DVector};

use crate::ocp::OcpSpec;
use crate::trajectory::{ControlTrajectory, Kind, Trajectory};
use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-11;
const CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Factor {
    /// `M + θδt A(t)`.
    Forward { theta: u64, dt: u64, t: u64 },
    /// `M + δt A(t)ᵀ`.
    Adjoint { dt: u64, t: u64 },
}

/// Full-order integrator that caches factorizations across solves.
pub struct FullSolver<'a> {
    model: &'a FeModel,
    cache: Mutex<HashMap<Factor, Arc<BandedLu>>>,
}

impl<'a> FullSolver<'a> {
    pub fn new(model: &'a FeModel) -> Self {
        Self { model, cache: Mutex::new(HashMap::new()) }
    }

    pub fn model(&self) -> &FeModel {
        self.model
    }

    fn time_key(&self, t: f64) -> u64 {
        if self.model.is_time_dependent() {
            t.to_bits()
        } else {
            0
        }
    }

    fn factor(&self, key: Factor, node: usize, build: impl FnOnce() -> CsrMatrix) -> Result<Arc<BandedLu>> {
        if let Some(lu) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(lu.clone());
        }
        let lu = Arc::new(BandedLu::factor(&build()).map_err(|source| Error::Solve { node, source })?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, lu.clone());
        Ok(lu)
    }

    /// Load plus control input at every node, `g(t_j) + B u_j`.
    fn forcing(&self, grid: &TimeGrid, u: &DMatrix<f64>, loads: bool) -> Result<DMatrix<f64>> {
        let model = self.model;
        if u.nrows() != model.n_controls() || u.ncols() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "control is {}x{}, expected {}x{}",
                u.nrows(),
                u.ncols(),
                model.n_controls(),
                grid.len()
            )));
        }
        let mut f = model.control() * u;
        if loads && model.has_loads() {
            for j in 0..grid.len() {
                let mut col = f.column_mut(j);
                col += model.load(grid.t(j));
            }
        }
        Ok(f)
    }

    /// θ-scheme (or Newton for cubic models, θ = 1) from `y_init` at the first node.
    pub fn forward(&self, grid: &TimeGrid, y_init: &DVector<f64>, u: &DMatrix<f64>, theta: f64) -> Result<Trajectory> {
        let model = self.model;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
        }
        if y_init.len() != model.dim() {
            return Err(Error::InvalidArgument("initial state has the wrong length".into()));
        }
        if model.is_cubic() && theta != 1.0 {
            return Err(Error::InvalidArgument("the cubic model is integrated with implicit Euler only".into()));
        }
        let f = self.forcing(grid, u, true)?;
        let n = grid.len();
        let mut y = DMatrix::zeros(model.dim(), n);
        y.set_column(0, y_init);
        for j in 1..n {
            let dt = grid.dt(j);
            let prev = y.column(j - 1).into_owned();
            let mut rhs = model.mass().mul_vec(&prev);
            if theta < 1.0 {
                let a_prev = model.system_matrix(grid.t(j - 1));
                rhs.axpy(-(1.0 - theta) * dt, &a_prev.mul_vec(&prev), 1.0);
                rhs.axpy((1.0 - theta) * dt, &f.column(j - 1), 1.0);
            }
            rhs.axpy(theta * dt, &f.column(j), 1.0);
            let next = if model.is_cubic() {
                self.newton_step(grid.t(j), dt, &prev, &rhs, j)?
            } else {
                let t = grid.t(j);
                let key = Factor::Forward { theta: theta.to_bits(), dt: dt.to_bits(), t: self.time_key(t) };
                let lu = self.factor(key, j, || model.mass().add_scaled(1.0, &model.system_matrix(t), theta * dt))?;
                let mut x = rhs;
                lu.solve_in_place(x.as_mut_slice());
                x
            };
            y.set_column(j, &next);
        }
        Trajectory::new(y, grid.clone(), Kind::State)
    }

    /// Implicit Euler response to `u` from zero initial data, ignoring loads.
    /// Only defined for linear models.
    pub fn response(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let model = self.model;
        if model.is_cubic() {
            return Err(Error::InvalidArgument("the control-to-state response is affine only for linear models".into()));
        }
        let f = self.forcing(grid, u, false)?;
        let mut y = DMatrix::zeros(model.dim(), grid.len());
        for j in 1..grid.len() {
            let dt = grid.dt(j);
            let t = grid.t(j);
            let mut rhs = model.mass().mul_vec(&y.column(j - 1).into_owned());
            rhs.axpy(dt, &f.column(j), 1.0);
            let key = Factor::Forward { theta: 1f64.to_bits(), dt: dt.to_bits(), t: self.time_key(t) };
            let lu = self.factor(key, j, || model.mass().add_scaled(1.0, &model.system_matrix(t), dt))?;
            lu.solve_in_place(rhs.as_mut_slice());
            y.set_column(j, &rhs);
        }
        Ok(y)
    }

    /// Solves `(M + δtA)y + δt·M·y³ = rhs` by Newton's method from `guess`.
    fn newton_step(&self, t: f64, dt: f64, guess: &DVector<f64>, rhs: &DVector<f64>, node: usize) -> Result<DVector<f64>> {
        let model = self.model;
        let s = model.mass().add_scaled(1.0, &model.system_matrix(t), dt);
        let tol = NEWTON_TOL * (1.0 + rhs.amax());
        let mut y = guess.clone();
        let mut res = f64::INFINITY;
        for _ in 0..=NEWTON_MAX_ITER {
            let cube = y.map(|v| v * v * v);
            let mut r = s.mul_vec(&y) + model.mass().mul_vec(&cube) * dt - rhs;
            res = r.amax();
            if !res.is_finite() {
                break;
            }
            if res <= tol {
                return Ok(y);
            }
            let d = y.map(|v| 3.0 * v * v);
            let jac = s.add_scaled(1.0, &model.mass().scale_columns(&d), dt);
            let lu = BandedLu::factor(&jac).map_err(|source| Error::Solve { node, source })?;
            lu.solve_in_place(r.as_mut_slice());
            y -= r;
        }
        Err(Error::Newton { node, residual: res })
    }

    /// Discrete adjoint of implicit Euler for right-hand sides `src` (columns are
    /// `−∂J/∂y_j`). Returns multipliers `q_j` for `j ≥ 1`; column 0 repeats
    /// column 1. For cubic models the recursion is linearized along `state`.
    pub fn backward(&self, grid: &TimeGrid, state: &DMatrix<f64>, src: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let model = self.model;
        let n = grid.len();
        let m = model.dim();
        if src.shape() != (m, n) || state.shape() != (m, n) {
            return Err(Error::InvalidArgument("adjoint data does not match the grid".into()));
        }
        let mut q = DMatrix::zeros(m, n);
        for j in (1..n).rev() {
            let dt = grid.dt(j);
            let t = grid.t(j);
            let mut rhs = src.column(j).into_owned();
            if j + 1 < n {
                rhs += model.mass().mul_vec(&q.column(j + 1).into_owned());
            }
            if model.is_cubic() {
                let d = state.column(j).map(|v| 3.0 * v * v);
                let mat = model
                    .mass()
                    .add_scaled(1.0, &model.system_matrix(t).transpose(), dt)
                    .add_scaled(1.0, &model.mass().scale_rows(&d), dt);
                let lu = BandedLu::factor(&mat).map_err(|source| Error::Solve { node: j, source })?;
                lu.solve_in_place(rhs.as_mut_slice());
            } else {
                let key = Factor::Adjoint { dt: dt.to_bits(), t: self.time_key(t) };
                let lu = self.factor(key, j, || model.mass().add_scaled(1.0, &model.system_matrix(t).transpose(), dt))?;
                lu.solve_in_place(rhs.as_mut_slice());
            }
            q.set_column(j, &rhs);
        }
        if n > 1 {
            let q1 = q.column(1).into_owned();
            q.set_column(0, &q1);
        }
        Ok(q)
    }

    /// Adjoint for the tracking cost of `ocp` along `state`.
    pub fn adjoint(&self, grid: &TimeGrid, state: &DMatrix<f64>, ocp: &OcpSpec) -> Result<Trajectory> {
        ocp.validate(self.model.dim(), grid)?;
        let src = ocp.adjoint_sources(self.model.mass(), grid, state);
        Trajectory::new(self.backward(grid, state, &src)?, grid.clone(), Kind::Adjoint)
    }

    /// `Bᵀq_j` for every column.
    pub fn bt(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        self.model.control().tr_mul(q)
    }
}

/// θ-scheme from the model's initial state.
pub fn solve_theta(model: &FeModel, grid: &TimeGrid, u: &ControlTrajectory, theta: f64) -> Result<Trajectory> {
    if model.is_cubic() {
        return Err(Error::InvalidArgument("use solve_semilinear for the cubic model".into()));
    }
    FullSolver::new(model).forward(grid, model.y0(), u.values(), theta)
}

/// Implicit Euler with Newton iterations for the cubic model.
pub fn solve_semilinear(model: &FeModel, grid: &TimeGrid, u: &ControlTrajectory) -> Result<Trajectory> {
    if !model.is_cubic() {
        return Err(Error::InvalidArgument("model has no cubic nonlinearity".into()));
    }
    FullSolver::new(model).forward(grid, model.y0(), u.values(), 1.0)
}

pub fn solve_adjoint(model: &FeModel, grid: &TimeGrid, state: &Trajectory, ocp: &OcpSpec) -> Result<Trajectory> {
    if state.grid() != grid {
        return Err(Error::InvalidArgument("state and adjoint grids differ".into()));
    }
    FullSolver::new(model).adjoint(grid, state.values(), ocp)
}
