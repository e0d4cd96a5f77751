use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use evolve::{ControlTrajectory, Kind, Trajectory};
use fem_core::{FeModel, TimeGrid, TimeProfile};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use pod_core::{PodBasis, ProjectionMode};

use crate::deim::DeimInterpolant;
use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-11;
const CACHE_LIMIT: usize = 4096;

type DenseLu = LU<f64, Dyn, Dyn>;

/// How the initial state was reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProjection {
    /// `ΨᵀW y₀` in the basis' own inner product.
    Orthogonal,
    /// Best approximation in a second inner product (Gram solve).
    Cross,
    /// Supplied by the caller.
    Given,
}

/// Galerkin-projected system
/// `M^ℓ c' + A^ℓ(t) c (+ N^ℓ(c)) = g^ℓ(t) + B^ℓ u` with `y ≈ Ψc`.
pub struct RomModel {
    psi: DMatrix<f64>,
    mass: DMatrix<f64>,
    steady: DMatrix<f64>,
    advection: Option<(DMatrix<f64>, TimeProfile)>,
    control: DMatrix<f64>,
    loads: Vec<(TimeProfile, DVector<f64>)>,
    y0: DVector<f64>,
    projection: InitialProjection,
    // MΨ, used by the cubic term without interpolation.
    mass_psi: DMatrix<f64>,
    cubic: bool,
    deim: Option<DeimInterpolant>,
    cache: Mutex<HashMap<(u64, u64, bool), Arc<DenseLu>>>,
}

impl Clone for RomModel {
    fn clone(&self) -> Self {
        Self {
            psi: self.psi.clone(),
            mass: self.mass.clone(),
            steady: self.steady.clone(),
            advection: self.advection.clone(),
            control: self.control.clone(),
            loads: self.loads.clone(),
            y0: self.y0.clone(),
            projection: self.projection,
            mass_psi: self.mass_psi.clone(),
            cubic: self.cubic,
            deim: self.deim.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for RomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RomModel")
            .field("ell", &self.ell())
            .field("full_dim", &self.full_dim())
            .field("projection", &self.projection)
            .field("cubic", &self.cubic)
            .field("deim", &self.deim.as_ref().map(|d| d.len()))
            .finish()
    }
}

/// Projects `model` onto the first ℓ modes of `basis`. The initial state is
/// reduced with `mode`.
pub fn galerkin_project(model: &FeModel, basis: &PodBasis, mode: ProjectionMode<'_>) -> Result<RomModel> {
    if basis.space().dim() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "basis lives in R^{} but the model has {} unknowns",
            basis.space().dim(),
            model.dim()
        )));
    }
    let ell = basis.ell();
    let y0 = basis.project(ell, model.y0(), mode)?;
    let projection = match mode {
        ProjectionMode::Orthogonal => InitialProjection::Orthogonal,
        ProjectionMode::Cross(_) => InitialProjection::Cross,
    };
    RomModel::from_matrix(model, basis.basis(), y0, projection)
}

/// Implicit Euler in the reduced space from the reduced initial state.
pub fn solve_rom(rom: &RomModel, grid: &TimeGrid, u: &ControlTrajectory) -> Result<Trajectory> {
    let c = rom.solve(grid, rom.y0(), u.values())?;
    Ok(Trajectory::new(c, grid.clone(), Kind::State)?)
}

impl RomModel {
    /// Projection onto the columns of an arbitrary full-rank `psi`.
    pub fn from_matrix(model: &FeModel, psi: DMatrix<f64>, y0: DVector<f64>, projection: InitialProjection) -> Result<Self> {
        if psi.nrows() != model.dim() || y0.len() != psi.ncols() {
            return Err(Error::InvalidArgument("basis and initial coefficients do not fit the model".into()));
        }
        let galerkin = |a: &fem_core::CsrMatrix| psi.tr_mul(&a.mul_dense(&psi));
        let mass_psi = model.mass().mul_dense(&psi);
        let mass = psi.tr_mul(&mass_psi);
        let steady = galerkin(&model.system_matrix_scaled(0.0));
        let advection =
            if model.has_advection() { Some((galerkin(model.advection()), model.advection_profile().clone())) } else { None };
        let control = psi.tr_mul(model.control());
        let loads = model.loads().iter().map(|l| (l.profile.clone(), psi.tr_mul(&l.spatial))).collect();
        Ok(Self {
            psi,
            mass,
            steady,
            advection,
            control,
            loads,
            y0,
            projection,
            mass_psi,
            cubic: model.is_cubic(),
            deim: None,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Replaces the exact cubic term by empirical interpolation.
    pub fn with_deim(mut self, interpolant: DeimInterpolant) -> Result<Self> {
        if !self.cubic {
            return Err(Error::InvalidArgument("interpolation needs a cubic model".into()));
        }
        self.deim = Some(interpolant.reduce(&self.psi, &self.mass_psi)?);
        Ok(self)
    }

    pub fn without_deim(mut self) -> Self {
        self.deim = None;
        self
    }

    pub fn with_initial(mut self, y0: DVector<f64>) -> Self {
        assert_eq!(y0.len(), self.ell());
        self.y0 = y0;
        self.projection = InitialProjection::Given;
        self
    }

    pub fn ell(&self) -> usize {
        self.psi.ncols()
    }

    pub fn full_dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.control.ncols()
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn control(&self) -> &DMatrix<f64> {
        &self.control
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn projection(&self) -> InitialProjection {
        self.projection
    }

    pub fn is_cubic(&self) -> bool {
        self.cubic
    }

    pub fn deim(&self) -> Option<&DeimInterpolant> {
        self.deim.as_ref()
    }

    fn is_time_dependent(&self) -> bool {
        self.advection.as_ref().is_some_and(|(_, p)| !p.is_constant())
    }

    /// `A^ℓ(t)`.
    pub fn stiffness(&self, t: f64) -> DMatrix<f64> {
        match &self.advection {
            Some((c, p)) => &self.steady + c * p.eval(t),
            None => self.steady.clone(),
        }
    }

    pub fn load(&self, t: f64) -> DVector<f64> {
        let mut g = DVector::zeros(self.ell());
        for (p, v) in &self.loads {
            g.axpy(p.eval(t), v, 1.0);
        }
        g
    }

    /// H-orthogonal projection `(ΨᵀMΨ)⁻¹ΨᵀMy` of a full state.
    pub fn project_state(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.mass.clone().lu().solve(&self.mass_psi.tr_mul(y)).ok_or(Error::Singular { node: 0 })
    }

    /// `Ψc`.
    pub fn lift(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.psi * c
    }

    /// Lifts every column.
    pub fn lift_all(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        &self.psi * c
    }

    /// Reduced cubic term, interpolated when an interpolant is attached.
    pub fn nonlinearity(&self, c: &DVector<f64>) -> DVector<f64> {
        match &self.deim {
            Some(d) => d.apply(c).expect("attached interpolants are reduced"),
            None => {
                let y = &self.psi * c;
                self.mass_psi.tr_mul(&y.map(|v| v * v * v))
            }
        }
    }

    /// Jacobian of [`Self::nonlinearity`].
    pub fn nonlinearity_jacobian(&self, c: &DVector<f64>) -> DMatrix<f64> {
        match &self.deim {
            Some(d) => d.jacobian(c).expect("attached interpolants are reduced"),
            None => {
                let y = &self.psi * c;
                let mut scaled = self.psi.clone();
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row *= 3.0 * y[i] * y[i];
                }
                self.mass_psi.tr_mul(&scaled)
            }
        }
    }

    fn factor(&self, dt: f64, t: f64, transpose: bool, node: usize) -> Result<Arc<DenseLu>> {
        let key = (dt.to_bits(), if self.is_time_dependent() { t.to_bits() } else { 0 }, transpose);
        if let Some(lu) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(lu.clone());
        }
        let a = self.stiffness(t);
        let a = if transpose { a.transpose() } else { a };
        let lu = (&self.mass + a * dt).lu();
        if !lu.is_invertible() {
            return Err(Error::Singular { node });
        }
        let lu = Arc::new(lu);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, lu.clone());
        Ok(lu)
    }

    /// Reduced implicit Euler from `c_init` at the first node; columns are
    /// reduced coefficients.
    pub fn solve(&self, grid: &TimeGrid, c_init: &DVector<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.integrate(grid, c_init, u, true)
    }

    /// Response to `u` from zero initial data without loads (linear models).
    pub fn response(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.cubic {
            return Err(Error::InvalidArgument("the control-to-state response is affine only for linear models".into()));
        }
        self.integrate(grid, &DVector::zeros(self.ell()), u, false)
    }

    fn integrate(&self, grid: &TimeGrid, c_init: &DVector<f64>, u: &DMatrix<f64>, loads: bool) -> Result<DMatrix<f64>> {
        let ell = self.ell();
        if c_init.len() != ell || u.nrows() != self.n_controls() || u.ncols() != grid.len() {
            return Err(Error::InvalidArgument("reduced solve data does not match the model".into()));
        }
        let n = grid.len();
        let mut c = DMatrix::zeros(ell, n);
        c.set_column(0, c_init);
        for j in 1..n {
            let dt = grid.dt(j);
            let t = grid.t(j);
            let prev = c.column(j - 1).into_owned();
            let mut rhs = &self.mass * &prev;
            let mut f = &self.control * u.column(j);
            if loads && !self.loads.is_empty() {
                f += self.load(t);
            }
            rhs.axpy(dt, &f, 1.0);
            let next = if self.cubic {
                self.newton_step(t, dt, &prev, &rhs, j)?
            } else {
                self.factor(dt, t, false, j)?.solve(&rhs).ok_or(Error::Singular { node: j })?
            };
            c.set_column(j, &next);
        }
        Ok(c)
    }

    fn newton_step(&self, t: f64, dt: f64, guess: &DVector<f64>, rhs: &DVector<f64>, node: usize) -> Result<DVector<f64>> {
        let s = &self.mass + self.stiffness(t) * dt;
        let tol = NEWTON_TOL * (1.0 + rhs.amax());
        let mut c = guess.clone();
        let mut res = f64::INFINITY;
        for _ in 0..=NEWTON_MAX_ITER {
            let r = &s * &c + self.nonlinearity(&c) * dt - rhs;
            res = r.amax();
            if !res.is_finite() {
                break;
            }
            if res <= tol {
                return Ok(c);
            }
            let jac = &s + self.nonlinearity_jacobian(&c) * dt;
            let step = jac.lu().solve(&r).ok_or(Error::Singular { node })?;
            c -= step;
        }
        Err(Error::Newton { node, residual: res })
    }

    /// Discrete adjoint of [`Self::solve`] for reduced sources `src`
    /// (columns `−∂J/∂c_j`). Column 0 repeats column 1.
    pub fn backward(&self, grid: &TimeGrid, state: &DMatrix<f64>, src: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let ell = self.ell();
        let n = grid.len();
        if src.shape() != (ell, n) || state.shape() != (ell, n) {
            return Err(Error::InvalidArgument("reduced adjoint data does not match the grid".into()));
        }
        let mut q = DMatrix::zeros(ell, n);
        for j in (1..n).rev() {
            let dt = grid.dt(j);
            let t = grid.t(j);
            let mut rhs = src.column(j).into_owned();
            if j + 1 < n {
                rhs += &self.mass * q.column(j + 1);
            }
            let sol = if self.cubic {
                let c = state.column(j).into_owned();
                let mat = &self.mass + (self.stiffness(t) + self.nonlinearity_jacobian(&c)).transpose() * dt;
                mat.lu().solve(&rhs)
            } else {
                self.factor(dt, t, true, j)?.solve(&rhs)
            };
            q.set_column(j, &sol.ok_or(Error::Singular { node: j })?);
        }
        if n > 1 {
            let q1 = q.column(1).into_owned();
            q.set_column(0, &q1);
        }
        Ok(q)
    }

    /// `(B^ℓ)ᵀq_j` for every column.
    pub fn bt(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        self.control.tr_mul(q)
    }
}
