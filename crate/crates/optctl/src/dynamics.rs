use evolve::{CostParts, FullSolver, OcpSpec};
use fem_core::{CsrMatrix, FeModel, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rom::RomModel;

use crate::{Error, Result};

/// Control-to-state map used by the optimizers. States and adjoints are
/// always returned in the full finite element space so costs and
/// constraints are evaluated identically for both model kinds.
pub trait Dynamics {
    fn full_dim(&self) -> usize;
    fn n_controls(&self) -> usize;
    fn mass(&self) -> &CsrMatrix;
    fn is_linear(&self) -> bool;
    /// Rank of the surrogate, `None` for the full model.
    fn rank(&self) -> Option<usize>;
    /// State trajectory for `u` from the stored initial state.
    fn state(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;
    /// Response to `u` from zero initial data without loads.
    fn response(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>>;
    /// Adjoint for full-space sources `src` (`−∂J/∂y_j`) along `state`.
    /// Returns the adjoint and `Bᵀq_j` per node.
    fn adjoint(&self, grid: &TimeGrid, state: &DMatrix<f64>, src: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

pub struct FullDynamics<'a> {
    solver: FullSolver<'a>,
    y_init: DVector<f64>,
}

impl<'a> FullDynamics<'a> {
    pub fn new(model: &'a FeModel) -> Self {
        Self { solver: FullSolver::new(model), y_init: model.y0().clone() }
    }

    pub fn with_initial(mut self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.solver.model().dim() {
            return Err(Error::InvalidArgument("initial state has the wrong length".into()));
        }
        self.y_init = y;
        Ok(self)
    }

    pub fn model(&self) -> &FeModel {
        self.solver.model()
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.y_init
    }
}

impl Dynamics for FullDynamics<'_> {
    fn full_dim(&self) -> usize {
        self.model().dim()
    }

    fn n_controls(&self) -> usize {
        self.model().n_controls()
    }

    fn mass(&self) -> &CsrMatrix {
        self.model().mass()
    }

    fn is_linear(&self) -> bool {
        !self.model().is_cubic()
    }

    fn rank(&self) -> Option<usize> {
        None
    }

    fn state(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.solver.forward(grid, &self.y_init, u, 1.0)?.into_values())
    }

    fn response(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.solver.response(grid, u)?)
    }

    fn adjoint(&self, grid: &TimeGrid, state: &DMatrix<f64>, src: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let q = self.solver.backward(grid, state, src)?;
        let bt = self.solver.bt(&q);
        Ok((q, bt))
    }
}

/// Galerkin surrogate whose states are lifted back to the full space.
pub struct RomDynamics<'a> {
    rom: &'a RomModel,
    mass: &'a CsrMatrix,
    c_init: DVector<f64>,
}

impl<'a> RomDynamics<'a> {
    /// `mass` is the full mass matrix used for the cost.
    pub fn new(rom: &'a RomModel, mass: &'a CsrMatrix) -> Result<Self> {
        if mass.nrows() != rom.full_dim() {
            return Err(Error::InvalidArgument("mass matrix does not match the reduced model".into()));
        }
        Ok(Self { rom, mass, c_init: rom.y0().clone() })
    }

    /// Starts from the H-orthogonal projection of the full state `y`.
    pub fn with_initial_state(mut self, y: &DVector<f64>) -> Result<Self> {
        self.c_init = self.rom.project_state(y)?;
        Ok(self)
    }

    pub fn rom(&self) -> &RomModel {
        self.rom
    }

    fn coefficients(&self, state: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let ell = self.rom.ell();
        if !self.rom.is_cubic() {
            return Ok(DMatrix::zeros(ell, state.ncols()));
        }
        let mut c = DMatrix::zeros(ell, state.ncols());
        for (j, col) in state.column_iter().enumerate() {
            c.set_column(j, &self.rom.project_state(&col.into_owned())?);
        }
        Ok(c)
    }
}

impl Dynamics for RomDynamics<'_> {
    fn full_dim(&self) -> usize {
        self.rom.full_dim()
    }

    fn n_controls(&self) -> usize {
        self.rom.n_controls()
    }

    fn mass(&self) -> &CsrMatrix {
        self.mass
    }

    fn is_linear(&self) -> bool {
        !self.rom.is_cubic()
    }

    fn rank(&self) -> Option<usize> {
        Some(self.rom.ell())
    }

    fn state(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.rom.lift_all(&self.rom.solve(grid, &self.c_init, u)?))
    }

    fn response(&self, grid: &TimeGrid, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.rom.lift_all(&self.rom.response(grid, u)?))
    }

    fn adjoint(&self, grid: &TimeGrid, state: &DMatrix<f64>, src: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let c = self.coefficients(state)?;
        let q = self.rom.backward(grid, &c, &self.rom.psi().tr_mul(src))?;
        let bt = self.rom.bt(&q);
        Ok((self.rom.lift_all(&q), bt))
    }
}

/// State, adjoint, cost and gradient at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub state: DMatrix<f64>,
    pub adjoint: DMatrix<f64>,
    pub cost: CostParts,
    pub gradient: DMatrix<f64>,
}

pub(crate) fn check_control(dynamics: &dyn Dynamics, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> Result<()> {
    ocp.validate(dynamics.full_dim(), grid)?;
    if u.shape() != (dynamics.n_controls(), grid.len()) || ocp.n_controls() != dynamics.n_controls() {
        return Err(Error::InvalidArgument(format!(
            "control is {}x{}, expected {}x{}",
            u.nrows(),
            u.ncols(),
            dynamics.n_controls(),
            grid.len()
        )));
    }
    Ok(())
}

/// Forward solve, adjoint solve and the `U`-gradient
/// `σ(u − uⁿ) − (δt_j/α_j)Bᵀq_j`.
pub fn evaluate(dynamics: &dyn Dynamics, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> Result<Evaluation> {
    check_control(dynamics, grid, ocp, u)?;
    let state = dynamics.state(grid, u)?;
    let cost = ocp.cost(dynamics.mass(), grid, &state, u);
    let src = ocp.adjoint_sources(dynamics.mass(), grid, &state);
    let (adjoint, bt) = dynamics.adjoint(grid, &state, &src)?;
    let gradient = ocp.gradient(grid, u, &bt);
    Ok(Evaluation { state, adjoint, cost, gradient })
}

pub fn reduced_gradient(dynamics: &dyn Dynamics, grid: &TimeGrid, u: &DMatrix<f64>, ocp: &OcpSpec) -> Result<DMatrix<f64>> {
    Ok(evaluate(dynamics, grid, ocp, u)?.gradient)
}
