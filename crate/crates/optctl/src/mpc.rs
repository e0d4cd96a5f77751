use evolve::ocp::u_norm;
use evolve::{FullSolver, OcpSpec};
use fem_core::{FeModel, TimeGrid};
use nalgebra::DMatrix;
use pod_core::{PodBasis, ProjectionMode};
use rom::galerkin_project;
use serde::Serialize;

use crate::certify::{perturbation, state_adjoint_basis};
use crate::dynamics::{evaluate, Dynamics, FullDynamics, RomDynamics};
use crate::pdass::{pdass_solve, penalized_gradient, MixedConstraintSpec, PdassOptions};
use crate::solve::{projected_gradient_solve, ControlSolution, PgOptions};
use crate::{Error, Result};

/// Update threshold for the surrogate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Threshold {
    Absolute(f64),
    /// Fraction of the largest `U`-norm among the full-order open-loop
    /// controls computed so far.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ControllerMode {
    Full,
    /// Surrogate built once from the first horizon.
    PodFixed,
    /// Surrogate rebuilt whenever its certificate exceeds the threshold.
    PodUpdate(Threshold),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpcOptions {
    /// Time steps per open-loop horizon.
    pub horizon: usize,
    /// Closed-loop steps to run.
    pub steps: usize,
    pub mode: ControllerMode,
    /// Surrogate rank.
    pub ell: usize,
    pub pg: PgOptions,
    pub pdass: PdassOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub step: usize,
    pub time: f64,
    pub estimate: f64,
    pub threshold: f64,
    pub rebuilt: bool,
}

#[derive(Debug, Clone)]
pub struct MpcRun {
    /// Closed-loop time nodes.
    pub grid: TimeGrid,
    pub state: DMatrix<f64>,
    /// Applied control; column `k + 1` acts on step `k`.
    pub control: DMatrix<f64>,
    pub records: Vec<UpdateRecord>,
    /// Number of surrogate rebuilds after the initial one.
    pub updates: usize,
    pub open_loop_iterations: Vec<usize>,
    /// Every open-loop solve converged.
    pub converged: bool,
    /// Largest `ε‖w‖∞` over the applied steps.
    pub max_relaxation: f64,
}

impl MpcRun {
    /// `‖u − reference‖_U / ‖reference‖_U` over the closed-loop grid.
    pub fn relative_control_error(&self, reference: &MpcRun) -> f64 {
        let diff = &self.control - &reference.control;
        u_norm(&self.grid, &diff) / u_norm(&reference.grid, &reference.control).max(f64::MIN_POSITIVE)
    }
}

struct Horizon<'a> {
    grid: TimeGrid,
    ocp: OcpSpec,
    mixed: Option<MixedConstraintSpec>,
    pg: &'a PgOptions,
    pdass: &'a PdassOptions,
}

impl Horizon<'_> {
    fn solve(&self, dynamics: &dyn Dynamics, guess: &DMatrix<f64>) -> Result<ControlSolution> {
        match &self.mixed {
            Some(mixed) => pdass_solve(dynamics, &self.grid, &self.ocp, mixed, guess, self.pdass),
            None => projected_gradient_solve(dynamics, &self.grid, &self.ocp, guess, self.pg),
        }
    }

    /// `‖ζ‖_U/σ` from the full-order gradient at `u`.
    fn estimate(&self, full: &FullDynamics<'_>, u: &DMatrix<f64>) -> Result<f64> {
        let g = match &self.mixed {
            Some(mixed) => penalized_gradient(full, &self.grid, &self.ocp, mixed, u)?,
            None => evaluate(full, &self.grid, &self.ocp, u)?.gradient,
        };
        let zeta = perturbation(&g, u, &self.ocp.ua, &self.ocp.ub);
        Ok(u_norm(&self.grid, &zeta) / self.ocp.sigma)
    }
}

fn relaxation(sol: &ControlSolution, mixed: &Option<MixedConstraintSpec>) -> f64 {
    match (&sol.multipliers, mixed) {
        (Some(mult), Some(mixed)) if mult.virtual_control.ncols() > 1 => {
            mixed.epsilon * mult.virtual_control.column(1).amax()
        }
        _ => 0.0,
    }
}

/// Receding-horizon control of the full model. `grid`, `ocp` and `mixed`
/// must cover `steps + horizon + 1` nodes.
pub fn mpc_run(
    model: &FeModel,
    grid: &TimeGrid,
    ocp: &OcpSpec,
    mixed: Option<&MixedConstraintSpec>,
    opts: &MpcOptions,
) -> Result<MpcRun> {
    let n_needed = opts.steps + opts.horizon + 1;
    if opts.horizon == 0 || opts.steps == 0 {
        return Err(Error::InvalidArgument("horizon and step count must be positive".into()));
    }
    if grid.len() < n_needed {
        return Err(Error::InvalidArgument(format!("grid has {} nodes, need {n_needed}", grid.len())));
    }
    ocp.validate(model.dim(), grid)?;
    if opts.mode != ControllerMode::Full && opts.ell == 0 {
        return Err(Error::InvalidArgument("surrogate rank must be positive".into()));
    }
    let len = opts.horizon + 1;
    let plant = FullSolver::new(model);
    let mut full = FullDynamics::new(model);
    let mut y = model.y0().clone();
    let mut states = vec![y.clone()];
    let mut control = DMatrix::zeros(model.n_controls(), opts.steps + 1);
    let mut basis: Option<PodBasis> = None;
    let mut threshold = match opts.mode {
        ControllerMode::PodUpdate(Threshold::Absolute(t)) => t,
        _ => f64::INFINITY,
    };
    let observe = |norm: f64, threshold: &mut f64| {
        if let ControllerMode::PodUpdate(Threshold::Relative(r)) = opts.mode {
            *threshold = if threshold.is_finite() { threshold.max(r * norm) } else { r * norm };
        }
    };
    let mut records = Vec::new();
    let mut updates = 0;
    let mut iterations = Vec::new();
    let mut converged = true;
    let mut max_relaxation: f64 = 0.0;
    let mut guess: Option<DMatrix<f64>> = None;
    for k in 0..opts.steps {
        let h = Horizon {
            grid: grid.window(k, len)?,
            ocp: ocp.window(k, len),
            mixed: mixed.map(|c| c.window(k, len)),
            pg: &opts.pg,
            pdass: &opts.pdass,
        };
        let start = match &guess {
            Some(prev) => shift(prev),
            None => h.ocp.clip(&h.ocp.u_nominal),
        };
        full = full.with_initial(y.clone())?;
        let sol = match (opts.mode, &basis) {
            (ControllerMode::Full, _) | (_, None) => {
                let sol = h.solve(&full, &start)?;
                if opts.mode != ControllerMode::Full {
                    basis = Some(state_adjoint_basis(model, &h.grid, &sol.state, &sol.adjoint, opts.ell)?);
                    observe(u_norm(&h.grid, &sol.u), &mut threshold);
                }
                sol
            }
            (mode, Some(b)) => {
                let rom = galerkin_project(model, b, ProjectionMode::Orthogonal)?;
                let red = RomDynamics::new(&rom, model.mass())?.with_initial_state(&y)?;
                let sol = h.solve(&red, &start)?;
                match mode {
                    ControllerMode::PodUpdate(_) => {
                        let estimate = h.estimate(&full, &sol.u)?;
                        let rebuilt = estimate > threshold;
                        records.push(UpdateRecord { step: k, time: h.grid.t(0), estimate, threshold, rebuilt });
                        if rebuilt {
                            updates += 1;
                            let fresh = h.solve(&full, &sol.u)?;
                            observe(u_norm(&h.grid, &fresh.u), &mut threshold);
                            basis = Some(state_adjoint_basis(model, &h.grid, &fresh.state, &fresh.adjoint, opts.ell)?);
                            fresh
                        } else {
                            sol
                        }
                    }
                    _ => sol,
                }
            }
        };
        converged &= sol.converged;
        iterations.push(sol.iterations);
        max_relaxation = max_relaxation.max(relaxation(&sol, &h.mixed));
        if k == 0 {
            control.set_column(0, &sol.u.column(0));
        }
        control.set_column(k + 1, &sol.u.column(1));
        let step_grid = grid.window(k, 2)?;
        let next = plant.forward(&step_grid, &y, &sol.u.columns(0, 2).into_owned(), 1.0)?.last();
        y = next;
        states.push(y.clone());
        guess = Some(sol.u);
    }
    Ok(MpcRun {
        grid: grid.window(0, opts.steps + 1)?,
        state: DMatrix::from_columns(&states),
        control,
        records,
        updates,
        open_loop_iterations: iterations,
        converged,
        max_relaxation,
    })
}

/// Drops the first column and repeats the last.
fn shift(u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.ncols();
    DMatrix::from_fn(u.nrows(), n, |i, j| u[(i, (j + 1).min(n - 1))])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_repeats_the_last_column() {
        let u = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        assert_eq!(shift(&u), DMatrix::from_row_slice(1, 3, &[2.0, 3.0, 3.0]));
    }
}
