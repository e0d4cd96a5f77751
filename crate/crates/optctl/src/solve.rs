use evolve::ocp::{u_inner, u_norm};
use evolve::{CostParts, OcpSpec};
use fem_core::TimeGrid;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::certify::Certificate;
use crate::dynamics::{check_control, evaluate, Dynamics, Evaluation};
use crate::pdass::Multipliers;
use crate::Result;

const MAX_BACKTRACK: usize = 60;
/// Relative cost change below which function values are treated as noise and
/// the sufficient-decrease test switches to the gradient form.
const VALUE_NOISE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepRule {
    /// Every iteration starts from the initial step and halves.
    Armijo,
    /// Barzilai-Borwein trial step, halved until sufficient decrease.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgOptions {
    /// Relative stationarity tolerance: stop once
    /// `‖u − P(u − ∇ĵ(u))‖_U ≤ tol·(1 + ‖u‖_U)`.
    pub tol: f64,
    pub max_iter: usize,
    pub step: StepRule,
    /// Sufficient decrease constant.
    pub armijo: f64,
    /// Initial step; `1/σ` when absent.
    pub initial_step: Option<f64>,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, step: StepRule::Armijo, armijo: 1e-4, initial_step: None }
    }
}

impl PgOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub cost: f64,
    pub stationarity: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub u: DMatrix<f64>,
    /// Full-space state at `u` for the dynamics that produced it.
    pub state: DMatrix<f64>,
    pub adjoint: DMatrix<f64>,
    pub gradient: DMatrix<f64>,
    pub cost: CostParts,
    pub iterations: usize,
    pub converged: bool,
    /// Projected-gradient residual `‖u − P(u − ∇ĵ(u))‖_U` at exit.
    pub stationarity: f64,
    pub log: Vec<IterRecord>,
    pub multipliers: Option<Multipliers>,
    pub certificate: Option<Certificate>,
    /// Surrogate rank, `None` when solved with the full model.
    pub rank: Option<usize>,
}

impl ControlSolution {
    pub(crate) fn from_evaluation(u: DMatrix<f64>, eval: Evaluation, rank: Option<usize>) -> Self {
        Self {
            u,
            state: eval.state,
            adjoint: eval.adjoint,
            gradient: eval.gradient,
            cost: eval.cost,
            iterations: 0,
            converged: true,
            stationarity: 0.0,
            log: Vec::new(),
            multipliers: None,
            certificate: None,
            rank,
        }
    }
}

pub(crate) fn clip(u: &DMatrix<f64>, ua: &DMatrix<f64>, ub: &DMatrix<f64>) -> DMatrix<f64> {
    u.zip_zip_map(ua, ub, |v, a, b| v.max(a).min(b))
}

pub(crate) fn stationarity(grid: &TimeGrid, u: &DMatrix<f64>, g: &DMatrix<f64>, ua: &DMatrix<f64>, ub: &DMatrix<f64>) -> f64 {
    u_norm(grid, &(u - clip(&(u - g), ua, ub)))
}

pub(crate) struct Outcome {
    pub u: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stationarity: f64,
    pub log: Vec<IterRecord>,
}

/// Projected gradient on `[ua, ub]` for an objective returning value and
/// `U`-gradient.
pub(crate) fn minimize(
    grid: &TimeGrid,
    ua: &DMatrix<f64>,
    ub: &DMatrix<f64>,
    u0: &DMatrix<f64>,
    opts: &PgOptions,
    eta0: f64,
    mut objective: impl FnMut(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
) -> Result<Outcome> {
    let mut u = clip(u0, ua, ub);
    let (mut f, mut g) = objective(&u)?;
    let mut log = Vec::new();
    let mut last_step = 0.0;
    let mut secant: Option<(f64, f64)> = None;
    let mut iterations = 0;
    loop {
        let stat = stationarity(grid, &u, &g, ua, ub);
        log.push(IterRecord { iteration: iterations, cost: f, stationarity: stat, step: last_step });
        if stat <= opts.tol * (1.0 + u_norm(grid, &u)) {
            return Ok(Outcome { u, iterations, converged: true, stationarity: stat, log });
        }
        if iterations >= opts.max_iter {
            return Ok(Outcome { u, iterations, converged: false, stationarity: stat, log });
        }
        let mut eta = match (opts.step, secant) {
            (StepRule::BarzilaiBorwein, Some((ss, sy))) if sy > 0.0 => (ss / sy).clamp(1e-12, 1e12),
            _ => eta0,
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let trial = clip(&(&u - &g * eta), ua, ub);
            let d = &trial - &u;
            let slope = u_inner(grid, &g, &d);
            if slope >= 0.0 {
                break;
            }
            let (ft, gt) = objective(&trial)?;
            let decrease = ft <= f + opts.armijo * slope;
            let noisy = (ft - f).abs() <= VALUE_NOISE * f.abs().max(f64::MIN_POSITIVE)
                && 0.5 * u_inner(grid, &(&g + &gt), &d) <= opts.armijo * slope;
            if decrease || noisy {
                accepted = Some((trial, d, ft, gt));
                break;
            }
            eta *= 0.5;
        }
        let Some((trial, d, ft, gt)) = accepted else {
            return Ok(Outcome { u, iterations, converged: false, stationarity: stat, log });
        };
        let y = &gt - &g;
        secant = Some((u_inner(grid, &d, &d), u_inner(grid, &d, &y)));
        u = trial;
        f = ft;
        g = gt;
        last_step = eta;
        iterations += 1;
    }
}

/// Projected gradient method for `min ĵ(u)` over the box of `ocp`.
pub fn projected_gradient_solve(
    dynamics: &dyn Dynamics,
    grid: &TimeGrid,
    ocp: &OcpSpec,
    u0: &DMatrix<f64>,
    opts: &PgOptions,
) -> Result<ControlSolution> {
    check_control(dynamics, grid, ocp, u0)?;
    if ocp.sigma <= 0.0 && opts.initial_step.is_none() {
        return Err(crate::Error::InvalidArgument("control regularization must be positive".into()));
    }
    let eta0 = opts.initial_step.unwrap_or(1.0 / ocp.sigma);
    let out = minimize(grid, &ocp.ua, &ocp.ub, u0, opts, eta0, |u| {
        let e = evaluate(dynamics, grid, ocp, u)?;
        Ok((e.cost.total(), e.gradient))
    })?;
    let eval = evaluate(dynamics, grid, ocp, &out.u)?;
    let mut sol = ControlSolution::from_evaluation(out.u, eval, dynamics.rank());
    sol.iterations = out.iterations;
    sol.converged = out.converged;
    sol.stationarity = out.stationarity;
    sol.log = out.log;
    Ok(sol)
}
