//! Primal-dual active set method for box constraints on the control and
//! virtual-control relaxed bounds `ya ≤ y + εw ≤ yb` on the state.
//!
//! With fixed active sets the virtual control is eliminated
//! (`w = −εν/σ_w`, `ν = η·(y − bound)` on the active state entries,
//! `η = σ_w/ε²`) and the step is a strongly convex quadratic in the free
//! control entries, solved by conjugate gradients in the `U` product with
//! Hessian products from one forward and one adjoint solve.

use evolve::ocp::u_inner;
use evolve::OcpSpec;
use fem_core::TimeGrid;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{check_control, Dynamics};
use crate::solve::{clip, stationarity, ControlSolution, IterRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixedConstraintSpec {
    /// Nodal lower bounds, `m × n`.
    pub ya: DMatrix<f64>,
    pub yb: DMatrix<f64>,
    pub epsilon: f64,
    pub sigma_w: f64,
}

impl MixedConstraintSpec {
    pub fn new(ya: DMatrix<f64>, yb: DMatrix<f64>, epsilon: f64, sigma_w: f64) -> Result<Self> {
        if ya.shape() != yb.shape() {
            return Err(Error::InvalidArgument("state bounds differ in shape".into()));
        }
        if ya.iter().zip(yb.iter()).any(|(a, b)| a > b || a.is_nan() || b.is_nan()) {
            return Err(Error::InvalidArgument("lower state bound exceeds upper bound".into()));
        }
        if !(epsilon > 0.0 && sigma_w > 0.0) {
            return Err(Error::InvalidArgument("ε and σ_w must be positive".into()));
        }
        Ok(Self { ya, yb, epsilon, sigma_w })
    }

    /// No state bounds at all.
    pub fn unbounded(m: usize, n: usize, epsilon: f64, sigma_w: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(m, n, f64::NEG_INFINITY), DMatrix::from_element(m, n, f64::INFINITY), epsilon, sigma_w)
    }

    /// Nodal bounds from functions of `(t, node)`.
    pub fn from_fn(
        m: usize,
        grid: &TimeGrid,
        lower: impl Fn(f64, usize) -> f64,
        upper: impl Fn(f64, usize) -> f64,
        epsilon: f64,
        sigma_w: f64,
    ) -> Result<Self> {
        let n = grid.len();
        let ya = DMatrix::from_fn(m, n, |i, j| lower(grid.t(j), i));
        let yb = DMatrix::from_fn(m, n, |i, j| upper(grid.t(j), i));
        Self::new(ya, yb, epsilon, sigma_w)
    }

    /// Restriction to nodes `start..start+len`.
    pub fn window(&self, start: usize, len: usize) -> Self {
        Self {
            ya: self.ya.columns(start, len).into_owned(),
            yb: self.yb.columns(start, len).into_owned(),
            epsilon: self.epsilon,
            sigma_w: self.sigma_w,
        }
    }

    /// Complementarity parameter `σ_w/ε²` of the state bounds.
    pub fn eta(&self) -> f64 {
        self.sigma_w / (self.epsilon * self.epsilon)
    }

    /// Largest amount by which `y` leaves `[ya, yb]`, ignoring the fixed
    /// initial node.
    pub fn violation(&self, y: &DMatrix<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for j in 1..y.ncols() {
            for i in 0..y.nrows() {
                v = v.max(self.ya[(i, j)] - y[(i, j)]).max(y[(i, j)] - self.yb[(i, j)]);
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    /// `μ = Bᵀp − σ(u − uⁿ)` in the `U` product; zero on inactive entries.
    pub control: DMatrix<f64>,
    /// `ν = −σ_w w/ε`, nodal.
    pub state: DMatrix<f64>,
    pub virtual_control: DMatrix<f64>,
    /// `σ_w/2 ‖w‖²` with the lumped mass in space and trapezoidal weights in time.
    pub virtual_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdassOptions {
    pub max_iter: usize,
    /// Relative residual reduction for the inner conjugate gradient solve.
    pub cg_tol: f64,
    /// Inner iteration cap; `0` selects a multiple of the number of unknowns.
    pub cg_max_iter: usize,
}

impl Default for PdassOptions {
    fn default() -> Self {
        Self { max_iter: 50, cg_tol: 1e-12, cg_max_iter: 0 }
    }
}

const FREE: i8 = 0;
const LOWER: i8 = -1;
const UPPER: i8 = 1;
const FIXED: i8 = 2;

struct Penalized<'a> {
    dynamics: &'a dyn Dynamics,
    grid: &'a TimeGrid,
    ocp: &'a OcpSpec,
    mixed: &'a MixedConstraintSpec,
    lumped: DVector<f64>,
    eta: f64,
}

struct Point {
    state: DMatrix<f64>,
    adjoint: DMatrix<f64>,
    gradient: DMatrix<f64>,
}

impl Penalized<'_> {
    fn bound(&self, sets: &DMatrix<i8>, i: usize, j: usize) -> Option<f64> {
        match sets[(i, j)] {
            UPPER => Some(self.mixed.yb[(i, j)]),
            LOWER => Some(self.mixed.ya[(i, j)]),
            _ => None,
        }
    }

    /// `ν = η·(y − bound)` on active entries.
    fn state_multiplier(&self, y: &DMatrix<f64>, sets: &DMatrix<i8>) -> DMatrix<f64> {
        DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| self.bound(sets, i, j).map_or(0.0, |b| self.eta * (y[(i, j)] - b)))
    }

    fn penalty_sources(&self, nu: &DMatrix<f64>) -> DMatrix<f64> {
        let alpha = self.grid.weights();
        DMatrix::from_fn(nu.nrows(), nu.ncols(), |i, j| -alpha[j] * self.lumped[i] * nu[(i, j)])
    }

    fn riesz(&self, sigma_part: DMatrix<f64>, bt: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = sigma_part;
        for j in 1..g.ncols() {
            let c = self.grid.dt(j) / self.grid.weights()[j];
            let mut col = g.column_mut(j);
            col.axpy(-c, &bt.column(j), 1.0);
        }
        g
    }

    fn eval(&self, u: &DMatrix<f64>, sets: &DMatrix<i8>) -> Result<Point> {
        let state = self.dynamics.state(self.grid, u)?;
        let mut src = self.ocp.adjoint_sources(self.dynamics.mass(), self.grid, &state);
        src += self.penalty_sources(&self.state_multiplier(&state, sets));
        let (adjoint, bt) = self.dynamics.adjoint(self.grid, &state, &src)?;
        let gradient = self.riesz((u - &self.ocp.u_nominal) * self.ocp.sigma, &bt);
        Ok(Point { state, adjoint, gradient })
    }

    /// Hessian of the penalized cost applied to `d`.
    fn hess(&self, d: &DMatrix<f64>, sets: &DMatrix<i8>) -> Result<DMatrix<f64>> {
        let r = self.dynamics.response(self.grid, d)?;
        let mass = self.dynamics.mass();
        let alpha = self.grid.weights();
        let n = r.ncols();
        let mut src = DMatrix::zeros(r.nrows(), n);
        for j in 0..n {
            let mut col = DVector::zeros(r.nrows());
            if self.ocp.sigma1 != 0.0 {
                col -= mass.mul_vec(&r.column(j).into_owned()) * (self.ocp.sigma1 * alpha[j]);
            }
            if j + 1 == n && self.ocp.sigma2 != 0.0 {
                col -= mass.mul_vec(&r.column(j).into_owned()) * self.ocp.sigma2;
            }
            for i in 0..r.nrows() {
                if self.bound(sets, i, j).is_some() {
                    col[i] -= self.eta * alpha[j] * self.lumped[i] * r[(i, j)];
                }
            }
            src.set_column(j, &col);
        }
        let (_, bt) = self.dynamics.adjoint(self.grid, &r, &src)?;
        Ok(self.riesz(d * self.ocp.sigma, &bt))
    }
}

fn control_sets(u: &DMatrix<f64>, mu: &DMatrix<f64>, ocp: &OcpSpec) -> DMatrix<i8> {
    DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
        let (a, b) = (ocp.ua[(i, j)], ocp.ub[(i, j)]);
        if a == b {
            FIXED
        } else if mu[(i, j)] + ocp.sigma * (u[(i, j)] - b) > 0.0 {
            UPPER
        } else if mu[(i, j)] + ocp.sigma * (u[(i, j)] - a) < 0.0 {
            LOWER
        } else {
            FREE
        }
    })
}

fn state_sets(y: &DMatrix<f64>, mixed: &MixedConstraintSpec) -> DMatrix<i8> {
    DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| {
        if j == 0 {
            FREE
        } else if y[(i, j)] > mixed.yb[(i, j)] {
            UPPER
        } else if y[(i, j)] < mixed.ya[(i, j)] {
            LOWER
        } else {
            FREE
        }
    })
}

/// Minimizes the penalized quadratic over the free control entries with the
/// others pinned to their bounds. Returns the inner iteration count.
fn inner_solve(
    prob: &Penalized<'_>,
    u: &mut DMatrix<f64>,
    csets: &DMatrix<i8>,
    ssets: &DMatrix<i8>,
    opts: &PdassOptions,
) -> Result<usize> {
    let grid = prob.grid;
    let mask = |v: &DMatrix<f64>| v.zip_map(csets, |x, s| if s == FREE { x } else { 0.0 });
    let free = csets.iter().filter(|s| **s == FREE).count();
    if free == 0 {
        return Ok(0);
    }
    let cap = if opts.cg_max_iter == 0 { 4 * free + 50 } else { opts.cg_max_iter };
    let g = prob.eval(u, ssets)?.gradient;
    let mut r = -mask(&g);
    let mut rr = u_inner(grid, &r, &r);
    let target = opts.cg_tol * rr.sqrt();
    let mut p = r.clone();
    let mut k = 0;
    while k < cap && rr.sqrt() > target && rr > 0.0 {
        let hp = mask(&prob.hess(&p, ssets)?);
        let php = u_inner(grid, &p, &hp);
        if php <= 0.0 {
            break;
        }
        let a = rr / php;
        *u += &p * a;
        r -= &hp * a;
        let next = u_inner(grid, &r, &r);
        p = &r + &p * (next / rr);
        rr = next;
        k += 1;
    }
    Ok(k)
}

/// Semismooth Newton iteration on the active sets; stops when the control
/// and state sets repeat. `u0` seeds the sets with zero multipliers.
pub fn pdass_solve(
    dynamics: &dyn Dynamics,
    grid: &TimeGrid,
    ocp: &OcpSpec,
    mixed: &MixedConstraintSpec,
    u0: &DMatrix<f64>,
    opts: &PdassOptions,
) -> Result<ControlSolution> {
    check_control(dynamics, grid, ocp, u0)?;
    if !dynamics.is_linear() {
        return Err(Error::InvalidArgument("the active set method handles linear dynamics only".into()));
    }
    if ocp.sigma <= 0.0 {
        return Err(Error::InvalidArgument("control regularization must be positive".into()));
    }
    if mixed.ya.shape() != (dynamics.full_dim(), grid.len()) {
        return Err(Error::InvalidArgument("state bounds do not match the state shape".into()));
    }
    let prob = Penalized {
        dynamics,
        grid,
        ocp,
        mixed,
        lumped: lumped_mass(dynamics),
        eta: mixed.eta(),
    };
    let mut u = clip(u0, &ocp.ua, &ocp.ub);
    let mut mu = DMatrix::zeros(u.nrows(), u.ncols());
    let mut csets = control_sets(&u, &mu, ocp);
    let mut ssets = state_sets(&dynamics.state(grid, &u)?, mixed);
    let mut log = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let point = loop {
        for ((v, s), (a, b)) in u.iter_mut().zip(csets.iter()).zip(ocp.ua.iter().zip(ocp.ub.iter())) {
            match *s {
                UPPER => *v = *b,
                LOWER | FIXED => *v = *a,
                _ => {}
            }
        }
        let inner = inner_solve(&prob, &mut u, &csets, &ssets, opts)?;
        iterations += 1;
        let point = prob.eval(&u, &ssets)?;
        mu = (-&point.gradient).zip_map(&csets, |x, s| if s == FREE { 0.0 } else { x });
        let next_c = control_sets(&u, &mu, ocp);
        let next_s = state_sets(&point.state, mixed);
        let cost = ocp.cost(dynamics.mass(), grid, &point.state, &u).total();
        let stat = stationarity(grid, &u, &point.gradient, &ocp.ua, &ocp.ub);
        log.push(IterRecord { iteration: iterations, cost, stationarity: stat, step: inner as f64 });
        let repeated = next_c == csets && next_s == ssets;
        csets = next_c;
        ssets = next_s;
        if repeated {
            converged = true;
            break point;
        }
        if iterations >= opts.max_iter {
            break point;
        }
    };
    let nu = prob.state_multiplier(&point.state, &ssets);
    let w = &nu * (-mixed.epsilon / mixed.sigma_w);
    let alpha = grid.weights();
    let virtual_cost = 0.5
        * mixed.sigma_w
        * (0..w.ncols())
            .map(|j| alpha[j] * w.column(j).iter().zip(prob.lumped.iter()).map(|(x, l)| l * x * x).sum::<f64>())
            .sum::<f64>();
    let stat = stationarity(grid, &u, &point.gradient, &ocp.ua, &ocp.ub);
    let cost = ocp.cost(dynamics.mass(), grid, &point.state, &u);
    Ok(ControlSolution {
        u,
        state: point.state,
        adjoint: point.adjoint,
        gradient: point.gradient,
        cost,
        iterations,
        converged,
        stationarity: stat,
        log,
        multipliers: Some(Multipliers { control: mu, state: nu, virtual_control: w, virtual_cost }),
        certificate: None,
        rank: dynamics.rank(),
    })
}

fn lumped_mass(dynamics: &dyn Dynamics) -> DVector<f64> {
    let mass = dynamics.mass();
    mass.mul_vec(&DVector::from_element(mass.ncols(), 1.0))
}

/// Full-order gradient of the penalized cost at `u` with state sets taken
/// from the state at `u`, used to certify surrogate solutions of the mixed
/// problem.
pub(crate) fn penalized_gradient(
    dynamics: &dyn Dynamics,
    grid: &TimeGrid,
    ocp: &OcpSpec,
    mixed: &MixedConstraintSpec,
    u: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let prob = Penalized { dynamics, grid, ocp, mixed, lumped: lumped_mass(dynamics), eta: mixed.eta() };
    let sets = state_sets(&dynamics.state(grid, u)?, mixed);
    Ok(prob.eval(u, &sets)?.gradient)
}

