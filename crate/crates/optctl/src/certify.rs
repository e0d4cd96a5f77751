use evolve::ocp::u_norm;
use evolve::OcpSpec;
use fem_core::{FeModel, TimeGrid};
use nalgebra::DMatrix;
use pod_core::{compute_pod, ProjectionMode, Rank, SnapshotSet, Strategy, WeightTag, WeightedSpace};
use rom::galerkin_project;
use serde::Serialize;

use crate::dynamics::{evaluate, Evaluation, FullDynamics, RomDynamics};
use crate::solve::{projected_gradient_solve, ControlSolution, PgOptions};
use crate::{Error, Result};

/// Perturbation `ζ` that makes a candidate control optimal, and the
/// resulting bound `‖ζ‖_U/σ` on its distance to the true optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub zeta: DMatrix<f64>,
    pub zeta_norm: f64,
    pub bound: f64,
}

/// `ζ = −min(0, ξ)` where `u = ua`, `−max(0, ξ)` where `u = ub`, `−ξ` elsewhere.
pub fn perturbation(xi: &DMatrix<f64>, u: &DMatrix<f64>, ua: &DMatrix<f64>, ub: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(xi.nrows(), xi.ncols(), |i, j| {
        let g = xi[(i, j)];
        let v = u[(i, j)];
        let at_lower = v <= ua[(i, j)];
        let at_upper = v >= ub[(i, j)];
        match (at_lower, at_upper) {
            (true, true) => 0.0,
            (true, false) => -g.min(0.0),
            (false, true) => -g.max(0.0),
            (false, false) => -g,
        }
    })
}

pub(crate) fn certify(full: &FullDynamics<'_>, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> Result<(Certificate, Evaluation)> {
    if ocp.sigma <= 0.0 {
        return Err(Error::InvalidArgument("the certificate needs a positive control weight".into()));
    }
    let eval = evaluate(full, grid, ocp, u)?;
    let zeta = perturbation(&eval.gradient, u, &ocp.ua, &ocp.ub);
    let zeta_norm = u_norm(grid, &zeta);
    Ok((Certificate { zeta, zeta_norm, bound: zeta_norm / ocp.sigma }, eval))
}

/// Certifies a candidate control with the full-order state and adjoint at it.
pub fn aposteriori_control(full: &FullDynamics<'_>, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> Result<Certificate> {
    Ok(certify(full, grid, ocp, u)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedOptions {
    pub ell0: usize,
    pub ell_max: usize,
    pub ell_step: usize,
    /// Target for the certified control error.
    pub eps: f64,
    pub pg: PgOptions,
}

impl Default for CertifiedOptions {
    fn default() -> Self {
        Self { ell0: 4, ell_max: 40, ell_step: 2, eps: 1e-4, pg: PgOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankRecord {
    pub ell: usize,
    pub zeta_norm: f64,
    pub bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct CertifiedRun {
    /// Surrogate-optimal control with full-order state, adjoint and certificate.
    pub solution: ControlSolution,
    pub history: Vec<RankRecord>,
    pub certified: bool,
    /// Rank of the snapshot basis available to the loop.
    pub basis_rank: usize,
}

/// POD basis from the state and adjoint at `u_init`, orthonormal in the `M` product.
pub(crate) fn state_adjoint_basis(model: &FeModel, grid: &TimeGrid, state: &DMatrix<f64>, adjoint: &DMatrix<f64>, ell: usize) -> Result<pod_core::PodBasis> {
    let space = WeightedSpace::new(model.mass().clone(), WeightTag::H)?;
    let mut blocks = vec![state.clone()];
    if adjoint.amax() > 0.0 {
        blocks.push(adjoint.clone());
    }
    let set = SnapshotSet::from_trajectories(space, blocks, grid)?;
    Ok(compute_pod(&set, Rank::Fixed(ell.max(1)), Strategy::Auto)?)
}

/// Optimizes on POD surrogates of growing rank until the full-order
/// certificate drops below `opts.eps` or the rank is exhausted.
pub fn certified_pod_optimize(
    model: &FeModel,
    grid: &TimeGrid,
    ocp: &OcpSpec,
    u_init: &DMatrix<f64>,
    opts: &CertifiedOptions,
) -> Result<CertifiedRun> {
    if opts.ell0 == 0 || opts.ell0 > opts.ell_max || opts.ell_step == 0 {
        return Err(Error::InvalidArgument("need 1 ≤ ℓ₀ ≤ ℓ_max and a positive rank step".into()));
    }
    let full = FullDynamics::new(model);
    let snap = evaluate(&full, grid, ocp, &ocp.clip(u_init))?;
    let basis = state_adjoint_basis(model, grid, &snap.state, &snap.adjoint, opts.ell_max)?;
    let cap = opts.ell_max.min(basis.rank());
    let mut ell = opts.ell0.min(cap);
    let mut u = ocp.clip(u_init);
    let mut history = Vec::new();
    loop {
        let rom = galerkin_project(model, &basis.with_rank(ell), ProjectionMode::Orthogonal)?;
        let red = RomDynamics::new(&rom, model.mass())?.with_initial_state(model.y0())?;
        let sol = projected_gradient_solve(&red, grid, ocp, &u, &opts.pg)?;
        u = sol.u.clone();
        let (cert, eval) = certify(&full, grid, ocp, &u)?;
        history.push(RankRecord { ell, zeta_norm: cert.zeta_norm, bound: cert.bound, iterations: sol.iterations });
        let certified = cert.bound < opts.eps;
        if certified || ell >= cap {
            let mut out = ControlSolution::from_evaluation(u, eval, Some(ell));
            out.iterations = sol.iterations;
            out.converged = sol.converged;
            out.stationarity = sol.stationarity;
            out.log = sol.log;
            out.certificate = Some(cert);
            return Ok(CertifiedRun { solution: out, history, certified, basis_rank: basis.rank() });
        }
        ell = (ell + opts.ell_step).min(cap);
    }
}

