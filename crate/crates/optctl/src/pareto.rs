//! Euclidean reference point method for `min (Ĵ₁, Ĵ₂)` with the state
//! tracking terms as `Ĵ₁` and `σ/2‖u − uⁿ‖²_U` as `Ĵ₂`.

use std::path::Path;

use evolve::ocp::u_norm;
use evolve::OcpSpec;
use fem_core::{FeModel, TimeGrid};
use nalgebra::DMatrix;
use pod_core::{PodBasis, ProjectionMode};
use rom::galerkin_project;
use serde::Serialize;

use crate::certify::{perturbation, state_adjoint_basis};
use crate::dynamics::{evaluate, Dynamics, FullDynamics, RomDynamics};
use crate::solve::{minimize, projected_gradient_solve, PgOptions, StepRule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoPod {
    pub ell0: usize,
    pub ell_incr: usize,
    pub ell_max: usize,
    /// Largest accepted certified control error per point.
    pub eps_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoOptions {
    pub h_par: f64,
    pub h_perp: f64,
    /// Weight of `Ĵ₂` in the first endpoint problem.
    pub alpha_ws: f64,
    /// Cap on the number of scalarized problems.
    pub max_points: usize,
    pub pg: PgOptions,
    pub pod: Option<ParetoPod>,
}

impl Default for ParetoOptions {
    fn default() -> Self {
        Self {
            h_par: 0.5,
            h_perp: 0.1,
            alpha_ws: 1e-3,
            max_points: 50,
            pg: PgOptions { tol: 1e-10, max_iter: 2000, step: StepRule::BarzilaiBorwein, ..PgOptions::default() },
            pod: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub u: DMatrix<f64>,
    /// `(Ĵ₁, Ĵ₂)` evaluated with the full model.
    pub value: [f64; 2],
    pub reference: Option<[f64; 2]>,
    pub rank: Option<usize>,
    /// Certified control error of a surrogate solution.
    pub estimate: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    /// Ordered from the `Ĵ₁` end to the `Ĵ₂` minimizer.
    pub points: Vec<ParetoPoint>,
    pub references: Vec<[f64; 2]>,
    pub h_par: f64,
    pub h_perp: f64,
    pub alpha_ws: f64,
    pub log: Vec<String>,
}

impl ParetoFront {
    pub fn images(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Euclidean distance between consecutive images.
    pub fn spacings(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| dist(w[0].value, w[1].value)).collect()
    }

    /// No image dominates another with margin `tol`.
    pub fn is_nondominated(&self, tol: f64) -> bool {
        let img = self.images();
        for (a, p) in img.iter().enumerate() {
            for (b, q) in img.iter().enumerate() {
                if a != b && q[0] <= p[0] - tol && q[1] <= p[1] - tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["index", "j1", "j2", "z1", "z2", "spacing", "rank", "estimate"]).map_err(io)?;
        let spacings = self.spacings();
        for (i, p) in self.points.iter().enumerate() {
            let (z1, z2) = p.reference.map_or((String::new(), String::new()), |z| (fmt(z[0]), fmt(z[1])));
            let spacing = if i == 0 { String::new() } else { fmt(spacings[i - 1]) };
            w.write_record([
                i.to_string(),
                fmt(p.value[0]),
                fmt(p.value[1]),
                z1,
                z2,
                spacing,
                p.rank.map_or(String::new(), |r| r.to_string()),
                p.estimate.map_or(String::new(), fmt),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Objective values and both `U`-gradients.
fn objectives(dynamics: &dyn Dynamics, grid: &TimeGrid, ocp: &OcpSpec, u: &DMatrix<f64>) -> Result<([f64; 2], DMatrix<f64>, DMatrix<f64>)> {
    let e = evaluate(dynamics, grid, ocp, u)?;
    let g2 = (u - &ocp.u_nominal) * ocp.sigma;
    let g1 = &e.gradient - &g2;
    Ok(([e.cost.state(), e.cost.control], g1, g2))
}

fn scalarized_gradient(j: [f64; 2], z: [f64; 2], g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> DMatrix<f64> {
    g1 * (j[0] - z[0]) + g2 * (j[1] - z[1])
}

struct Scalarized {
    u: DMatrix<f64>,
    converged: bool,
}

/// `min ½‖Ĵ(u) − z‖²` over the box.
fn solve_reference(dynamics: &dyn Dynamics, grid: &TimeGrid, ocp: &OcpSpec, z: [f64; 2], u0: &DMatrix<f64>, pg: &PgOptions) -> Result<Scalarized> {
    let (j0, _, _) = objectives(dynamics, grid, ocp, &ocp.clip(u0))?;
    let eta0 = pg.initial_step.unwrap_or(1.0 / (ocp.sigma * (j0[1] - z[1]).abs().max(1e-12)));
    let out = minimize(grid, &ocp.ua, &ocp.ub, u0, pg, eta0, |u| {
        let (j, g1, g2) = objectives(dynamics, grid, ocp, u)?;
        let f = 0.5 * ((j[0] - z[0]).powi(2) + (j[1] - z[1]).powi(2));
        Ok((f, scalarized_gradient(j, z, &g1, &g2)))
    })?;
    Ok(Scalarized { u: out.u, converged: out.converged })
}

struct Surrogate {
    basis: PodBasis,
    ell: usize,
    cap: usize,
}

/// Traces the front from the weighted-sum endpoint towards the `Ĵ₂`
/// minimizer with reference points spaced by `h_par` along the front.
pub fn pareto_front(model: &FeModel, grid: &TimeGrid, ocp: &OcpSpec, opts: &ParetoOptions) -> Result<ParetoFront> {
    if !(opts.h_par > 0.0 && opts.h_perp >= 0.0 && opts.alpha_ws > 0.0 && ocp.sigma > 0.0) {
        return Err(Error::InvalidArgument("need h∥ > 0, h⊥ ≥ 0, α > 0 and σ > 0".into()));
    }
    let full = FullDynamics::new(model);
    let mut log = Vec::new();

    let mut weighted = ocp.clone();
    weighted.sigma *= opts.alpha_ws;
    let start = ocp.clip(&ocp.u_nominal);
    let first = projected_gradient_solve(&full, grid, &weighted, &start, &opts.pg)?;
    if !first.converged {
        log.push(format!("weighted-sum endpoint stopped at stationarity {:.3e}", first.stationarity));
    }
    let (j_first, _, _) = objectives(&full, grid, ocp, &first.u)?;
    let u_end = ocp.clip(&ocp.u_nominal);
    let (j_end, _, _) = objectives(&full, grid, ocp, &u_end)?;

    let mut surrogate = match &opts.pod {
        Some(pod) => {
            let basis = state_adjoint_basis(model, grid, &first.state, &first.adjoint, pod.ell_max)?;
            let cap = pod.ell_max.min(basis.rank());
            Some(Surrogate { ell: pod.ell0.clamp(1, cap), basis, cap })
        }
        None => None,
    };

    let mut points = vec![ParetoPoint {
        u: first.u.clone(),
        value: j_first,
        reference: None,
        rank: None,
        estimate: None,
        converged: first.converged,
    }];
    let mut references = Vec::new();
    let a = opts.alpha_ws;
    let t = unit([a, -1.0]);
    let nrm = unit([-1.0, -a]);
    let mut z = [
        j_first[0] + opts.h_par * t[0] + opts.h_perp * nrm[0],
        j_first[1] + opts.h_par * t[1] + opts.h_perp * nrm[1],
    ];
    let mut u_prev = first.u.clone();
    while z[0] <= j_end[0] {
        if references.len() >= opts.max_points {
            log.push(format!("stopped after {} reference points", opts.max_points));
            break;
        }
        references.push(z);
        let point = match (&mut surrogate, &opts.pod) {
            (Some(s), Some(pod)) => certified_point(model, &full, grid, ocp, z, &u_prev, &opts.pg, s, pod, &mut log)?,
            _ => {
                let sol = solve_reference(&full, grid, ocp, z, &u_prev, &opts.pg)?;
                let (value, _, _) = objectives(&full, grid, ocp, &sol.u)?;
                ParetoPoint { u: sol.u, value, reference: Some(z), rank: None, estimate: None, converged: sol.converged }
            }
        };
        if point.value[1] <= j_end[1] {
            log.push("scalarized problem reached the control-cost minimizer; stopping".into());
            break;
        }
        let phi_perp = [z[0] - point.value[0], z[1] - point.value[1]];
        if !point.converged {
            log.push(format!("reference point ({:.6e}, {:.6e}) not solved to tolerance; skipped", z[0], z[1]));
        }
        if phi_perp[0].hypot(phi_perp[1]) == 0.0 {
            log.push("reference point lies on the front; stopping".into());
            break;
        }
        let n = unit(phi_perp);
        let tang = [-n[1], n[0]];
        z = [z[0] + opts.h_par * tang[0] + opts.h_perp * n[0], z[1] + opts.h_par * tang[1] + opts.h_perp * n[1]];
        u_prev = point.u.clone();
        if point.converged {
            points.push(point);
        }
    }
    points.push(ParetoPoint { u: u_end, value: j_end, reference: None, rank: None, estimate: None, converged: true });
    Ok(ParetoFront { points, references, h_par: opts.h_par, h_perp: opts.h_perp, alpha_ws: opts.alpha_ws, log })
}

#[allow(clippy::too_many_arguments)]
fn certified_point(
    model: &FeModel,
    full: &FullDynamics<'_>,
    grid: &TimeGrid,
    ocp: &OcpSpec,
    z: [f64; 2],
    u0: &DMatrix<f64>,
    pg: &PgOptions,
    s: &mut Surrogate,
    pod: &ParetoPod,
    log: &mut Vec<String>,
) -> Result<ParetoPoint> {
    loop {
        let rom = galerkin_project(model, &s.basis.with_rank(s.ell), ProjectionMode::Orthogonal)?;
        let red = RomDynamics::new(&rom, model.mass())?.with_initial_state(model.y0())?;
        let sol = solve_reference(&red, grid, ocp, z, u0, pg)?;
        let (value, g1, g2) = objectives(full, grid, ocp, &sol.u)?;
        let zeta = perturbation(&scalarized_gradient(value, z, &g1, &g2), &sol.u, &ocp.ua, &ocp.ub);
        let kappa = 0.5 * (value[1] - z[1]);
        let estimate = if value[0] >= z[0] && kappa > 0.0 { u_norm(grid, &zeta) / kappa } else { f64::INFINITY };
        if estimate <= pod.eps_max || s.ell >= s.cap {
            if estimate > pod.eps_max {
                log.push(format!("rank {} exhausted with estimate {estimate:.3e} at z = ({:.6e}, {:.6e})", s.ell, z[0], z[1]));
            }
            return Ok(ParetoPoint {
                u: sol.u,
                value,
                reference: Some(z),
                rank: Some(s.ell),
                estimate: Some(estimate),
                converged: sol.converged,
            });
        }
        s.ell = (s.ell + pod.ell_incr.max(1)).min(s.cap);
    }
}
