//! A-priori tail sums and residual-based a-posteriori bounds.
//!
//! Dual norms of residual functionals `r ∈ R^m` are evaluated through their
//! Riesz representatives in the V-inner product: `‖r‖_* = (rᵀW_V⁻¹r)^{1/2}`.

use std::path::Path;

use evolve::OcpSpec;
use fem_core::{BandedCholesky, FeModel, TimeGrid};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use pod_core::{PodBasis, ProjectionMode, WeightedSpace};

use crate::model::RomModel;
use crate::{Error, Result};

/// Which a-priori tail to evaluate. Each case names the basis' own space.
#[derive(Debug, Clone, Copy)]
pub enum TailCase<'a> {
    /// H-orthonormal basis with the tail measured in V: `Σ λ_i ‖ψ_i‖²_V`.
    HBasisVNorms { v: &'a WeightedSpace },
    /// H-orthonormal basis, V-orthogonal projection onto the leading modes:
    /// `Σ λ_i ‖ψ_i − Q_V ψ_i‖²_V`.
    HBasisCrossProjected { v: &'a WeightedSpace },
    /// V-orthonormal basis, H-orthogonal projection onto the leading modes:
    /// `Σ λ_i ‖ψ_i − Q_H ψ_i‖²_V`.
    VBasisCrossProjected { h: &'a WeightedSpace },
    /// V-orthonormal basis: `Σ λ_i`.
    VBasisPlain,
}

/// Tail `Σ_{i>ℓ}` through the numerical rank for the chosen case. Unknown
/// multiplicative constants are not included.
pub fn apriori_tail_sum(basis: &PodBasis, ell: usize, case: TailCase<'_>) -> Result<f64> {
    let lambda = basis.eigenvalues();
    let tail = ell.min(basis.rank())..basis.rank();
    let residual_norm = |proj: &WeightedSpace, norm: &WeightedSpace, i: usize| -> Result<f64> {
        let psi = basis.vector(i);
        let c = basis.project(ell, &psi, ProjectionMode::Cross(proj))?;
        let r = psi - basis.columns(ell) * c;
        Ok(norm.norm_squared(&r))
    };
    let mut sum = 0.0;
    for i in tail {
        sum += lambda[i]
            * match case {
                TailCase::VBasisPlain => 1.0,
                TailCase::HBasisVNorms { v } => v.norm_squared(&basis.vector(i)),
                TailCase::HBasisCrossProjected { v } => residual_norm(v, v, i)?,
                TailCase::VBasisCrossProjected { h } => residual_norm(h, basis.space(), i)?,
            };
    }
    Ok(sum)
}

/// Cached Cholesky factor of `W_V` for repeated dual-norm evaluations.
#[derive(Debug, Clone)]
pub struct DualNorm {
    chol: BandedCholesky,
}

impl DualNorm {
    pub fn new(model: &FeModel) -> Result<Self> {
        Ok(Self { chol: BandedCholesky::factor(model.weight_v())? })
    }

    pub fn norm_squared(&self, r: &DVector<f64>) -> f64 {
        let mut x = r.clone();
        self.chol.solve_in_place(x.as_mut_slice());
        r.dot(&x).max(0.0)
    }

    pub fn norm(&self, r: &DVector<f64>) -> f64 {
        self.norm_squared(r).sqrt()
    }

    /// `W_V⁻¹ b` for every column.
    pub fn solve_columns(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.chol.solve_in_place(col.as_mut_slice());
        }
        x
    }
}

/// `sqrt(rᵀ W_V⁻¹ r)`.
pub fn riesz_dual_norm(model: &FeModel, r: &DVector<f64>) -> Result<f64> {
    Ok(DualNorm::new(model)?.norm(r))
}

/// Per-node H-norm bounds and the cumulative V-norm bound of a reduced
/// trajectory, optionally with the true errors against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// Bound on `‖y_j − ŷ_j‖_M`.
    pub bound: Vec<f64>,
    /// Bound on `(Σ_j α_j ‖y_j − ŷ_j‖²_V)^{1/2}`.
    pub bound_v: f64,
    /// Dual norms of the residuals; the first entry is zero.
    pub residual_norms: Vec<f64>,
    pub true_error: Option<Vec<f64>>,
    pub true_v: Option<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub c_v: f64,
    pub zeta: f64,
    /// False for the cubic model, whose bound is reported without guarantee.
    pub rigorous: bool,
}

impl ErrorReport {
    /// Attaches true errors of `lifted` against the full-order `reference`.
    pub fn with_reference(mut self, model: &FeModel, grid: &TimeGrid, reference: &DMatrix<f64>, lifted: &DMatrix<f64>) -> Self {
        let e = reference - lifted;
        let mass = model.mass();
        let wv = model.weight_v();
        let mut v = 0.0;
        let mut h = Vec::with_capacity(e.ncols());
        for (j, col) in e.column_iter().enumerate() {
            let c = col.into_owned();
            h.push(mass.quad_form(&c, &c).max(0.0).sqrt());
            v += grid.weights()[j] * wv.quad_form(&c, &c);
        }
        self.true_error = Some(h);
        self.true_v = Some(v.max(0.0).sqrt());
        self
    }

    /// `bound / true error` per node; NaN where the true error vanishes or is
    /// unknown.
    pub fn efficiency(&self) -> Vec<f64> {
        match &self.true_error {
            Some(t) => self.bound.iter().zip(t).map(|(b, e)| if *e > 0.0 { b / e } else { f64::NAN }).collect(),
            None => vec![f64::NAN; self.bound.len()],
        }
    }

    /// Largest efficiency over nodes whose true error exceeds `floor`.
    pub fn max_efficiency(&self, floor: f64) -> Option<f64> {
        let t = self.true_error.as_ref()?;
        self.bound.iter().zip(t).filter(|(_, e)| **e > floor).map(|(b, e)| b / e).reduce(f64::max)
    }

    /// Whether every bound dominates its true error up to `bound ≥ (1 − rel)·e − abs`.
    pub fn dominates(&self, rel: f64, abs: f64) -> Option<bool> {
        let t = self.true_error.as_ref()?;
        let nodes = self.bound.iter().zip(t).all(|(b, e)| *b >= (1.0 - rel) * e - abs);
        let v = self.true_v.is_some_and(|e| self.bound_v >= (1.0 - rel) * e - abs);
        Some(nodes && v)
    }

    /// CSV with columns `node, time, bound, true_error, efficiency`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["node", "time", "bound", "true_error", "efficiency"]).map_err(io)?;
        let eff = self.efficiency();
        for (j, t) in self.times.iter().enumerate() {
            let truth = self.true_error.as_ref().map_or(f64::NAN, |e| e[j]);
            w.write_record([
                j.to_string(),
                format!("{t:.16e}"),
                format!("{:.16e}", self.bound[j]),
                format!("{truth:.16e}"),
                format!("{:.16e}", eff[j]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Residual of the full implicit Euler step at node `j ≥ 1` for the lifted
/// trajectory `y`.
fn state_residual(model: &FeModel, grid: &TimeGrid, y: &DMatrix<f64>, u: &DMatrix<f64>, j: usize) -> DVector<f64> {
    let dt = grid.dt(j);
    let t = grid.t(j);
    let cur = y.column(j).into_owned();
    let diff = (&cur - y.column(j - 1)) / dt;
    let mut r = model.mass().mul_vec(&diff) + model.system_matrix(t).mul_vec(&cur);
    if model.is_cubic() {
        r += model.mass().mul_vec(&cur.map(|v| v * v * v));
    }
    r -= model.control() * u.column(j);
    if model.has_loads() {
        r -= model.load(t);
    }
    r
}

fn constants(model: &FeModel) -> Result<fem_core::Coercivity> {
    let c = model.coercivity().ok_or_else(|| Error::MissingConstants("model carries no coercivity data".into()))?;
    if !(c.gamma1 > 0.0) || !(c.c_v > 0.0) || c.gamma2 < 0.0 {
        return Err(Error::MissingConstants(format!("unusable coercivity data {c:?}")));
    }
    Ok(c)
}

/// Residual-based bounds for the lifted reduced trajectory `lifted` driven by
/// `u` from the full initial state `y_init`.
///
/// With `a(φ, φ) ≥ γ₁‖φ‖²_V − γ₂‖φ‖²_H` the squared H-errors obey
/// `b_j = (b_{j−1} + δt_j‖r_j‖²_*/γ₁) / (1 + δt_j(γ₁/c_V² − 2γ₂))`, starting from
/// the exact initial projection error.
pub fn aposteriori_state(
    model: &FeModel,
    grid: &TimeGrid,
    lifted: &DMatrix<f64>,
    u: &DMatrix<f64>,
    y_init: &DVector<f64>,
) -> Result<ErrorReport> {
    let coer = constants(model)?;
    let n = grid.len();
    if lifted.shape() != (model.dim(), n) || u.shape() != (model.n_controls(), n) || y_init.len() != model.dim() {
        return Err(Error::InvalidArgument("trajectory data does not match the model and grid".into()));
    }
    let dual = DualNorm::new(model)?;
    let (g1, g2, cv) = (coer.gamma1, coer.gamma2, coer.c_v);
    let e1 = y_init - lifted.column(0);
    let mut b = model.mass().quad_form(&e1, &e1).max(0.0);
    let b1 = b;
    let v1 = model.weight_v().quad_form(&e1, &e1).max(0.0);
    let mut bound = vec![b.sqrt()];
    let mut residual_norms = vec![0.0];
    let (mut sum_r, mut sum_b) = (0.0, 0.0);
    for j in 1..n {
        let dt = grid.dt(j);
        let r2 = dual.norm_squared(&state_residual(model, grid, lifted, u, j));
        let denom = 1.0 + dt * (g1 / (cv * cv) - 2.0 * g2);
        if denom <= 0.0 {
            return Err(Error::InvalidArgument(format!("time step {dt} too large for the shifted recursion")));
        }
        b = (b + dt * r2 / g1) / denom;
        sum_r += dt * r2;
        sum_b += dt * b;
        bound.push(b.sqrt());
        residual_norms.push(r2.sqrt());
    }
    let zeta = grid.zeta_ratio();
    let alpha1 = grid.weights()[0];
    let bound_v = (alpha1 * v1 + zeta / g1 * (b1 + sum_r / g1 + 2.0 * g2 * sum_b)).sqrt();
    Ok(ErrorReport {
        times: grid.nodes().to_vec(),
        bound,
        bound_v,
        residual_norms,
        true_error: None,
        true_v: None,
        gamma1: g1,
        gamma2: g2,
        c_v: cv,
        zeta,
        rigorous: !model.is_cubic(),
    })
}

/// Bound on the U-norm gap between full and reduced gradients at one control.
#[derive(Debug, Clone)]
pub struct GradientBound {
    pub bound: f64,
    /// Reduced gradient at the control.
    pub rom_gradient: DMatrix<f64>,
    pub state: ErrorReport,
    /// Dual norms of the adjoint residuals (scaled by `1/δt_j`).
    pub dual_residual_norms: Vec<f64>,
    /// `λ_max(BᵀW_V⁻¹B)`.
    pub input_norm: f64,
}

/// Estimates `‖∇ĵ(u) − ∇ĵ^ℓ(u)‖_U` for a linear coercive model. The reduced
/// trajectory starts from the H-orthogonal projection of `y_init`.
///
/// The adjoint error `e_j = q_j − Ψq̂_j` satisfies
/// `|e_j|² − |e_{j+1}|² + γ₁δt_j‖e_j‖²_V ≤ S_j` with
/// `S_j = 2δt_j‖ρ̃_j‖²_*/γ₁ + 2σ₁²α_j²c_V² b_j/(γ₁δt_j)`, where `ρ̃_j` is the scaled
/// adjoint residual and `b_j` the squared state bound. The last node carries
/// the terminal term `σ₂² b_n/2` instead. The gradient gap is then bounded by
/// `λ_max(BᵀW_V⁻¹B)·max_j(δt_j/α_j)·Σ_j δt_j‖e_j‖²_V`.
pub fn aposteriori_gradient(
    model: &FeModel,
    rom: &RomModel,
    grid: &TimeGrid,
    u: &DMatrix<f64>,
    ocp: &OcpSpec,
    y_init: &DVector<f64>,
) -> Result<GradientBound> {
    let coer = constants(model)?;
    if model.is_cubic() || coer.gamma2 != 0.0 {
        return Err(Error::InvalidArgument("the gradient estimator needs a linear coercive model".into()));
    }
    ocp.validate(model.dim(), grid)?;
    let n = grid.len();
    let c_init = rom.project_state(y_init)?;
    let c = rom.solve(grid, &c_init, u)?;
    let y_hat = rom.lift_all(&c);
    let state = aposteriori_state(model, grid, &y_hat, u, y_init)?;
    let src = ocp.adjoint_sources(model.mass(), grid, &y_hat);
    let q = rom.backward(grid, &c, &rom.psi().tr_mul(&src))?;
    let rom_gradient = ocp.gradient(grid, u, &rom.bt(&q));
    let q_hat = rom.lift_all(&q);

    let dual = DualNorm::new(model)?;
    let (g1, cv) = (coer.gamma1, coer.c_v);
    let alpha = grid.weights();
    let mut dual_residual_norms = vec![0.0; n];
    let mut total = 0.0;
    for j in 1..n {
        let dt = grid.dt(j);
        let qj = q_hat.column(j).into_owned();
        let mut rho = model.mass().mul_vec(&qj) + model.system_matrix(grid.t(j)).tr_mul_vec(&qj) * dt;
        if j + 1 < n {
            rho -= model.mass().mul_vec(&q_hat.column(j + 1).into_owned());
        }
        rho -= src.column(j);
        let rho2 = dual.norm_squared(&rho) / (dt * dt);
        dual_residual_norms[j] = rho2.sqrt();
        let bj = state.bound[j] * state.bound[j];
        let coupling = ocp.sigma1 * ocp.sigma1 * alpha[j] * alpha[j] * cv * cv * bj / (g1 * dt);
        total += if j + 1 < n {
            2.0 * (dt * rho2 / g1 + coupling)
        } else {
            2.0 * (dt * rho2 / g1 + coupling + 0.5 * ocp.sigma2 * ocp.sigma2 * bj)
        };
    }
    let sum_v = total / g1;
    let b = model.control();
    let btwb = b.tr_mul(&dual.solve_columns(b));
    let input_norm = SymmetricEigen::new((&btwb + btwb.transpose()) * 0.5).eigenvalues.max().max(0.0);
    let ratio = (1..n).map(|j| grid.dt(j) / alpha[j]).fold(0.0, f64::max);
    Ok(GradientBound { bound: (input_norm * ratio * sum_v).sqrt(), rom_gradient, state, dual_residual_norms, input_norm })
}
