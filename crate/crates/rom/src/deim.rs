//! Empirical interpolation of the nodal cubic term.
//!
//! A nonlinearity snapshot `f ∈ R^m` is approximated by `Φ(PᵀΦ)⁻¹Pᵀf`, which
//! only needs `f` at the `p` selected rows. For the reduced model the
//! precomputed product `ΨᵀMΦ(PᵀΦ)⁻¹` maps these samples to Galerkin
//! coefficients.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use pod_core::{compute_pod, Rank, SnapshotSet, Strategy, WeightedSpace};

use crate::{Error, Result};

/// Condition numbers above this value set [`DeimInterpolant::ill_conditioned`].
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Greedy selection over the snapshot columns themselves.
    Eim,
    /// Greedy point selection on a POD basis of the snapshots.
    Deim,
}

#[derive(Debug, Clone)]
struct Reduced {
    // ΨᵀMΦ(PᵀΦ)⁻¹, ℓ × p.
    weights: DMatrix<f64>,
    // PᵀΨ, p × ℓ.
    sampled_basis: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct DeimInterpolant {
    variant: Variant,
    phi: DMatrix<f64>,
    indices: Vec<usize>,
    sampled_phi: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
    reduced: Option<Reduced>,
}

fn argmax_abs(v: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, -1.0);
    for (i, x) in v.enumerate() {
        if x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    best
}

fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Builds a `p`-point interpolant from nonlinearity snapshots `f` (one column
/// per time node).
pub fn deim_build(f: &DMatrix<f64>, p: usize, variant: Variant) -> Result<DeimInterpolant> {
    if f.amax() == 0.0 {
        return Err(Error::InvalidArgument("nonlinearity snapshots vanish".into()));
    }
    if p == 0 || p > f.nrows() {
        return Err(Error::InvalidArgument(format!("cannot select {p} of {} points", f.nrows())));
    }
    let (phi, indices) = match variant {
        Variant::Deim => deim_points(f, p)?,
        Variant::Eim => eim_points(f, p)?,
    };
    DeimInterpolant::new(variant, phi, indices)
}

fn deim_points(f: &DMatrix<f64>, p: usize) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (m, n) = f.shape();
    let set = SnapshotSet::new(WeightedSpace::identity(m), vec![f.clone()], vec![1.0], vec![1.0; n])?;
    let basis = compute_pod(&set, Rank::Fixed(p), Strategy::Auto)?;
    if basis.truncated() {
        return Err(Error::InvalidArgument(format!("snapshots have rank {} < {p}", basis.rank())));
    }
    let phi = basis.basis();
    let mut indices = vec![argmax_abs(phi.column(0).iter().copied()).0];
    for l in 1..p {
        let u = phi.columns(0, l);
        let rhs = DVector::from_iterator(l, indices.iter().map(|&i| phi[(i, l)]));
        let c = select_rows(&u.into_owned(), &indices).lu().solve(&rhs).ok_or(Error::Singular { node: l })?;
        let r = phi.column(l) - phi.columns(0, l) * c;
        indices.push(argmax_abs(r.iter().copied()).0);
    }
    Ok((phi, indices))
}

fn eim_points(f: &DMatrix<f64>, p: usize) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (m, n) = f.shape();
    let mut phi = DMatrix::zeros(m, 0);
    let mut indices: Vec<usize> = Vec::with_capacity(p);
    for l in 0..p {
        // Interpolation residual of every snapshot.
        let res = if l == 0 {
            f.clone()
        } else {
            let lu = select_rows(&phi, &indices).lu();
            let sampled = select_rows(f, &indices);
            let c = lu.solve(&sampled).ok_or(Error::Singular { node: l })?;
            f - &phi * c
        };
        let (k, worst) = argmax_abs((0..n).map(|j| res.column(j).amax()));
        if worst == 0.0 {
            return Err(Error::InvalidArgument(format!("snapshots are interpolated exactly by {l} < {p} points")));
        }
        let xi = res.column(k).into_owned();
        let (idx, _) = argmax_abs(xi.iter().copied());
        let scaled = &xi / xi[idx];
        phi = phi.insert_column(l, 0.0);
        phi.set_column(l, &scaled);
        indices.push(idx);
    }
    Ok((phi, indices))
}

/// Hager's estimate of `‖A⁻¹‖₁` from LU factors of `A` and `Aᵀ`.
fn inverse_norm1(lu: &LU<f64, Dyn, Dyn>, lu_t: &LU<f64, Dyn, Dyn>, p: usize) -> f64 {
    let mut x = DVector::from_element(p, 1.0 / p as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else { return f64::INFINITY };
        est = y.lp_norm(1);
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = lu_t.solve(&xi) else { return f64::INFINITY };
        let (j, zmax) = argmax_abs(z.iter().copied());
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(p);
        x[j] = 1.0;
    }
    est
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

impl DeimInterpolant {
    /// Interpolant from a collateral basis and distinct row indices.
    pub fn new(variant: Variant, phi: DMatrix<f64>, indices: Vec<usize>) -> Result<Self> {
        let p = indices.len();
        if phi.ncols() != p || indices.iter().any(|&i| i >= phi.nrows()) {
            return Err(Error::InvalidArgument("indices do not match the collateral basis".into()));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != p {
            return Err(Error::InvalidArgument("interpolation indices repeat".into()));
        }
        let sampled_phi = select_rows(&phi, &indices);
        let lu = sampled_phi.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Singular { node: 0 });
        }
        let lu_t = sampled_phi.transpose().lu();
        let condition = norm1(&sampled_phi) * inverse_norm1(&lu, &lu_t, p);
        Ok(Self { variant, phi, indices, sampled_phi, lu, condition, reduced: None })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Number of interpolation points `p`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// `PᵀΦ`.
    pub fn sampled_basis(&self) -> &DMatrix<f64> {
        &self.sampled_phi
    }

    /// 1-norm condition estimate of `PᵀΦ`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn ill_conditioned(&self) -> bool {
        !(self.condition <= CONDITION_WARNING)
    }

    /// Coefficients `(PᵀΦ)⁻¹ s` for samples `s` at the indices.
    pub fn coefficients(&self, samples: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(samples).expect("factorization checked at construction")
    }

    /// `Φ(PᵀΦ)⁻¹Pᵀv`.
    pub fn interpolate(&self, v: &DVector<f64>) -> DVector<f64> {
        let samples = DVector::from_iterator(self.len(), self.indices.iter().map(|&i| v[i]));
        &self.phi * self.coefficients(&samples)
    }

    /// Precomputes the reduced operators for basis `psi` and `mass_psi = MΨ`.
    pub fn reduce(mut self, psi: &DMatrix<f64>, mass_psi: &DMatrix<f64>) -> Result<Self> {
        if psi.nrows() != self.phi.nrows() || mass_psi.shape() != psi.shape() {
            return Err(Error::InvalidArgument("basis does not match the collateral basis".into()));
        }
        let coupling = mass_psi.tr_mul(&self.phi);
        // X(PᵀΦ) = coupling  ⇔  (PᵀΦ)ᵀXᵀ = couplingᵀ.
        let weights = self
            .sampled_phi
            .transpose()
            .lu()
            .solve(&coupling.transpose())
            .ok_or(Error::Singular { node: 0 })?
            .transpose();
        self.reduced = Some(Reduced { weights, sampled_basis: select_rows(psi, &self.indices) });
        Ok(self)
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced.is_some()
    }

    fn reduced(&self) -> Result<&Reduced> {
        self.reduced.as_ref().ok_or_else(|| Error::InvalidArgument("interpolant is not attached to a basis".into()))
    }

    /// Interpolated `ΨᵀM(Ψc)³`.
    pub fn apply(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        let r = self.reduced()?;
        let y = &r.sampled_basis * c;
        Ok(&r.weights * y.map(|v| v * v * v))
    }

    /// Jacobian of [`Self::apply`].
    pub fn jacobian(&self, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let r = self.reduced()?;
        let y = &r.sampled_basis * c;
        let mut scaled = r.sampled_basis.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= 3.0 * y[i] * y[i];
        }
        Ok(&r.weights * scaled)
    }
}

/// Reduced cubic term through the interpolant.
pub fn deim_apply(interpolant: &DeimInterpolant, c: &DVector<f64>) -> Result<DVector<f64>> {
    interpolant.apply(c)
}
