use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::snapshots::SnapshotSet;
use crate::space::WeightedSpace;
use crate::{Error, Result};

/// Eigenvalues at or below `max(RANK_CUTOFF·λ₁, 1e-300)` count as zero.
pub const RANK_CUTOFF: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Thin SVD of the weighted snapshot matrix.
    Svd,
    /// `m × m` eigenproblem.
    GramM,
    /// Method of snapshots: eigenproblem of the column Gram matrix.
    GramSnapshots,
    /// Snapshot method when columns are fewer than `m`, else `GramM`.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    Fixed(usize),
    /// Smallest `ℓ` whose energy ratio exceeds `1 − ε`.
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy)]
pub enum ProjectionMode<'a> {
    /// `c_i = ⟨v, ψ_i⟩_W` in the basis' own inner product.
    Orthogonal,
    /// Best approximation in another inner product: solves `(ΨᵀHΨ)c = ΨᵀHv`.
    Cross(&'a WeightedSpace),
}

/// W-orthonormal POD basis. All `d` modes above the rank cutoff are kept so
/// that tail sums stay available; `ell` is the requested working rank.
#[derive(Debug, Clone)]
pub struct PodBasis {
    space: WeightedSpace,
    vectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    total_energy: f64,
    ell: usize,
    truncated: bool,
}

impl PodBasis {
    /// Wraps externally built W-orthonormal vectors with their energies.
    pub fn from_parts(space: WeightedSpace, vectors: DMatrix<f64>, eigenvalues: Vec<f64>, total_energy: f64) -> Self {
        assert_eq!(vectors.ncols(), eigenvalues.len());
        let ell = eigenvalues.len();
        Self { space, vectors, eigenvalues, total_energy, ell, truncated: false }
    }

    pub fn space(&self) -> &WeightedSpace {
        &self.space
    }

    /// Working rank ℓ.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Numerical rank d.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Whether the requested rank exceeded the numerical rank.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// The first ℓ modes as columns.
    pub fn basis(&self) -> DMatrix<f64> {
        self.columns(self.ell)
    }

    /// The first `k` modes as columns.
    pub fn columns(&self, k: usize) -> DMatrix<f64> {
        self.vectors.columns(0, k.min(self.rank())).into_owned()
    }

    pub fn all_vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// Same modes with a different working rank (clamped to d).
    pub fn with_rank(&self, ell: usize) -> Self {
        let mut b = self.clone();
        b.truncated = ell > self.rank();
        b.ell = ell.min(self.rank());
        b
    }

    /// `E(ℓ) = Σ_{i≤ℓ} λ_i / Λ`.
    pub fn energy_ratio(&self, ell: usize) -> f64 {
        self.eigenvalues.iter().take(ell).sum::<f64>() / self.total_energy
    }

    /// `Σ_{i>ℓ} λ_i` through the numerical rank.
    pub fn tail(&self, ell: usize) -> f64 {
        self.eigenvalues.iter().skip(ell).sum()
    }

    /// Reduced coefficients of `v` in the first `ell` modes.
    pub fn project(&self, ell: usize, v: &DVector<f64>, mode: ProjectionMode<'_>) -> Result<DVector<f64>> {
        let psi = self.columns(ell);
        match mode {
            ProjectionMode::Orthogonal => Ok(psi.tr_mul(&self.space.apply(v))),
            ProjectionMode::Cross(h) => {
                let hpsi = h.apply_dense(&psi);
                let gram = psi.tr_mul(&hpsi);
                let rhs = hpsi.tr_mul(v);
                gram.cholesky().map(|c| c.solve(&rhs)).ok_or(Error::SingularGram)
            }
        }
    }

    /// `Ψc`.
    pub fn lift(&self, c: &DVector<f64>) -> DVector<f64> {
        self.vectors.columns(0, c.len()) * c
    }
}

/// Computes the POD basis of `set` with the requested rank rule.
pub fn compute_pod(set: &SnapshotSet, rank: Rank, strategy: Strategy) -> Result<PodBasis> {
    let space = set.space();
    let (y, d) = set.stacked();
    let (m, ncols) = y.shape();
    // Ỹ = LᵀY D^{1/2}: Euclidean geometry of Ỹ equals W-geometry of Y.
    let mut yt = DMatrix::zeros(m, ncols);
    for c in 0..ncols {
        let col = space.to_euclidean(&y.column(c).into_owned()) * d[c].sqrt();
        yt.set_column(c, &col);
    }
    let total_energy = yt.norm_squared();
    if !(total_energy > 0.0) {
        return Err(Error::EmptyBasis);
    }
    let strategy = match strategy {
        Strategy::Auto if ncols < m => Strategy::GramSnapshots,
        Strategy::Auto => Strategy::GramM,
        s => s,
    };
    let (values, mut tilde) = match strategy {
        Strategy::Svd => {
            let svd = yt.clone().svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let vals: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
            sort_descending(vals, u)
        }
        Strategy::GramM => {
            let r = &yt * yt.transpose();
            let eig = SymmetricEigen::new(r);
            sort_descending(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        }
        Strategy::GramSnapshots => {
            let k = yt.transpose() * &yt;
            let eig = SymmetricEigen::new(k);
            let (vals, v) = sort_descending(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
            let mut u = &yt * v;
            for (i, &l) in vals.iter().enumerate() {
                if l > 0.0 {
                    u.column_mut(i).scale_mut(1.0 / l.sqrt());
                }
            }
            (vals, u)
        }
        Strategy::Auto => unreachable!(),
    };
    let lambda1 = values[0];
    let cutoff = (RANK_CUTOFF * lambda1).max(1e-300);
    let d = values.iter().take_while(|&&l| l > cutoff).count();
    if d == 0 {
        return Err(Error::EmptyBasis);
    }
    tilde = tilde.columns(0, d).into_owned();
    if strategy == Strategy::GramSnapshots {
        orthonormalize(&mut tilde);
    }
    let mut vectors = DMatrix::zeros(m, d);
    for i in 0..d {
        let mut psi = space.from_euclidean(&tilde.column(i).into_owned());
        fix_sign(&mut psi);
        vectors.set_column(i, &psi);
    }
    let eigenvalues = values[..d].to_vec();
    let (ell, truncated) = match rank {
        Rank::Fixed(l) => (l.min(d), l > d),
        Rank::Tolerance(eps) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidArgument(format!("energy tolerance must lie in (0, 1), got {eps}")));
            }
            let mut acc = 0.0;
            let mut ell = d;
            for (i, l) in eigenvalues.iter().enumerate() {
                acc += l;
                if acc / total_energy > 1.0 - eps {
                    ell = i + 1;
                    break;
                }
            }
            (ell, false)
        }
    };
    Ok(PodBasis { space: space.clone(), vectors, eigenvalues, total_energy, ell, truncated })
}

/// Stable descending sort, so ties keep the solver's order.
fn sort_descending(values: Vec<f64>, vectors: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted: Vec<f64> = idx.iter().map(|&i| values[i].max(0.0)).collect();
    let mut out = DMatrix::zeros(vectors.nrows(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        out.set_column(c, &vectors.column(i));
    }
    (sorted, out)
}

/// Modified Gram–Schmidt applied twice (Euclidean).
fn orthonormalize(u: &mut DMatrix<f64>) {
    for _ in 0..2 {
        for i in 0..u.ncols() {
            for k in 0..i {
                let p = u.column(k).dot(&u.column(i));
                let ck = u.column(k).into_owned();
                u.column_mut(i).axpy(-p, &ck, 1.0);
            }
            let nrm = u.column(i).norm();
            u.column_mut(i).scale_mut(1.0 / nrm);
        }
    }
}

/// Scales `v` so its largest-magnitude entry (first one on ties) is positive.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// `Σ_k ω_k Σ_j α_j ‖y_j^k − Π_ℓ y_j^k‖²_W`, evaluated column by column.
pub fn projection_error(set: &SnapshotSet, basis: &PodBasis, ell: usize) -> f64 {
    let psi = basis.columns(ell);
    let space = set.space();
    let mut total = 0.0;
    for (k, b) in set.blocks().iter().enumerate() {
        let coeffs = psi.tr_mul(&space.apply_dense(b));
        let resid = b - &psi * coeffs;
        let wr = space.apply_dense(&resid);
        for j in 0..set.n() {
            total += set.omega()[k] * set.alpha()[j] * resid.column(j).dot(&wr.column(j));
        }
    }
    total
}

/// `λ_{ℓ+1}/(ω_k α_j)`, bounding the single-column error `‖y_j^k − Π_ℓ y_j^k‖²_W`.
pub fn pointwise_error_bound(basis: &PodBasis, omega_k: f64, alpha_j: f64, ell: usize) -> f64 {
    if ell >= basis.rank() {
        0.0
    } else {
        basis.eigenvalues()[ell] / (omega_k * alpha_j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn euclid_set(y: DMatrix<f64>, alpha: Vec<f64>) -> SnapshotSet {
        let m = y.nrows();
        SnapshotSet::new(WeightedSpace::identity(m), vec![y], vec![1.0], alpha).unwrap()
    }

    #[test]
    fn single_column() {
        let set = euclid_set(dmatrix![2.0; 0.0], vec![1.0]);
        for s in [Strategy::Svd, Strategy::GramM, Strategy::GramSnapshots] {
            let b = compute_pod(&set, Rank::Fixed(1), s).unwrap();
            assert!((b.eigenvalues()[0] - 4.0).abs() < 1e-14);
            assert!((b.vector(0) - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-14);
        }
    }

    #[test]
    fn identity_snapshots_give_tied_eigenvalues() {
        let set = euclid_set(DMatrix::identity(2, 2), vec![1.0, 1.0]);
        let b = compute_pod(&set, Rank::Fixed(2), Strategy::GramM).unwrap();
        assert_eq!(b.rank(), 2);
        assert!((b.eigenvalues()[0] - 1.0).abs() < 1e-14 && (b.eigenvalues()[1] - 1.0).abs() < 1e-14);
        for i in 0..2 {
            let v = b.vector(i);
            let k = if v[0].abs() >= v[1].abs() { 0 } else { 1 };
            assert!(v[k] > 0.0);
        }
    }

    #[test]
    fn zero_snapshots_are_rejected() {
        let set = euclid_set(DMatrix::zeros(3, 2), vec![0.5, 0.5]);
        assert_eq!(compute_pod(&set, Rank::Fixed(1), Strategy::Auto).unwrap_err(), Error::EmptyBasis);
    }

    #[test]
    fn rank_request_beyond_numerical_rank_is_flagged() {
        let set = euclid_set(dmatrix![1.0, 2.0; 1.0, 2.0; 0.0, 0.0], vec![1.0, 1.0]);
        let b = compute_pod(&set, Rank::Fixed(3), Strategy::Svd).unwrap();
        assert_eq!((b.rank(), b.ell(), b.truncated()), (1, 1, true));
    }

    #[test]
    fn tolerance_selects_smallest_sufficient_rank() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let set = euclid_set(y, vec![1.0; 3]);
        // Energies 9, 4, 1 of 14: E(1) = 0.643, E(2) = 0.929.
        let b = compute_pod(&set, Rank::Tolerance(0.1), Strategy::Auto).unwrap();
        assert_eq!(b.ell(), 2);
        let b = compute_pod(&set, Rank::Tolerance(0.5), Strategy::Auto).unwrap();
        assert_eq!(b.ell(), 1);
    }

    #[test]
    fn rank_one_pointwise_bound_is_total_energy() {
        let set = euclid_set(dmatrix![1.0; 1.0], vec![1.0]);
        let b = compute_pod(&set, Rank::Fixed(1), Strategy::Svd).unwrap();
        assert!((pointwise_error_bound(&b, 1.0, 1.0, 0) - 2.0).abs() < 1e-14);
        assert_eq!(pointwise_error_bound(&b, 1.0, 1.0, 1), 0.0);
    }
}
