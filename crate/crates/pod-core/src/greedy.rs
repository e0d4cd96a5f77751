use nalgebra::DMatrix;

use crate::pod::{compute_pod, fix_sign, PodBasis, Rank, Strategy};
use crate::snapshots::SnapshotSet;
use crate::space::WeightedSpace;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct GreedyResult {
    /// W-orthonormal basis. Its eigenvalues are the residual energies captured
    /// by each mode, listed in selection order rather than sorted.
    pub basis: PodBasis,
    /// Trajectory chosen in each round.
    pub selected: Vec<usize>,
    /// Largest trajectory projection error before each round, plus the final one.
    pub max_errors: Vec<f64>,
    /// Final projection error of every trajectory.
    pub errors: Vec<f64>,
}

fn trajectory_error(space: &WeightedSpace, psi: &DMatrix<f64>, y: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let resid = residual(space, psi, y);
    let wr = space.apply_dense(&resid);
    (0..y.ncols()).map(|j| alpha[j] * resid.column(j).dot(&wr.column(j))).sum()
}

fn residual(space: &WeightedSpace, psi: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    if psi.ncols() == 0 {
        return y.clone();
    }
    y - psi * psi.tr_mul(&space.apply_dense(y))
}

/// Greedy multi-trajectory POD: repeatedly picks the unused trajectory with
/// the largest projection error and adds the leading POD modes of its
/// residual until that trajectory's error drops below `eps`.
pub fn pod_greedy(
    space: &WeightedSpace,
    trajectories: &[DMatrix<f64>],
    alpha: &[f64],
    eps: f64,
    ell_max: usize,
) -> Result<GreedyResult> {
    if trajectories.is_empty() {
        return Err(Error::InvalidArgument("at least one trajectory is required".into()));
    }
    let m = space.dim();
    let mut psi = DMatrix::<f64>::zeros(m, 0);
    let mut lambdas = Vec::new();
    let mut used = vec![false; trajectories.len()];
    let mut selected = Vec::new();
    let mut max_errors = Vec::new();
    let total: f64 = trajectories
        .iter()
        .map(|y| trajectory_error(space, &DMatrix::zeros(m, 0), y, alpha))
        .sum();
    loop {
        let errors: Vec<f64> = trajectories.iter().map(|y| trajectory_error(space, &psi, y, alpha)).collect();
        let worst = errors.iter().copied().fold(0.0, f64::max);
        max_errors.push(worst);
        if worst <= eps || selected.len() == trajectories.len() || psi.ncols() >= ell_max {
            let basis = PodBasis::from_parts(space.clone(), psi, lambdas, total);
            return Ok(GreedyResult { basis, selected, max_errors, errors });
        }
        let k = (0..trajectories.len())
            .filter(|&k| !used[k])
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if errors[b] >= errors[k] => Some(b),
                _ => Some(k),
            })
            .expect("an unused trajectory remains");
        used[k] = true;
        selected.push(k);
        let resid = residual(space, &psi, &trajectories[k]);
        let set = SnapshotSet::new(space.clone(), vec![resid], vec![1.0], alpha.to_vec())?;
        let pod = match compute_pod(&set, Rank::Fixed(usize::MAX), Strategy::Auto) {
            Ok(p) => p,
            Err(Error::EmptyBasis) => continue,
            Err(e) => return Err(e),
        };
        let room = ell_max - psi.ncols();
        let mut take = pod.rank();
        for l in 1..=pod.rank() {
            if pod.tail(l) <= eps {
                take = l;
                break;
            }
        }
        let take = take.min(room).max(1);
        let mut grown = DMatrix::zeros(m, psi.ncols() + take);
        grown.columns_mut(0, psi.ncols()).copy_from(&psi);
        grown.columns_mut(psi.ncols(), take).copy_from(&pod.columns(take));
        gram_schmidt(space, &mut grown, psi.ncols());
        psi = grown;
        lambdas.extend_from_slice(&pod.eigenvalues()[..take]);
    }
}

/// W-orthonormalizes columns `from..` against all earlier ones, twice.
fn gram_schmidt(space: &WeightedSpace, u: &mut DMatrix<f64>, from: usize) {
    for _ in 0..2 {
        for i in from..u.ncols() {
            for k in 0..i {
                let ck = u.column(k).into_owned();
                let p = space.inner(&ck, &u.column(i).into_owned());
                u.column_mut(i).axpy(-p, &ck, 1.0);
            }
            let mut ci = u.column(i).into_owned();
            let nrm = space.norm(&ci);
            ci /= nrm;
            fix_sign(&mut ci);
            u.set_column(i, &ci);
        }
    }
}
