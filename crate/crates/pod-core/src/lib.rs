//! Proper orthogonal decomposition of weighted snapshot sets.
//!
//! Snapshots are coefficient vectors in `R^m` equipped with an inner product
//! `⟨u, v⟩_W = uᵀWv`. A rank-`ℓ` basis minimizes the weighted mean-square
//! projection error over all trajectories and time nodes.

pub mod greedy;
pub mod io;
pub mod pod;
pub mod snapshots;
pub mod space;

pub use greedy::{pod_greedy, GreedyResult};
pub use pod::{compute_pod, pointwise_error_bound, projection_error, PodBasis, ProjectionMode, Rank, Strategy};
pub use snapshots::SnapshotSet;
pub use space::{WeightTag, WeightedSpace};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("snapshot set carries no energy; the basis would be empty")]
    EmptyBasis,
    #[error("singular Gram system in cross-space projection")]
    SingularGram,
    #[error(transparent)]
    Fem(#[from] fem_core::Error),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
