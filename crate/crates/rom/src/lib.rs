//! Reduced-order models obtained by Galerkin projection onto POD subspaces,
//! (discrete) empirical interpolation of the cubic term, and computable
//! a-priori and a-posteriori error quantities.

pub mod deim;
pub mod estimate;
pub mod model;

pub use deim::{deim_apply, deim_build, DeimInterpolant, Variant};
pub use estimate::{
    aposteriori_gradient, aposteriori_state, apriori_tail_sum, riesz_dual_norm, DualNorm, ErrorReport, GradientBound,
    TailCase,
};
pub use model::{galerkin_project, solve_rom, InitialProjection, RomModel};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reduced system is singular at time node {node}")]
    Singular { node: usize },
    #[error("reduced Newton iteration did not converge at time node {node} (residual {residual:e})")]
    Newton { node: usize, residual: f64 },
    #[error("missing estimator constants: {0}")]
    MissingConstants(String),
    #[error(transparent)]
    Pod(#[from] pod_core::Error),
    #[error(transparent)]
    Evolve(#[from] evolve::Error),
    #[error(transparent)]
    Fem(#[from] fem_core::Error),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
