//! Optimal control of the linear and semilinear parabolic models: projected
//! gradient with a-posteriori certificates, a primal-dual active set method
//! for mixed control-state bounds, receding-horizon control and the Euclidean
//! reference point method for two objectives.
//!
//! Controls are `m_c × n` matrices with the trapezoidal inner product
//! `⟨u, v⟩_U = Σ_j α_j u_j·v_j`; every gradient returned here is the
//! Riesz representative in that product.

pub mod certify;
pub mod dynamics;
pub mod io;
pub mod mpc;
pub mod pareto;
pub mod pdass;
pub mod solve;

pub use certify::{aposteriori_control, certified_pod_optimize, perturbation, Certificate, CertifiedOptions, CertifiedRun, RankRecord};
pub use dynamics::{evaluate, reduced_gradient, Dynamics, Evaluation, FullDynamics, RomDynamics};
pub use io::{write_metadata, write_solution_csv};
pub use mpc::{mpc_run, ControllerMode, MpcOptions, MpcRun, Threshold, UpdateRecord};
pub use pareto::{pareto_front, ParetoFront, ParetoOptions, ParetoPoint, ParetoPod};
pub use pdass::{pdass_solve, MixedConstraintSpec, Multipliers, PdassOptions};
pub use solve::{projected_gradient_solve, ControlSolution, IterRecord, PgOptions, StepRule};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Evolve(#[from] evolve::Error),
    #[error(transparent)]
    Rom(#[from] rom::Error),
    #[error(transparent)]
    Pod(#[from] pod_core::Error),
    #[error(transparent)]
    Fem(#[from] fem_core::Error),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
