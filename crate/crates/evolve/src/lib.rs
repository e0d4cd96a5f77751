//! Implicit time stepping for `M y' + A(t) y (+ M N(y)) = g(t) + B u(t)` and the
//! discrete adjoint of the implicit Euler scheme.

pub mod io;
pub mod ocp;
pub mod solver;
pub mod trajectory;

pub use ocp::{CostParts, OcpSpec, Target};
pub use solver::{solve_adjoint, solve_semilinear, solve_theta, FullSolver};
pub use trajectory::{ControlTrajectory, Kind, Trajectory};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear solve failed at time node {node}: {source}")]
    Solve { node: usize, source: fem_core::Error },
    #[error("Newton iteration did not converge at time node {node} (residual {residual:e})")]
    Newton { node: usize, residual: f64 },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
