//! Finite-element building blocks for linear and cubic parabolic problems on
//! structured 1D and 2D meshes: sparse storage, banded solvers, P1 assembly,
//! time grids with trapezoidal weights and ready-made model presets.

pub mod mesh;
pub mod model;
pub mod presets;
pub mod sparse;
pub mod time;

pub use mesh::{BoundaryLabel, Mesh, Rect};
pub use model::{assemble_model, Coercivity, ControlShape, FeModel, LoadTerm, ModelData, TimeProfile, Velocity};
pub use sparse::{BandedCholesky, BandedLu, CsrMatrix};
pub use time::{Spacing, TimeGrid};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is singular (zero pivot in column {index})")]
    Singular { index: usize },
    #[error("matrix is not positive definite (failure at row {index})")]
    NotPositiveDefinite { index: usize },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
