//! Fully discrete finite element schemes for the unsteady 3D
//! magneto-micropolar equations on the unit cube.

pub mod mesh;
pub mod quadrature;
pub mod fespace;
pub mod sparse;
pub mod assembly;
pub mod linsolve;
pub mod manufactured;
pub mod schemes;
pub mod experiments;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("conflicting constraint on dof {dof}: {first} vs {second}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
