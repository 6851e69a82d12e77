//! Spline-based interface coupling for partitioned multiphysics simulations.

pub mod beam;
pub mod bus;
pub mod coupling;
pub mod error;
pub mod heat;
pub mod linalg;
pub mod quadrature;
pub mod rbf;
pub mod spline;
pub mod wire;

pub use error::{Error, Result};
