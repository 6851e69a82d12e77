//! Tensor-product B-spline and NURBS fields: evaluation, differentiation,
//! refinement and projection.

mod field;
mod knots;
mod project;
pub mod text;

pub use field::{insertion_matrix, Side, SplineField, TensorBasis};
pub use knots::{BasisWindow, DerivativeWindow, KnotVector};
pub use project::{collocation_matrix, l2_project_field, l2_project_fn, l2_project_samples, Sampling};
