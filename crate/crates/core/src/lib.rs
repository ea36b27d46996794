//! Two-species nonlocal advection–reaction system with flux-driven free
//! boundaries: time stepping, principal eigenvalues, reproduction numbers and
//! threshold searches.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretize;
pub mod error;
pub mod freeboundary;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod spectral;
pub mod steady;
pub mod thresholds;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid = discretize::Grid<f64>;
pub type KernelSpec = model::KernelSpec<f64>;
pub type NonlinearitySpec = model::NonlinearitySpec<f64>;
pub type CoefficientField = model::CoefficientField<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type InitialData = model::InitialData<f64>;
