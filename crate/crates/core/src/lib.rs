//! Score functions, Stein kernels and information functionals for concrete
//! probability laws, with numeric checks of the identities that connect them.
//!
//! The numeric core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`.

// `!(a < b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod functionals;
pub mod linalg;
pub mod models;
pub mod numerics;
pub mod representations;
pub mod bounds;
pub mod variational;
pub mod verify;
pub mod scalar;
pub mod stein_kernel;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double precision aliases.
pub type Matrix = linalg::Matrix<f64>;
pub type DensityModel1D = models::DensityModel1D<f64>;
pub type ProductModel = models::ProductModel<f64>;
pub type GaussianModel = models::GaussianModel<f64>;
pub type MultiModel = models::MultiModel<f64>;
pub type QuadratureSpec = numerics::QuadratureSpec<f64>;
