//! Shared numeric engines.

pub mod density;
pub mod grid;
pub mod interp;
pub mod mc;
pub mod quadrature;
pub mod regress;
pub mod stats;

pub use density::Density1D;
pub use grid::{convolve_densities, GridDensity, GridSpec};
pub use quadrature::{integrate, Domain, QuadratureRule, QuadratureSpec};
