//! Analytic distributions: the ground truth every numeric estimate is checked against.

mod multivariate;
mod smoothed;
pub mod suite;
mod support;
mod univariate;

pub use multivariate::{GaussianModel, Model, MultiModel, ProductModel};
pub use smoothed::{GaussianBlur, SmoothedLaw};
pub use support::{Support, SupportKind};
pub use univariate::{DensityModel1D, Family};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Offset of the mixture components; the component standard deviation is
/// `sqrt(1 - MIXTURE_OFFSET^2) = 0.6`.
pub const MIXTURE_OFFSET: f64 = 0.8;

/// Names accepted by [`model_by_name`] besides the `smoothed:NAME:T0` form.
pub const STANDARD_MODEL_NAMES: [&str; 5] =
    ["gaussian", "uniform", "exp_centered", "laplace", "gauss_mixture"];

/// The registered univariate laws, all centered with unit variance.
pub fn register_standard_models<T: Real>() -> Vec<DensityModel1D<T>> {
    vec![
        DensityModel1D::gaussian(),
        DensityModel1D::uniform(),
        DensityModel1D::exp_centered(),
        DensityModel1D::laplace(),
        DensityModel1D::gauss_mixture(T::c(MIXTURE_OFFSET)).expect("registered mixture offset"),
    ]
}

/// Looks a model up by registry name. `smoothed:NAME:T0` builds the Gaussian
/// smoothing `sqrt(T0) X + sqrt(1 - T0) Z` of a registered law.
pub fn model_by_name<T: Real>(name: &str) -> Result<DensityModel1D<T>> {
    let name = name.trim();
    if let Some(rest) = name.strip_prefix("smoothed:") {
        let (inner, t0) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
        let t0: f64 = t0
            .parse()
            .map_err(|_| Error::UnknownModel(name.to_string()))?;
        let base = model_by_name::<T>(inner)?;
        return DensityModel1D::smoothed(&base, T::c(t0));
    }
    let alias = match name {
        "exp" | "exponential" => "exp_centered",
        "mixture" | "mix" => "gauss_mixture",
        "normal" => "gaussian",
        other => other,
    };
    register_standard_models::<T>()
        .into_iter()
        .find(|m| m.name() == alias)
        .ok_or_else(|| Error::UnknownModel(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_the_five_laws() {
        let names: Vec<_> = register_standard_models::<f64>()
            .iter()
            .map(|m| m.name().to_string())
            .collect();
        assert_eq!(names, STANDARD_MODEL_NAMES);
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(model_by_name::<f64>("exp").unwrap().name(), "exp_centered");
        assert!(matches!(
            model_by_name::<f64>("cauchy"),
            Err(Error::UnknownModel(_))
        ));
        let s = model_by_name::<f64>("smoothed:laplace:0.9").unwrap();
        assert_eq!(s.name(), "smoothed:laplace:0.9");
        assert!(s.regular_score());
        assert!(model_by_name::<f64>("smoothed:laplace:1.5").is_err());
    }
}
