//! Logistic PCA by low-dimensional projection of the natural parameters of
//! the saturated model, with a majorization-minimization solver and a
//! Fantope convex-relaxation solver, plus logistic SVD and standard PCA
//! baselines, model selection helpers, and a simulation harness.

pub mod baselines;
pub mod config;
pub mod data;
pub mod deviance;
mod error;
pub mod fantope;
pub mod linalg;
pub mod mm;
pub mod patterned;
pub mod selection;
pub mod simgen;

pub use config::{FitConfig, Init};
pub use data::{BinaryMatrix, Family, SaturatedParams};
pub use error::LpcaError;

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the numeric kernels are generic over. Blanket-implemented
/// for `f32` and `f64`.
pub trait Real: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}
impl<T> Real for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

/// Converts an `f64` literal into the working scalar type.
pub(crate) fn r<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Converts the working scalar into `f64` (for reports and diagnostics).
pub(crate) fn f<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

pub type Result<T> = std::result::Result<T, LpcaError>;

// Concrete aliases for the common double-precision case.
pub type Matrix64 = nalgebra::DMatrix<f64>;
pub type Vector64 = nalgebra::DVector<f64>;
pub type FitConfig64 = FitConfig<f64>;
pub type SaturatedParams64 = SaturatedParams<f64>;
pub type LpcaModel64 = mm::LpcaModel<f64>;
pub type FantopeModel64 = fantope::FantopeModel<f64>;
pub type LsvdModel64 = baselines::LsvdModel<f64>;
pub type PcaModel64 = baselines::PcaModel<f64>;
pub type FitReport64 = mm::FitReport<f64>;
