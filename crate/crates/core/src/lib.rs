//! Penalized M-type smoothing splines for the location function of
//! discretely sampled functional data.
//!
//! The estimation core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod basis;
pub mod error;
pub mod lambda_select;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod quadrature;
pub mod rkhs;
pub mod scalar;
pub mod simulate;
pub mod solver;

pub use basis::{design_matrix, DesignMatrix, LocalRow, SplineFunction, SplineModel};
pub use error::{Error, Result};
pub use lambda_select::{gcv_value, select, select_with, GcvTrace, Selection};
pub use loss::{make_loss, Loss, LossKind, LossSpec, ScaleMode};
pub use model::{summarize, DesignKind, DesignSummary, ObservationSet, Subject, DEDUP_TOL};
pub use rkhs::{KernelSpec, SobolevFunction};
pub use scalar::Scalar;
pub use simulate::{ErrorLaw, Estimator, MeanKind, MonteCarloReport, SimDesign};
pub use solver::{fit, fit_derivative, FitConfig, FitResult, Fitter, LambdaPolicy};

pub type ObservationSet64 = ObservationSet<f64>;
pub type ObservationSet32 = ObservationSet<f32>;
pub type SplineModel64 = SplineModel<f64>;
pub type SplineModel32 = SplineModel<f32>;
pub type SplineFunction64 = SplineFunction<f64>;
pub type SplineFunction32 = SplineFunction<f32>;
pub type Loss64 = Loss<f64>;
pub type Loss32 = Loss<f32>;
pub type LossSpec64 = LossSpec<f64>;
pub type FitConfig64 = FitConfig<f64>;
pub type FitResult64 = FitResult<f64>;
pub type FitResult32 = FitResult<f32>;
pub type LambdaPolicy64 = LambdaPolicy<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
