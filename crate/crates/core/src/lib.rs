#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ergodic;
pub mod error;
pub mod estimator;
pub mod fbm;
pub mod harness;
pub mod io;
pub mod malliavin;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub use estimator::{EstimateCurve, EstimatorConfig, EstimatorMode};
pub use fbm::{FbmPath, HurstIndex, SamplingMethod};
pub use models::{DriftModel, Kernel};
pub use sde::{ObservationGrid, SamplePath, SdeParams};

pub type FbmPath64 = FbmPath<f64>;
pub type FbmPath32 = FbmPath<f32>;
pub type SamplePath64 = SamplePath<f64>;
pub type SamplePath32 = SamplePath<f32>;
pub type DriftModel64 = DriftModel<f64>;
pub type DriftModel32 = DriftModel<f32>;
pub type EstimateCurve64 = EstimateCurve<f64>;
pub type EstimateCurve32 = EstimateCurve<f32>;
