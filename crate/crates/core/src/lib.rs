//! Radar material-classification workbench.
//!
//! A synthetic FMCW range-profile simulator, a fixed 12-bin intensity
//! descriptor, a small batch-normalized MLP trained with Adam, and an
//! evaluation harness for geometry and session shift.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod features;
pub mod fingerprint;
pub mod nn;
pub mod radar;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use config::SimConfig;

pub type RangeProfile32 = radar::RangeProfile<f32>;
pub type RangeProfile64 = radar::RangeProfile<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type MlpParams32 = nn::MlpParams<f32>;
pub type MlpParams64 = nn::MlpParams<f64>;
pub type Classifier32 = nn::Classifier<f32>;
pub type Classifier64 = nn::Classifier<f64>;
pub type FusedMlp32 = nn::FusedMlp<f32>;
pub type FusedMlp64 = nn::FusedMlp<f64>;
pub type Workbench32 = experiments::Workbench<f32>;
pub type Workbench64 = experiments::Workbench<f64>;
