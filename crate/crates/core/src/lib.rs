//! Toolkit for historical newspaper page segmentation experiments.

pub mod components;
pub mod error;
pub mod harness;
pub mod label;
pub mod metrics;
pub mod num;
pub mod postprocess;
pub mod rescale;
pub mod tiling;
pub mod warp;

pub use error::{Error, Result};

/// Scores in double precision, as used by reports and the harness.
pub type MetricReport = metrics::MetricReport<f64>;
/// Displacement field in single precision, the sidecar storage format.
pub type WarpField = warp::WarpField<f32>;
pub type WeightedAreaFilter = rescale::WeightedAreaFilter<f64>;
