//! Distribution-free probabilistic regression.
//!
//! A feedforward network emits `K` ensemble samples per input in a single
//! forward pass. It is trained end-to-end on a discrete CRPS estimator and
//! evaluated with coverage (PICP) and quantile-interval calibration (QICE)
//! metrics. The [`distribution`] module turns an ensemble into CDFs,
//! quantiles, confidence intervals and histograms.

pub mod data;
pub mod distribution;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scoring;
pub mod train;

pub use distribution::{DistSummary, EmpiricalDistribution, IntervalEstimate};
pub use error::{Error, Result};
pub use metrics::{MetricsConfig, MetricsReport};
pub use model::{Activation, HeadKind, ModelConfig, ModelParams, Pass};
pub use scoring::{CrpsGradient, EnsemblePrediction};
pub use train::{TrainConfig, TrainHistory};
