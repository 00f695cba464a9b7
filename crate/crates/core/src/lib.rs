//! Temporal causal discovery toolkit.
//!
//! Learns to classify lagged variable pairs of a multivariate time series as
//! causal or non-causal. Candidate links `z_i^(t-tau) -> z_j^(t)` are scored by
//! a balanced random forest trained on information-theoretic and statistical
//! descriptors extracted from synthetic nonlinear autoregressive series with
//! known ground truth. Classical vector-autoregression baselines and the usual
//! rank-based comparison tests are included for benchmarking.

pub mod baselines;
pub mod data;
pub mod descriptors;
pub mod dsep;
pub mod error;
pub mod forest;
pub mod knn;
pub mod metrics;
pub mod mi;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use data::{CandidateLink, LaggedDataset, TemporalGraph, TimeSeriesMatrix};
pub use descriptors::{DescriptorConfig, DescriptorVector, FEATURE_COUNT};
pub use error::Error;
pub use forest::{ForestConfig, ForestModel};
pub use synth::{GenConfig, GeneratedInstance, NoiseKind};

pub type Result<T> = std::result::Result<T, Error>;
