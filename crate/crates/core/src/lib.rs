//! Traffic-scenario categorization and category-completeness analysis.
//!
//! The crate is organized along the processing chain:
//!
//! - [`data`]: highD-style track ingestion, synthetic scenario generation,
//!   labeling, balancing, splitting and the on-disk dataset format.
//! - [`nn`]: the fixed MLP encoder/decoder/classifier with analytic gradients.
//! - [`codebook`]: nearest-entry quantization with usage-driven reinitialization.
//! - [`train`]: losses, Adam and the training loop.
//! - [`metrics`]: occurrence probabilities, purity, confusion matrices and exports.
//! - [`completeness`]: coupon-collector Monte-Carlo estimation of the minimum
//!   dataset size.
//! - [`pipeline`]: end-to-end orchestration used by the command-line tool.

pub mod checkpoint;
pub mod codebook;
pub mod completeness;
pub mod container;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod train;

pub use codebook::{Codebook, Quantized, UsageStats};
pub use completeness::{completeness_report, CompletenessConfig, CompletenessReport};

pub use data::{BehaviorClass, Dataset, Scenario, SplitTag};
pub use error::{Error, Result};
pub use metrics::{CategoryDistribution, EntropyMode, Evaluation, PurityReport};

pub use nn::{ClassifierInput, ModelDims, ModelParams};
pub use train::{TrainConfig, TrainReport};
