//! Diamond feature learning for small tabular classification problems:
//! widen first, then narrow.
//!
//! The pipeline expands features with a feature-embedded stacked sparse
//! autoencoder (deep features concatenated onto the originals), reduces
//! them in two stages (L1 proximal-gradient selection, then a weighted
//! locality-preserving discriminant projection per bagged subspace), and
//! classifies with a weighted vote over per-subspace SVMs.

pub mod data;
pub mod ensemble;
mod error;
pub mod fssae;
pub mod metrics;
pub mod model_io;
pub mod optim;
pub mod pipeline;
pub mod reduction;
pub mod seeding;
pub mod sparse_ae;
pub mod svm;

pub use data::{Dataset, FoldPlan, NormMethod, NormalizationSpec};
pub use ensemble::{EnsembleConfig, EnsembleModel};
pub use error::{Error, Result};
pub use fssae::{ExpandedData, FssaeConfig, FssaeModel};
pub use metrics::{ConfusionMatrix, MetricsReport, Scores};
pub use pipeline::{BaselineKind, DsaePipeline, DsaePipelineConfig, FittedDsae};
pub use reduction::{L1SelectorState, SubsetSpec, WlpdpConfig, WlpdpModel};
pub use svm::{SvmConfig, SvmModel};
