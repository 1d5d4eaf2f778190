//! Online batch selection by reducible holdout loss.
//!
//! The crate trains small feed-forward classifiers while choosing, at every
//! step, which points of a pre-sampled large batch are worth a gradient step.
//! The selected batches form a *sequence* that can be written to disk and
//! replayed by a different, usually larger, model.
//!
//! Layout:
//!
//! - [`model`]: dense ReLU classifier, cross-entropy, dropout and AdamW, in `f64`.
//! - [`data`]: example records, IDX loading, synthetic clusters, label noise,
//!   white-noise injection and the without-replacement large-batch schedule.
//! - [`acquisition`]: per-point scoring rules, top-k selection, MC-dropout BALD
//!   and an exact finite-hypothesis Bayesian model for checking the
//!   information-gain identities behind reducible loss.
//! - [`trainer`]: irreducible-loss pretraining, the selection loop and replay.
//! - [`sequence`]: the binary sequence file format.
//! - [`experiment`]: config files, metrics, rank correlation and the CLI commands.

pub mod acquisition;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fsutil;
pub mod hash;
pub mod model;
pub mod rng;
pub mod sequence;
pub mod trainer;

pub use acquisition::{AcquisitionKind, IrreducibleLossTable, ScoreVector};
pub use data::{DatasetBundle, ExampleRecord};
pub use error::{Error, Result};
pub use model::{Matrix, ModelSpec, ModelState, OptimizerConfig};
pub use sequence::{Sequence, SequenceHeader};
