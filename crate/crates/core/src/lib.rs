//! Reinforced feature transformation for tabular data.
//!
//! Three cascading actor-critic agents (head cluster, operation, tail cluster)
//! grow a transformed feature set step by step. Most steps are rewarded by a
//! learned performance predictor plus a distillation-based novelty bonus; a
//! real cross-validated downstream evaluation only runs when either signal
//! ranks near the top of the run history.
//!
//! Module map:
//!
//! - [`dataset`]: CSV ingestion, stratified folds, metrics and the built-in
//!   random forest that defines ground-truth performance.
//! - [`representation`]: 49-value statistical state vectors, binned mutual
//!   information and incremental feature clustering.
//! - [`transform`]: the operation set, postfix transformation sequences and
//!   the evolving feature set.
//! - [`neural`]: embeddings, LSTM stacks, dense layers, Adam and checkpoints.
//! - [`predictor`]: performance predictor and novelty estimator.
//! - [`agents`]: cascading policies, rewards, gating and prioritized replay.
//! - [`engine`]: the full search loop, baselines and run export.

pub mod agents;
pub mod dataset;
pub mod engine;
mod error;
pub mod exec;
pub mod neural;
pub mod predictor;
pub mod representation;
pub mod seed;
pub mod transform;

pub use error::{Error, Result};
