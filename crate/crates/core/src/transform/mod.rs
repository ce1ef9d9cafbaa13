//! Operation set, postfix transformation sequences and the evolving feature
//! set.

mod features;
mod ops;
mod sequence;

pub use features::{apply_sequence, cross_clusters, evaluate_expr, prune_feature_set, sanitize_and_dedupe, FeatureSet};
pub use ops::{apply_operation, default_operation_set, operation_by_id, operation_by_name, OpKind, Operation, N_OPS};
pub use sequence::{parse_sequence, random_expr, random_sequence, serialize_sequence, Expr, Token, TransformationSequence};
