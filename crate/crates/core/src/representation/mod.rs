//! Statistical state representations, binned mutual information and
//! incremental feature clustering.

mod cluster;
mod mi;
mod stats;

pub use cluster::{cluster_distance, incremental_cluster, ClusterSet, MiTable};
pub use mi::{discretize, entropy, mi_codes, mutual_information, Discretized, DEFAULT_BINS};
pub use stats::{describe_vector, rep_feature_set, OpOneHot, StateVector, STATE_DIM, N_STATS};
