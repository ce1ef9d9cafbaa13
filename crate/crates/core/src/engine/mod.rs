//! Run orchestration: configuration, the search loop, baselines, tracing
//! and exported artifacts.

mod baseline;
mod config;
mod export;
mod search;

use serde::{Deserialize, Serialize};

pub use baseline::{run_baseline_erg, run_baseline_rfg};
pub use config::RunConfig;
pub use export::{export_outputs, feature_importance, read_report, write_feature_csv, FeatureImportance};
pub use search::run;

use crate::predictor::EvaluationComponents;
use crate::transform::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Downstream,
    Pseudo,
}

/// One line of `trace.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub episode: usize,
    pub step: usize,
    pub global_step: usize,
    pub head: Vec<String>,
    pub op: String,
    pub tail: Option<Vec<String>>,
    pub new_feature_count: usize,
    pub reward: f64,
    pub reward_kind: RewardKind,
    pub pseudo_perf: Option<f64>,
    pub novelty: Option<f64>,
    pub evaluated: bool,
    pub true_perf: Option<f64>,
    pub live_feature_count: usize,
    pub sequence_line: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fastft,
    Rfg,
    Erg,
}

/// Summary written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub metric: String,
    pub seed: u64,
    pub best_score: f64,
    pub baseline_score: f64,
    pub best_sequence: String,
    pub best_feature_count: usize,
    pub total_steps: usize,
    pub evaluated_steps: usize,
    pub eval_call_fraction: f64,
    /// Evaluated share of the steps after cold start; 0 when there are none.
    pub post_cold_start_eval_fraction: f64,
    pub episode_best: Vec<f64>,
    pub top_features: Vec<FeatureImportance>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trace: Vec<StepTrace>,
    pub best_features: FeatureSet,
    pub components: Option<EvaluationComponents>,
}
