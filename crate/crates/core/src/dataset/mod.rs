//! Dataset ingestion, folds, metrics and the built-in downstream model.

mod eval;
mod folds;
mod forest;
mod load;
mod metrics;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use eval::{evaluate_downstream, DownstreamEvaluator, EvalResult};
pub use folds::{make_folds, FoldPlan};
pub use forest::{ForestConfig, RandomForest, Targets};
pub use load::{load_csv, load_csv_str};
pub use metrics::{metric_f1_macro, metric_one_minus_rae};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
    /// Binary anomaly detection, scored like binary classification.
    Detection,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification | Task::Detection)
    }

    pub fn metric_name(self) -> &'static str {
        if self.is_classification() {
            "f1_macro"
        } else {
            "one_minus_rae"
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
            Task::Detection => "detection",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classification" | "c" => Ok(Task::Classification),
            "regression" | "r" => Ok(Task::Regression),
            "detection" | "d" => Ok(Task::Detection),
            other => Err(Error::Config(format!("unknown task kind {other:?}"))),
        }
    }
}

/// A sanitized tabular dataset: named numeric columns plus a label.
///
/// Columns are stored column-major. For classification and detection the
/// label values are mapped onto dense class indices in ascending value order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    label_name: String,
    label: Vec<f64>,
    task: Task,
    classes: Vec<f64>,
    class_index: Vec<usize>,
}

impl Dataset {
    pub fn new(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        label_name: impl Into<String>,
        label: Vec<f64>,
        task: Task,
    ) -> Result<Self> {
        let n = label.len();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 samples, got {n}")));
        }
        if columns.is_empty() {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::shape(
                format!("{} column names", columns.len()),
                names.len(),
            ));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "column {name:?} has {} rows, label has {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("column {name:?} has non-finite values")));
            }
        }
        if label.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("label has non-finite values".into()));
        }

        let (classes, class_index) = if task.is_classification() {
            if label.iter().any(|v| v.fract() != 0.0) {
                return Err(Error::Data(
                    "classification labels must be integer-valued".into(),
                ));
            }
            let mut classes = label.clone();
            classes.sort_by(f64::total_cmp);
            classes.dedup();
            if classes.len() < 2 {
                return Err(Error::Data(
                    "classification label has a single class".into(),
                ));
            }
            if task == Task::Detection && classes.len() != 2 {
                return Err(Error::Data(format!(
                    "detection label must be binary, found {} classes",
                    classes.len()
                )));
            }
            let index = label
                .iter()
                .map(|v| classes.partition_point(|c| c < v))
                .collect();
            (classes, index)
        } else {
            (Vec::new(), Vec::new())
        };

        Ok(Dataset {
            names,
            columns,
            label_name: label_name.into(),
            label,
            task,
            classes,
            class_index,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.label.len()
    }

    pub fn n_original_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn label(&self) -> &[f64] {
        &self.label
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Distinct label values in ascending order (classification only).
    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    /// Per-sample dense class index (classification only).
    pub fn class_index(&self) -> &[usize] {
        &self.class_index
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Labels in the form the forest consumes.
    pub fn targets(&self) -> Targets<'_> {
        if self.task.is_classification() {
            Targets::Classes {
                y: &self.class_index,
                n_classes: self.classes.len(),
            }
        } else {
            Targets::Values(&self.label)
        }
    }
}
