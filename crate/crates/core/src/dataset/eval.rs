use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{metric_f1_macro, metric_one_minus_rae, Dataset, FoldPlan, ForestConfig, RandomForest, Targets};
use crate::exec::Exec;
use crate::{seed, Error, Result};

/// Cross-validated downstream score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub score: f64,
    pub metric_name: String,
    pub fold_scores: Vec<f64>,
}

/// Column-wise z-scoring fitted on `train` rows and applied to the given rows.
fn standardize(features: &[Vec<f64>], train: &[usize], rows: &[usize]) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|col| {
            let n = train.len() as f64;
            let mean = train.iter().map(|&i| col[i]).sum::<f64>() / n;
            let var = train.iter().map(|&i| (col[i] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let scale = if sd > 0.0 && sd.is_finite() { 1.0 / sd } else { 1.0 };
            rows.iter()
                .map(|&i| {
                    let z = (col[i] - mean) * scale;
                    if z.is_finite() { z } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

fn score_fold(
    features: &[Vec<f64>],
    dataset: &Dataset,
    folds: &FoldPlan,
    fold: usize,
    cfg: &ForestConfig,
    model_seed: u64,
) -> Result<f64> {
    let (train, test) = folds.split(fold);
    let x_train = standardize(features, &train, &train);
    let x_test = standardize(features, &train, &test);
    let fold_seed = seed::derive(model_seed, "fold", fold as u64);
    match dataset.targets() {
        Targets::Classes { y, n_classes } => {
            let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<usize> = test.iter().map(|&i| y[i]).collect();
            let forest = RandomForest::fit(
                &x_train,
                Targets::Classes { y: &y_train, n_classes },
                cfg,
                fold_seed,
                Exec::Sequential,
            )?;
            metric_f1_macro(&y_test, &forest.predict_classes(&x_test))
        }
        Targets::Values(y) => {
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let forest =
                RandomForest::fit(&x_train, Targets::Values(&y_train), cfg, fold_seed, Exec::Sequential)?;
            metric_one_minus_rae(&y_test, &forest.predict_values(&x_test))
        }
    }
}

/// Trains the built-in forest on each fold's train split and scores its test
/// split. Folds may run concurrently; scores are merged in fold order.
pub fn evaluate_downstream(
    features: &[Vec<f64>],
    dataset: &Dataset,
    folds: &FoldPlan,
    cfg: &ForestConfig,
    model_seed: u64,
    exec: Exec,
) -> Result<EvalResult> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("empty feature matrix".into()));
    }
    let n = dataset.n_samples();
    for col in features {
        if col.len() != n {
            return Err(Error::shape(format!("{n} rows"), col.len()));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature matrix has non-finite values".into()));
        }
    }
    let fold_scores = exec
        .map_range(folds.k, |f| score_fold(features, dataset, folds, f, cfg, model_seed))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(EvalResult {
        score,
        metric_name: dataset.task().metric_name().to_string(),
        fold_scores,
    })
}

/// Fixed fold plan and model seed with an instrumented call counter.
#[derive(Debug)]
pub struct DownstreamEvaluator {
    pub folds: FoldPlan,
    pub forest: ForestConfig,
    pub model_seed: u64,
    pub exec: Exec,
    calls: AtomicUsize,
}

impl DownstreamEvaluator {
    pub fn new(folds: FoldPlan, forest: ForestConfig, model_seed: u64, exec: Exec) -> Self {
        DownstreamEvaluator {
            folds,
            forest,
            model_seed,
            exec,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn evaluate(&self, features: &[Vec<f64>], dataset: &Dataset) -> Result<EvalResult> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        evaluate_downstream(features, dataset, &self.folds, &self.forest, self.model_seed, self.exec)
    }

    /// Number of [`evaluate`](Self::evaluate) calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_folds, Task};
    use rand::Rng;

    fn binary(n: usize) -> Dataset {
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        Dataset::new(vec!["x".into()], vec![y.clone()], "y", y, Task::Classification).unwrap()
    }

    #[test]
    fn label_copy_is_perfectly_separable() {
        let ds = binary(40);
        let folds = make_folds(&ds, 5, 1).unwrap();
        let r = evaluate_downstream(ds.columns(), &ds, &folds, &ForestConfig::default(), 2, Exec::Sequential)
            .unwrap();
        assert_eq!(r.score, 1.0);
        assert_eq!(r.fold_scores.len(), 5);
        assert_eq!(r.metric_name, "f1_macro");
    }

    #[test]
    fn regression_on_label_copy_is_near_perfect() {
        let mut rng = seed::rng(42, "test", 0);
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ds = Dataset::new(vec!["x".into()], vec![y.clone()], "y", y, Task::Regression).unwrap();
        let folds = make_folds(&ds, 5, 42).unwrap();
        let r = evaluate_downstream(ds.columns(), &ds, &folds, &ForestConfig::default(), 42, Exec::Sequential)
            .unwrap();
        assert!(r.score >= 0.95, "score {}", r.score);
    }

    #[test]
    fn evaluation_is_deterministic_and_exec_independent() {
        let mut rng = seed::rng(5, "test", 0);
        let n = 120;
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| ((cols[0][i] + cols[1][i]) > 1.0) as u8 as f64).collect();
        let names = (0..4).map(|i| format!("c{i}")).collect();
        let ds = Dataset::new(names, cols.clone(), "y", y, Task::Classification).unwrap();
        let folds = make_folds(&ds, 5, 3).unwrap();
        let cfg = ForestConfig::default();
        let a = evaluate_downstream(&cols, &ds, &folds, &cfg, 8, Exec::Sequential).unwrap();
        let b = evaluate_downstream(&cols, &ds, &folds, &cfg, 8, Exec::Parallel).unwrap();
        let c = evaluate_downstream(&cols, &ds, &folds, &cfg, 8, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let mean = a.fold_scores.iter().sum::<f64>() / 5.0;
        assert_eq!(a.score, mean);
    }

    #[test]
    fn pure_noise_labels_score_near_chance() {
        let mut total = 0.0;
        for s in 0..5u64 {
            let mut rng = seed::rng(s, "noise", 0);
            let n = 200;
            let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let mut y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            rand::seq::SliceRandom::shuffle(y.as_mut_slice(), &mut rng);
            let names = (0..3).map(|i| format!("c{i}")).collect();
            let ds = Dataset::new(names, cols.clone(), "y", y, Task::Classification).unwrap();
            let folds = make_folds(&ds, 5, s).unwrap();
            total += evaluate_downstream(&cols, &ds, &folds, &ForestConfig::default(), s, Exec::Sequential)
                .unwrap()
                .score;
        }
        let mean = total / 5.0;
        assert!((0.3..=0.7).contains(&mean), "mean {mean}");
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let ds = binary(10);
        let folds = make_folds(&ds, 5, 1).unwrap();
        let cfg = ForestConfig::default();
        assert!(evaluate_downstream(&[], &ds, &folds, &cfg, 0, Exec::Sequential).is_err());
        let mut bad = ds.columns().to_vec();
        bad[0][3] = f64::INFINITY;
        assert!(evaluate_downstream(&bad, &ds, &folds, &cfg, 0, Exec::Sequential).is_err());
    }

    #[test]
    fn evaluator_counts_calls() {
        let ds = binary(10);
        let ev = DownstreamEvaluator::new(make_folds(&ds, 5, 1).unwrap(), ForestConfig::default(), 0, Exec::Sequential);
        ev.evaluate(ds.columns(), &ds).unwrap();
        ev.evaluate(ds.columns(), &ds).unwrap();
        assert_eq!(ev.calls(), 2);
    }
}
