use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{seed, Error, Result};

/// Assignment of every sample to one of `k` cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// `(train, test)` sample indices for `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Deterministic k-fold plan, stratified by class for classification tasks.
///
/// Each class's samples are shuffled and dealt round-robin; the dealing
/// position carries over between classes so fold sizes stay balanced.
pub fn make_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = dataset.n_samples();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} exceeds sample count {n}"
        )));
    }
    let groups: Vec<Vec<usize>> = if dataset.task().is_classification() {
        let mut groups = vec![Vec::new(); dataset.n_classes()];
        for (i, &c) in dataset.class_index().iter().enumerate() {
            groups[c].push(i);
        }
        groups
    } else {
        vec![(0..n).collect()]
    };

    let mut rng = seed::rng(seed, "folds", 0);
    let mut assignments = vec![0; n];
    let mut cursor = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            assignments[i] = cursor % k;
            cursor += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Task;

    fn balanced(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        Dataset::new(vec!["x".into()], vec![x], "y", y, Task::Classification).unwrap()
    }

    #[test]
    fn balanced_binary_gives_one_sample_per_class_per_fold() {
        let ds = balanced(10);
        let plan = make_folds(&ds, 5, 7).unwrap();
        for f in 0..5 {
            let (_, test) = plan.split(f);
            assert_eq!(test.len(), 2);
            let ones: usize = test.iter().map(|&i| ds.class_index()[i]).sum();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let ds = balanced(10);
        assert_eq!(make_folds(&ds, 5, 3).unwrap(), make_folds(&ds, 5, 3).unwrap());
        assert!(make_folds(&ds, 11, 3).is_err());
        assert!(make_folds(&ds, 1, 3).is_err());
    }

    #[test]
    fn stratification_tracks_global_proportions() {
        let n = 103;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64 + (i % 7 == 0) as u8 as f64).collect();
        let ds = Dataset::new(vec!["x".into()], vec![x], "y", y, Task::Classification).unwrap();
        let plan = make_folds(&ds, 5, 11).unwrap();
        let sizes = plan.fold_sizes();
        for c in 0..ds.n_classes() {
            let total = ds.class_index().iter().filter(|&&k| k == c).count() as f64;
            for (f, &size) in sizes.iter().enumerate() {
                let count = plan
                    .assignments
                    .iter()
                    .zip(ds.class_index())
                    .filter(|(&a, &k)| a == f && k == c)
                    .count() as f64;
                let expected = total * size as f64 / n as f64;
                assert!((count - expected).abs() <= 1.0 + 1e-9, "class {c} fold {f}");
            }
        }
    }
}
