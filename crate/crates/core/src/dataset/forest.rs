//! A small CART random forest.
//!
//! Bootstrap-sampled trees, `ceil(sqrt(m))` candidate features per split,
//! midpoint thresholds between sorted distinct values, Gini impurity for
//! classes and variance reduction for values.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            max_depth: 8,
            min_samples_split: 2,
        }
    }
}

/// Training labels for [`RandomForest::fit`].
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes { y: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Classes { y, .. } => y.len(),
            Targets::Values(y) => y.len(),
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Tree {
    fn predict(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if columns[feature][row] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
    n_features: usize,
    n_classes: Option<usize>,
}

struct Builder<'a, R> {
    columns: &'a [Vec<f64>],
    targets: Targets<'a>,
    cfg: &'a ForestConfig,
    n_candidates: usize,
    rng: R,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let leaf = self.leaf_value(idx);
        if depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split.max(2) {
            self.nodes[id] = Node::Leaf(leaf);
            return id;
        }
        let Some(best) = self.best_split(idx) else {
            self.nodes[id] = Node::Leaf(leaf);
            return id;
        };
        self.importance[best.feature] += best.gain;
        let col = &self.columns[best.feature];
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| col[i] <= best.threshold);
        let left = self.build(&l, depth + 1);
        let right = self.build(&r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        match self.targets {
            Targets::Classes { y, n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &i in idx {
                    counts[y[i]] += 1;
                }
                let mut best = 0;
                for (c, &k) in counts.iter().enumerate() {
                    if k > counts[best] {
                        best = c;
                    }
                }
                best as f64
            }
            Targets::Values(y) => idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64,
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let m = self.columns.len();
        let candidates = index::sample(&mut self.rng, m, self.n_candidates.min(m));
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for feature in candidates.iter() {
            let col = &self.columns[feature];
            order.clear();
            order.extend(idx.iter().map(|&i| (col[i], i)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[order.len() - 1].0 {
                continue;
            }
            if let Some((threshold, gain)) = self.sweep(&order) {
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12)
    }

    /// Best `(threshold, impurity decrease)` over one sorted feature; the
    /// decrease is expressed in sample-count units.
    fn sweep(&self, order: &[(f64, usize)]) -> Option<(f64, f64)> {
        let n = order.len();
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |p: usize, score: f64, parent: f64| {
            let (a, b) = (order[p].0, order[p + 1].0);
            if a < b {
                let gain = score - parent;
                if best.is_none_or(|(_, g)| gain > g) {
                    let mut t = 0.5 * (a + b);
                    if t >= b {
                        t = a;
                    }
                    best = Some((t, gain));
                }
            }
        };
        match self.targets {
            Targets::Classes { y, n_classes } => {
                let mut right = vec![0f64; n_classes];
                for &(_, i) in order {
                    right[y[i]] += 1.0;
                }
                let mut left = vec![0f64; n_classes];
                let mut right_sq: f64 = right.iter().map(|c| c * c).sum();
                let parent = right_sq / n as f64;
                let mut left_sq = 0.0;
                for p in 0..n - 1 {
                    let c = y[order[p].1];
                    left_sq += 2.0 * left[c] + 1.0;
                    right_sq -= 2.0 * right[c] - 1.0;
                    left[c] += 1.0;
                    right[c] -= 1.0;
                    let nl = (p + 1) as f64;
                    let nr = (n - p - 1) as f64;
                    consider(p, left_sq / nl + right_sq / nr, parent);
                }
            }
            Targets::Values(y) => {
                let total: f64 = order.iter().map(|&(_, i)| y[i]).sum();
                let parent = total * total / n as f64;
                let mut left = 0.0;
                for p in 0..n - 1 {
                    left += y[order[p].1];
                    let right = total - left;
                    let nl = (p + 1) as f64;
                    let nr = (n - p - 1) as f64;
                    consider(p, left * left / nl + right * right / nr, parent);
                }
            }
        }
        best
    }
}

impl RandomForest {
    /// Fits a forest on column-major `columns`. Tree `t` draws from the seed
    /// stream `(seed, "tree", t)`, so the result is independent of `exec`.
    pub fn fit(
        columns: &[Vec<f64>],
        targets: Targets<'_>,
        cfg: &ForestConfig,
        seed: u64,
        exec: Exec,
    ) -> Result<Self> {
        let m = columns.len();
        if m == 0 {
            return Err(Error::InvalidArgument("forest needs at least one feature".into()));
        }
        let n = targets.len();
        if n == 0 {
            return Err(Error::InvalidArgument("forest needs at least one sample".into()));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::shape(n, bad.len()));
        }
        if columns.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("forest input has non-finite values".into()));
        }
        let n_candidates = (m as f64).sqrt().ceil() as usize;
        let trees = exec.map_range(cfg.n_trees, |t| {
            let mut rng = seed::rng(seed, "tree", t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut builder = Builder {
                columns,
                targets,
                cfg,
                n_candidates,
                rng,
                nodes: Vec::new(),
                importance: vec![0.0; m],
            };
            builder.build(&sample, 0);
            Tree {
                nodes: builder.nodes,
                importance: builder.importance,
            }
        });
        let n_classes = match targets {
            Targets::Classes { n_classes, .. } => Some(n_classes),
            Targets::Values(_) => None,
        };
        Ok(RandomForest {
            trees,
            n_features: m,
            n_classes,
        })
    }

    /// Majority vote over trees; ties go to the lowest class index.
    pub fn predict_classes(&self, columns: &[Vec<f64>]) -> Vec<usize> {
        let n_classes = self.n_classes.unwrap_or(1);
        let rows = columns.first().map_or(0, Vec::len);
        let mut votes = vec![0usize; n_classes];
        (0..rows)
            .map(|r| {
                votes.iter_mut().for_each(|v| *v = 0);
                for tree in &self.trees {
                    votes[tree.predict(columns, r) as usize] += 1;
                }
                let mut best = 0;
                for (c, &v) in votes.iter().enumerate() {
                    if v > votes[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// Mean of per-tree leaf means.
    pub fn predict_values(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let rows = columns.first().map_or(0, Vec::len);
        (0..rows)
            .map(|r| {
                self.trees.iter().map(|t| t.predict(columns, r)).sum::<f64>()
                    / self.trees.len() as f64
            })
            .collect()
    }

    /// Mean decrease in impurity, normalized per tree and then overall so the
    /// importances sum to 1. A forest without any split reports uniform
    /// importances.
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for tree in &self.trees {
            let s: f64 = tree.importance.iter().sum();
            if s > 0.0 {
                for (t, v) in total.iter_mut().zip(&tree.importance) {
                    *t += v / s;
                }
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        } else {
            total.iter_mut().for_each(|v| *v = 1.0 / self.n_features as f64);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_feature_is_learned() {
        let x = vec![vec![0.0, 0.1, 0.2, 1.0, 1.1, 1.2]];
        let y = [0, 0, 0, 1, 1, 1];
        let f = RandomForest::fit(
            &x,
            Targets::Classes { y: &y, n_classes: 2 },
            &ForestConfig::default(),
            1,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(f.predict_classes(&x), y);
        let imp = f.feature_importances();
        assert!((imp[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regression_leaves_are_means() {
        let x = vec![vec![0.0, 1.0]];
        let y = [2.0, 4.0];
        let cfg = ForestConfig { max_depth: 0, ..Default::default() };
        let f = RandomForest::fit(&x, Targets::Values(&y), &cfg, 3, Exec::Sequential).unwrap();
        for v in f.predict_values(&x) {
            assert!((2.0..=4.0).contains(&v));
        }
    }

    #[test]
    fn sequential_and_parallel_fits_agree() {
        let x: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..60).map(|i| ((i * (j + 3)) % 17) as f64).collect())
            .collect();
        let y: Vec<usize> = (0..60).map(|i| (i % 5 < 2) as usize).collect();
        let t = Targets::Classes { y: &y, n_classes: 2 };
        let cfg = ForestConfig::default();
        let a = RandomForest::fit(&x, t, &cfg, 9, Exec::Sequential).unwrap();
        let b = RandomForest::fit(&x, t, &cfg, 9, Exec::Parallel).unwrap();
        assert_eq!(a.predict_classes(&x), b.predict_classes(&x));
        assert_eq!(a.feature_importances(), b.feature_importances());
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        let y = [0usize, 1];
        let t = Targets::Classes { y: &y, n_classes: 2 };
        let cfg = ForestConfig::default();
        assert!(RandomForest::fit(&[], t, &cfg, 0, Exec::Sequential).is_err());
        assert!(RandomForest::fit(&[vec![0.0, f64::NAN]], t, &cfg, 0, Exec::Sequential).is_err());
    }
}
