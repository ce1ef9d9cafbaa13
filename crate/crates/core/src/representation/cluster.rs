use serde::{Deserialize, Serialize};

use super::mi::{discretize, mi_codes, Discretized, DEFAULT_BINS};
use crate::exec::Exec;
use crate::{Error, Result};

/// Per-step cache of `MI(F_i, y)` and pairwise `MI(F_i, F_j)`.
#[derive(Debug, Clone)]
pub struct MiTable {
    pub label_mi: Vec<f64>,
    pair_mi: Vec<f64>,
    m: usize,
}

impl MiTable {
    pub fn compute<C: AsRef<[f64]> + Sync>(
        columns: &[C],
        labels: &Discretized,
        bins: usize,
        exec: Exec,
    ) -> Self {
        let disc: Vec<Discretized> = exec.map_slice(columns, |c| discretize(c.as_ref(), bins));
        Self::from_discretized(&disc, labels, exec)
    }

    pub fn from_discretized(disc: &[Discretized], labels: &Discretized, exec: Exec) -> Self {
        let m = disc.len();
        let label_mi = exec.map_slice(disc, |d| mi_codes(d, labels));
        let rows = exec.map_range(m, |i| {
            (0..m)
                .map(|j| if j < i { 0.0 } else { mi_codes(&disc[i], &disc[j]) })
                .collect::<Vec<f64>>()
        });
        let mut pair_mi = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                pair_mi[i * m + j] = rows[i][j];
                pair_mi[j * m + i] = rows[i][j];
            }
        }
        MiTable { label_mi, pair_mi, m }
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pair_mi[i * self.m + j]
    }

    /// Single-feature term of the cluster distance.
    pub fn feature_distance(&self, i: usize, j: usize, varsigma: f64) -> f64 {
        (self.label_mi[i] - self.label_mi[j]).abs() / (self.pair(i, j) + varsigma)
    }

    /// Mean over feature pairs of `|MI(Fi,y) - MI(Fj,y)| / (MI(Fi,Fj) + varsigma)`.
    pub fn cluster_distance(&self, ci: &[usize], cj: &[usize], varsigma: f64) -> Result<f64> {
        if ci.is_empty() || cj.is_empty() {
            return Err(Error::InvalidArgument("clusters must be non-empty".into()));
        }
        if ci.iter().any(|i| cj.contains(i)) {
            return Err(Error::InvalidArgument("clusters overlap".into()));
        }
        if let Some(&bad) = ci.iter().chain(cj).find(|&&i| i >= self.m) {
            return Err(Error::InvalidArgument(format!("feature index {bad} out of range")));
        }
        Ok(self.cluster_distance_unchecked(ci, cj, varsigma))
    }

    fn cluster_distance_unchecked(&self, ci: &[usize], cj: &[usize], varsigma: f64) -> f64 {
        let mut sum = 0.0;
        for &i in ci {
            for &j in cj {
                sum += self.feature_distance(i, j, varsigma);
            }
        }
        sum / (ci.len() * cj.len()) as f64
    }
}

/// Cluster distance computed directly from columns and labels with
/// [`DEFAULT_BINS`] bins.
pub fn cluster_distance<C: AsRef<[f64]> + Sync>(
    ci: &[usize],
    cj: &[usize],
    features: &[C],
    labels: &[f64],
    varsigma: f64,
) -> Result<f64> {
    let table = MiTable::compute(features, &discretize(labels, DEFAULT_BINS), DEFAULT_BINS, Exec::Sequential);
    table.cluster_distance(ci, cj, varsigma)
}

/// Partition of the live feature indices into clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub distance_threshold: f64,
    pub varsigma: f64,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Agglomerative clustering from singletons: merge the closest pair until
/// the closest distance reaches `threshold` or one cluster remains.
///
/// Clusters are kept ordered by their smallest member and distance ties go
/// to the lexicographically smallest pair of those minima.
pub fn incremental_cluster(table: &MiTable, threshold: f64, varsigma: f64) -> ClusterSet {
    let m = table.n_features();
    let mut clusters: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = table.cluster_distance_unchecked(&clusters[a], &clusters[b], varsigma);
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (d, a, b) = best;
        if d >= threshold {
            break;
        }
        let absorbed = clusters.remove(b);
        clusters[a].extend(absorbed);
        clusters[a].sort_unstable();
    }
    ClusterSet {
        clusters,
        distance_threshold: threshold,
        varsigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![
                vec![0.0, 0.0, 1.0, 1.0],
                vec![0.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0, 0.0],
            ],
            vec![0.0, 0.0, 1.0, 1.0],
        )
    }

    fn toy_table() -> MiTable {
        let (f, y) = toy();
        MiTable::compute(&f, &discretize(&y, DEFAULT_BINS), DEFAULT_BINS, Exec::Sequential)
    }

    #[test]
    fn toy_distances_match_hand_computation() {
        // MI(f1,y) = MI(f3,y) = ln2, MI(f2,y) = 0; MI(f1,f3) = ln2, others 0.
        let (f, y) = toy();
        let s = 1e-6;
        let ln2 = 2f64.ln();
        let d12 = cluster_distance(&[0], &[1], &f, &y, s).unwrap();
        let d13 = cluster_distance(&[0], &[2], &f, &y, s).unwrap();
        let d23 = cluster_distance(&[1], &[2], &f, &y, s).unwrap();
        assert!((d12 - ln2 / s).abs() < 1e-6);
        assert_eq!(d13, 0.0);
        assert!((d23 - ln2 / s).abs() < 1e-6);
        let d1_23 = cluster_distance(&[0], &[1, 2], &f, &y, s).unwrap();
        assert!((d1_23 - 0.5 * ln2 / s).abs() < 1e-6);
    }

    #[test]
    fn distance_is_symmetric_and_identical_features_are_close() {
        let t = toy_table();
        assert_eq!(t.cluster_distance(&[0], &[1, 2], 1e-6).unwrap(), t.cluster_distance(&[1, 2], &[0], 1e-6).unwrap());
        let f = vec![vec![0.0, 3.0, 1.0, 2.0], vec![0.0, 3.0, 1.0, 2.0]];
        let y = vec![0.0, 1.0, 0.0, 1.0];
        assert_eq!(cluster_distance(&[0], &[1], &f, &y, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn overlap_is_rejected() {
        let t = toy_table();
        assert!(t.cluster_distance(&[0, 1], &[1], 1e-6).is_err());
        assert!(t.cluster_distance(&[], &[1], 1e-6).is_err());
    }

    #[test]
    fn larger_varsigma_never_increases_distance() {
        let t = toy_table();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let small = t.cluster_distance(&[a], &[b], 1e-6).unwrap();
            let large = t.cluster_distance(&[a], &[b], 1e-3).unwrap();
            assert!(large <= small);
        }
    }

    #[test]
    fn threshold_boundaries() {
        let t = toy_table();
        assert_eq!(incremental_cluster(&t, 0.0, 1e-6).clusters, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(incremental_cluster(&t, f64::INFINITY, 1e-6).clusters, vec![vec![0, 1, 2]]);
        // smallest distance is d13 = 0, next is ~3.5e5.
        let once = incremental_cluster(&t, 1.0, 1e-6);
        assert_eq!(once.clusters, vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn identical_features_collapse_into_one_cluster() {
        let f = vec![vec![0.0, 1.0, 2.0, 3.0]; 4];
        let y = discretize(&[0.0, 1.0, 0.0, 1.0], DEFAULT_BINS);
        let t = MiTable::compute(&f, &y, DEFAULT_BINS, Exec::Sequential);
        let c = incremental_cluster(&t, 1e-9, 1e-6);
        assert_eq!(c.clusters, vec![vec![0, 1, 2, 3]]);
    }
}
