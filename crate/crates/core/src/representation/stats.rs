use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of descriptive statistics per vector.
pub const N_STATS: usize = 7;
/// Length of every [`StateVector`].
pub const STATE_DIM: usize = N_STATS * N_STATS;

/// Fixed-length statistical description of a set of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn zeros() -> Self {
        StateVector(vec![0.0; STATE_DIM])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != STATE_DIM {
            return Err(Error::shape(STATE_DIM, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("state vector entries must be finite".into()));
        }
        Ok(StateVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Entry for first-stage statistic `stat` described by second-stage
    /// statistic `of`.
    pub fn get(&self, stat: usize, of: usize) -> f64 {
        self.0[stat * N_STATS + of]
    }
}

/// One-hot encoding of an operation id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpOneHot(Vec<f64>);

impl OpOneHot {
    pub fn new(op_id: usize, n_ops: usize) -> Result<Self> {
        if op_id >= n_ops {
            return Err(Error::InvalidArgument(format!("op id {op_id} out of range {n_ops}")));
        }
        let mut v = vec![0.0; n_ops];
        v[op_id] = 1.0;
        Ok(OpOneHot(v))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// `[mean, std, min, q25, median, q75, max]` with population standard
/// deviation and linearly interpolated quantiles.
pub fn describe_vector(values: &[f64]) -> Result<[f64; N_STATS]> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot describe an empty vector".into()));
    }
    let n = values.len() as f64;
    // Rescale by the largest magnitude so huge generated values do not
    // overflow the variance.
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mean, std) = if scale > 0.0 && scale.is_finite() {
        let mean_s = values.iter().map(|v| v / scale).sum::<f64>() / n;
        let var_s = values.iter().map(|v| (v / scale - mean_s).powi(2)).sum::<f64>() / n;
        (mean_s * scale, var_s.sqrt() * scale)
    } else {
        (values.iter().sum::<f64>() / n, 0.0)
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let out = [
        mean,
        std,
        sorted[0],
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.75),
        sorted[sorted.len() - 1],
    ];
    Ok(out.map(|v| if v.is_finite() { v } else { 0.0 }))
}

/// Two-stage description: every column is described by seven statistics,
/// then each of those seven statistic rows is described across columns.
/// The 7x7 result is flattened row-major (first-stage statistic major).
pub fn rep_feature_set<C: AsRef<[f64]>>(columns: &[C]) -> Result<StateVector> {
    if columns.is_empty() || columns[0].as_ref().is_empty() {
        return Err(Error::InvalidArgument("cannot represent an empty matrix".into()));
    }
    let per_column = columns
        .iter()
        .map(|c| describe_vector(c.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(STATE_DIM);
    let mut row = Vec::with_capacity(columns.len());
    for stat in 0..N_STATS {
        row.clear();
        row.extend(per_column.iter().map(|d| d[stat]));
        out.extend_from_slice(&describe_vector(&row)?);
    }
    Ok(StateVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn describe_examples() {
        assert_eq!(describe_vector(&[5.0]).unwrap(), [5.0, 0.0, 5.0, 5.0, 5.0, 5.0, 5.0]);
        let d = describe_vector(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let expected = [3.0, 2f64.sqrt(), 1.0, 2.0, 3.0, 4.0, 5.0];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(describe_vector(&[-2.5; 4]).unwrap(), [-2.5, 0.0, -2.5, -2.5, -2.5, -2.5, -2.5]);
        assert!(describe_vector(&[]).is_err());
    }

    #[test]
    fn describe_survives_huge_values() {
        let d = describe_vector(&[1e200, -1e200, 3e200]).unwrap();
        assert!(d.iter().all(|v| v.is_finite()));
        assert!(d[1] > 1e200);
    }

    #[test]
    fn constant_column_propagates() {
        let s = rep_feature_set(&[vec![3.0; 6]]).unwrap();
        assert_eq!(s.values().len(), STATE_DIM);
        assert_eq!(s.get(0, 0), 3.0);
        assert_eq!(s.get(0, 1), 0.0);
        for stat in 0..N_STATS {
            let base = [3.0, 0.0, 3.0, 3.0, 3.0, 3.0, 3.0][stat];
            assert_eq!(s.get(stat, 0), base);
            assert_eq!(s.get(stat, 1), 0.0);
        }
    }

    #[test]
    fn duplicated_columns_give_same_rep() {
        let a = vec![1.0, 4.0, 2.0, 8.0];
        let single = rep_feature_set(&[a.clone()]).unwrap();
        let double = rep_feature_set(&[a.clone(), a]).unwrap();
        assert_eq!(single, double);
    }

    #[test]
    fn two_column_hand_computation() {
        // columns [1,3] and [2,4]
        let s = rep_feature_set(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        // first stage: [2,1,1,1.5,2,2.5,3] and [3,1,2,2.5,3,3.5,4]
        let first = [[2.0, 1.0, 1.0, 1.5, 2.0, 2.5, 3.0], [3.0, 1.0, 2.0, 2.5, 3.0, 3.5, 4.0]];
        for stat in 0..N_STATS {
            let (a, b): (f64, f64) = (first[0][stat], first[1][stat]);
            let (lo, hi) = (a.min(b), a.max(b));
            let expected = [
                0.5 * (a + b),
                0.5 * (a - b).abs(),
                lo,
                lo + 0.25 * (hi - lo),
                0.5 * (a + b),
                lo + 0.75 * (hi - lo),
                hi,
            ];
            for of in 0..N_STATS {
                assert!((s.get(stat, of) - expected[of]).abs() < 1e-12, "stat {stat} of {of}");
            }
        }
    }

    #[test]
    fn one_hot_has_single_one() {
        let o = OpOneHot::new(3, 15).unwrap();
        assert_eq!(o.values().iter().sum::<f64>(), 1.0);
        assert_eq!(o.values()[3], 1.0);
        assert!(OpOneHot::new(15, 15).is_err());
    }

    proptest! {
        #[test]
        fn rep_is_fixed_length_and_row_permutation_invariant(
            rows in 1usize..12,
            cols in 1usize..6,
            data in prop::collection::vec(-1e3f64..1e3, 72),
            shift in 0usize..12,
        ) {
            let columns: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| data[c * rows + r]).collect()).collect();
            let permuted: Vec<Vec<f64>> = columns.iter().map(|c| {
                let mut c = c.clone();
                c.rotate_left(shift % rows);
                c
            }).collect();
            let a = rep_feature_set(&columns).unwrap();
            let b = rep_feature_set(&permuted).unwrap();
            prop_assert_eq!(a.values().len(), STATE_DIM);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}
