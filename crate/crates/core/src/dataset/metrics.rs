use crate::{Error, Result};

/// Unweighted mean of per-class F1 over the classes present in `y_true`.
pub fn metric_f1_macro(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("empty label vector".into()));
    }
    let n_classes = y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    let mut present = vec![false; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        present[t] = true;
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in (0..n_classes).filter(|&c| present[c]) {
        let denom = 2 * tp[c] + fp[c] + fneg[c];
        sum += if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
        count += 1;
    }
    Ok(sum / count as f64)
}

/// `1 - sum|y - yhat| / sum|y - mean(y)|`, clamped to `[0, 1]`.
///
/// A constant `y_true` scores 1 for an exact match and 0 otherwise.
pub fn metric_one_minus_rae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("empty label vector".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let num: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum();
    let den: f64 = y_true.iter().map(|a| (a - mean).abs()).sum();
    if den == 0.0 {
        return Ok(if num == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((1.0 - num / den).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        assert_eq!(metric_f1_macro(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap(), 1.0);
        assert_eq!(metric_f1_macro(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.0);
        // class 0: tp=1 fp=1 fn=1 -> 2/4; class 1 likewise.
        assert_eq!(metric_f1_macro(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(metric_f1_macro(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn f1_ignores_classes_absent_from_truth() {
        // class 2 only predicted: it adds a false positive to nobody's average.
        let s = metric_f1_macro(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        let expected = (1.0 + 2.0 / 3.0) / 2.0;
        assert!((s - expected).abs() < 1e-15);
    }

    #[test]
    fn rae_examples() {
        assert_eq!(metric_one_minus_rae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(metric_one_minus_rae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        let s = metric_one_minus_rae(&[0.0, 0.0, 4.0], &[1.0, 1.0, 3.0]).unwrap();
        assert!((s - 0.4375).abs() < 1e-12);
        assert_eq!(metric_one_minus_rae(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(metric_one_minus_rae(&[2.0, 2.0], &[2.0, 2.5]).unwrap(), 0.0);
        assert!(metric_one_minus_rae(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_permutation_invariant(
            pairs in prop::collection::vec((0usize..3, 0usize..3, -5.0f64..5.0, -5.0f64..5.0), 2..40),
            rot in 0usize..40,
        ) {
            let mut rotated = pairs.clone();
            let r = rot % pairs.len();
            rotated.rotate_left(r);
            let unzip = |p: &[(usize, usize, f64, f64)]| {
                (
                    p.iter().map(|t| t.0).collect::<Vec<_>>(),
                    p.iter().map(|t| t.1).collect::<Vec<_>>(),
                    p.iter().map(|t| t.2).collect::<Vec<_>>(),
                    p.iter().map(|t| t.3).collect::<Vec<_>>(),
                )
            };
            let (a, b, c, d) = unzip(&pairs);
            let (a2, b2, c2, d2) = unzip(&rotated);
            let f1 = metric_f1_macro(&a, &b).unwrap();
            prop_assert!((f1 - metric_f1_macro(&a2, &b2).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&f1));
            let rae = metric_one_minus_rae(&c, &d).unwrap();
            prop_assert!((rae - metric_one_minus_rae(&c2, &d2).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn rae_of_identity_is_one(y in prop::collection::vec(-100.0f64..100.0, 2..50)) {
            prop_assume!(y.iter().any(|v| *v != y[0]));
            prop_assert_eq!(metric_one_minus_rae(&y, &y).unwrap(), 1.0);
        }
    }
}
