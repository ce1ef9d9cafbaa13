use std::collections::HashMap;

use super::ops::{apply_operation, operation_by_id, Operation};
use super::sequence::{Expr, Token, TransformationSequence};
use crate::dataset::Dataset;
use crate::exec::Exec;
use crate::representation::{discretize, mi_codes, Discretized};
use crate::{Error, Result};

/// The live transformed feature set: columns, the expression producing
/// each column, and the step at which each column was created.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub columns: Vec<Vec<f64>>,
    pub exprs: Vec<Expr>,
    pub provenance: Vec<usize>,
}

impl FeatureSet {
    /// Original features as single-token expressions.
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let m = dataset.n_original_features();
        FeatureSet {
            columns: dataset.columns().to_vec(),
            exprs: (0..m).map(Expr::feature).collect(),
            provenance: vec![0; m],
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn sequence(&self) -> TransformationSequence {
        TransformationSequence::from_exprs(&self.exprs)
    }

    /// Appends generated columns tagged with `step`.
    pub fn extend(&mut self, generated: Vec<(Vec<f64>, Expr)>, step: usize) {
        for (col, expr) in generated {
            self.columns.push(col);
            self.exprs.push(expr);
            self.provenance.push(step);
        }
    }

    fn select(&self, keep: &[usize]) -> FeatureSet {
        FeatureSet {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            exprs: keep.iter().map(|&i| self.exprs[i].clone()).collect(),
            provenance: keep.iter().map(|&i| self.provenance[i]).collect(),
        }
    }
}

/// Evaluates one postfix expression against the original columns.
pub fn evaluate_expr(expr: &Expr, dataset: &Dataset) -> Result<Vec<f64>> {
    let m = dataset.n_original_features();
    let mut stack: Vec<Vec<f64>> = Vec::new();
    for t in expr.tokens() {
        match *t {
            Token::Feat(k) => {
                if k >= m {
                    return Err(Error::Sequence(format!("feature f{k} out of range ({m} originals)")));
                }
                stack.push(dataset.column(k).to_vec());
            }
            Token::Op(id) => {
                let op = operation_by_id(id).ok_or_else(|| Error::Sequence(format!("unknown operation id {id}")))?;
                let col = if op.is_binary() {
                    let b = stack.pop();
                    let a = stack.pop();
                    match (a, b) {
                        (Some(a), Some(b)) => apply_operation(&op, &a, Some(&b))?,
                        _ => return Err(Error::Sequence(format!("stack underflow at {}", op.name))),
                    }
                } else {
                    let a = stack.pop().ok_or_else(|| Error::Sequence(format!("stack underflow at {}", op.name)))?;
                    apply_operation(&op, &a, None)?
                };
                stack.push(col);
            }
            other => return Err(Error::Sequence(format!("{other} inside an expression"))),
        }
    }
    match (stack.pop(), stack.is_empty()) {
        (Some(col), true) => Ok(col),
        _ => Err(Error::Sequence("malformed postfix expression".into())),
    }
}

/// Regenerates the feature set a sequence describes from the original data.
pub fn apply_sequence(seq: &TransformationSequence, dataset: &Dataset) -> Result<FeatureSet> {
    let exprs = seq.exprs();
    let columns = exprs
        .iter()
        .map(|e| evaluate_expr(e, dataset))
        .collect::<Result<Vec<_>>>()?;
    let provenance = vec![0; exprs.len()];
    Ok(sanitize_and_dedupe(FeatureSet {
        columns,
        exprs,
        provenance,
    }))
}

/// Replaces non-finite entries with 0 and drops columns bit-identical to an
/// earlier column.
pub fn sanitize_and_dedupe(mut fs: FeatureSet) -> FeatureSet {
    for col in &mut fs.columns {
        for v in col.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
    }
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut keep = Vec::with_capacity(fs.columns.len());
    for (i, col) in fs.columns.iter().enumerate() {
        // -0.0 and 0.0 compare equal as values; normalize so they dedupe.
        let bits: Vec<u64> = col.iter().map(|v| (v + 0.0).to_bits()).collect();
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(bits) {
            e.insert(i);
            keep.push(i);
        }
    }
    if keep.len() == fs.columns.len() {
        return fs;
    }
    fs.select(&keep)
}

/// Keeps the `cap` columns with the highest `MI(column, labels)`; ties go
/// to the lower column index. Surviving columns keep their relative order.
pub fn prune_feature_set(fs: FeatureSet, labels: &Discretized, cap: usize, bins: usize, exec: Exec) -> Result<FeatureSet> {
    if cap == 0 {
        return Err(Error::InvalidArgument("feature cap must be positive".into()));
    }
    let m = fs.n_features();
    if m <= cap {
        return Ok(fs);
    }
    let scores: Vec<f64> = exec.map_slice(&fs.columns, |c| mi_codes(&discretize(c, bins), labels));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = order[..cap].to_vec();
    keep.sort_unstable();
    Ok(fs.select(&keep))
}

/// Group-wise crossing. Binary operations pair every head column with every
/// tail column (head-major); unary operations map every head column.
pub fn cross_clusters(
    head: &[(&[f64], &Expr)],
    op: &Operation,
    tail: Option<&[(&[f64], &Expr)]>,
    exec: Exec,
) -> Result<Vec<(Vec<f64>, Expr)>> {
    if head.is_empty() {
        return Err(Error::InvalidArgument("head cluster is empty".into()));
    }
    match (op.is_binary(), tail) {
        (true, Some(tail)) => {
            if tail.is_empty() {
                return Err(Error::InvalidArgument("tail cluster is empty".into()));
            }
            let nt = tail.len();
            exec.map_range(head.len() * nt, |k| {
                let (h, t) = (&head[k / nt], &tail[k % nt]);
                Ok((apply_operation(op, h.0, Some(t.0))?, Expr::apply(op, h.1, Some(t.1))))
            })
            .into_iter()
            .collect()
        }
        (false, None) => exec
            .map_slice(head, |h| Ok((apply_operation(op, h.0, None)?, Expr::apply(op, h.1, None))))
            .into_iter()
            .collect(),
        (true, None) => Err(Error::InvalidArgument(format!("{} needs a tail cluster", op.name))),
        (false, Some(_)) => Err(Error::InvalidArgument(format!("{} is unary; no tail allowed", op.name))),
    }
}
