use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunOutcome, RunReport};
use crate::dataset::{Dataset, ForestConfig, RandomForest};
use crate::transform::FeatureSet;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub expression: String,
    pub importance: f64,
}

/// Mean decrease in impurity of a forest fitted on every row, normalized to
/// sum to 1 and ranked descending (ties keep column order).
pub fn feature_importance(
    features: &FeatureSet,
    dataset: &Dataset,
    forest: &ForestConfig,
    run_seed: u64,
) -> Result<Vec<FeatureImportance>> {
    let model = RandomForest::fit(
        &features.columns,
        dataset.targets(),
        forest,
        seed::derive(run_seed, "importance", 0),
        crate::exec::Exec::Sequential,
    )?;
    let imp = model.feature_importances();
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .map(|i| FeatureImportance {
            expression: features.exprs[i].to_infix(dataset.names()),
            importance: imp[i],
        })
        .collect())
}

/// Feature columns headed by their infix expressions, then the label.
pub fn write_feature_csv(features: &FeatureSet, dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = features.exprs.iter().map(|e| e.to_infix(dataset.names())).collect();
    header.push(dataset.label_name().to_string());
    w.write_record(&header)?;
    let label = dataset.label();
    for r in 0..dataset.n_samples() {
        let mut row: Vec<String> = features.columns.iter().map(|c| c[r].to_string()).collect();
        row.push(label[r].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `transformed.csv`, `trace.jsonl`, `report.json`,
/// `best_sequence.txt` and, when present, `checkpoints/`.
pub fn export_outputs(outcome: &RunOutcome, dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_feature_csv(&outcome.best_features, dataset, &dir.join("transformed.csv"))?;

    let trace_path = dir.join("trace.jsonl");
    let mut trace = fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    for step in &outcome.trace {
        let line = serde_json::to_string(step)?;
        writeln!(trace, "{line}").map_err(|e| Error::io(&trace_path, e))?;
    }

    let report = serde_json::to_string_pretty(&outcome.report)?;
    write_text(&dir.join("report.json"), &(report + "\n"))?;
    write_text(&dir.join("best_sequence.txt"), &(outcome.report.best_sequence.clone() + "\n"))?;
    if let Some(c) = &outcome.components {
        let ck = dir.join("checkpoints");
        fs::create_dir_all(&ck).map_err(|e| Error::io(&ck, e))?;
        c.save(&ck)?;
    }
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
