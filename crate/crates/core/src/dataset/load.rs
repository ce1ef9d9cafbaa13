use std::collections::HashMap;
use std::path::Path;

use super::{Dataset, Task};
use crate::{Error, Result};

/// Loads a headered CSV file, sanitizing non-finite values.
///
/// Non-numeric columns are integer-coded by first appearance. In each
/// numeric column `+Inf`/`-Inf` become the column's largest/smallest finite
/// value and `NaN` (or an empty field) becomes the median of finite values.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_csv_str(&text, label_column, task)
}

/// Same as [`load_csv`], reading from an in-memory string.
pub fn load_csv_str(text: &str, label_column: &str, task: Task) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_pos = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Data(format!("label column {label_column:?} not found")))?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Data(format!(
                "row has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(field.to_owned());
        }
    }
    let n = raw.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {n}")));
    }

    let mut names = Vec::with_capacity(header.len() - 1);
    let mut columns = Vec::with_capacity(header.len() - 1);
    let mut label = Vec::new();
    for (i, (name, fields)) in header.into_iter().zip(raw).enumerate() {
        let values = parse_column(&fields);
        if i == label_pos {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data("label column has missing or non-finite values".into()));
            }
            label = values;
        } else {
            names.push(name);
            columns.push(sanitize_column(values));
        }
    }
    Dataset::new(names, columns, label_column, label, task)
}

fn parse_column(fields: &[String]) -> Vec<f64> {
    let parsed: Option<Vec<f64>> = fields
        .iter()
        .map(|f| if f.is_empty() { Some(f64::NAN) } else { f.parse::<f64>().ok() })
        .collect();
    parsed.unwrap_or_else(|| {
        let mut codes: HashMap<&str, usize> = HashMap::new();
        fields
            .iter()
            .map(|f| {
                let next = codes.len();
                *codes.entry(f.as_str()).or_insert(next) as f64
            })
            .collect()
    })
}

fn sanitize_column(mut values: Vec<f64>) -> Vec<f64> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() == values.len() {
        return values;
    }
    if finite.is_empty() {
        return vec![0.0; values.len()];
    }
    finite.sort_by(f64::total_cmp);
    let lo = finite[0];
    let hi = finite[finite.len() - 1];
    let mid = finite.len() / 2;
    let median = if finite.len() % 2 == 1 {
        finite[mid]
    } else {
        0.5 * (finite[mid - 1] + finite[mid])
    };
    for v in &mut values {
        if v.is_nan() {
            *v = median;
        } else if *v == f64::INFINITY {
            *v = hi;
        } else if *v == f64::NEG_INFINITY {
            *v = lo;
        }
    }
    values
}
