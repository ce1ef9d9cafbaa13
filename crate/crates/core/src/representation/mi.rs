use crate::{Error, Result};

/// Histogram resolution used throughout the search.
pub const DEFAULT_BINS: usize = 16;

/// A column mapped onto histogram cell codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discretized {
    codes: Vec<u32>,
    levels: usize,
}

impl Discretized {
    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Integer-valued columns with at most `bins` distinct values keep one cell
/// per value; anything else is cut at the `k/bins` quantiles.
pub fn discretize(values: &[f64], bins: usize) -> Discretized {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let integral = values.iter().all(|v| v.fract() == 0.0);
    if integral && distinct.len() <= bins {
        let codes = values
            .iter()
            .map(|v| distinct.partition_point(|d| d < v) as u32)
            .collect();
        return Discretized {
            codes,
            levels: distinct.len().max(1),
        };
    }
    let mut edges: Vec<f64> = (1..bins)
        .map(|k| quantile(&sorted, k as f64 / bins as f64))
        .collect();
    edges.dedup();
    let codes = values
        .iter()
        .map(|v| edges.partition_point(|e| e < v) as u32)
        .collect();
    Discretized {
        codes,
        levels: edges.len() + 1,
    }
}

/// Plug-in mutual information (nats) of two discretized columns.
pub fn mi_codes(a: &Discretized, b: &Discretized) -> f64 {
    let n = a.codes.len();
    let mut joint = vec![0u32; a.levels * b.levels];
    let mut ca = vec![0u32; a.levels];
    let mut cb = vec![0u32; b.levels];
    for (&x, &z) in a.codes.iter().zip(&b.codes) {
        joint[x as usize * b.levels + z as usize] += 1;
        ca[x as usize] += 1;
        cb[z as usize] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for (x, &cx) in ca.iter().enumerate() {
        if cx == 0 {
            continue;
        }
        for (z, &cz) in cb.iter().enumerate() {
            let c = joint[x * b.levels + z];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (cx as f64 * cz as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Plug-in entropy (nats) of a discretized column.
pub fn entropy(a: &Discretized) -> f64 {
    let mut counts = vec![0u32; a.levels];
    for &x in &a.codes {
        counts[x as usize] += 1;
    }
    let n = a.codes.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Binned plug-in mutual information between two columns, in nats.
pub fn mutual_information(x: &[f64], z: &[f64], bins: usize) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::shape(x.len(), z.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("mutual information needs >= 2 samples".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("mutual information needs >= 2 bins".into()));
    }
    Ok(mi_codes(&discretize(x, bins), &discretize(z, bins)))
}
