//! Seeded synthetic datasets for tests, benches and demos.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Task};
use crate::seed;

/// Binary classification with a multiplicative and a logarithmic signal:
/// eight standard-normal features and
/// `y = 1[x1*x2 + ln|x3| + 0.3*noise > median]`.
pub fn synth_c(n: usize, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed, "synth_c", 0);
    let columns: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let score: Vec<f64> = (0..n)
        .map(|i| {
            let noise: f64 = rng.sample(StandardNormal);
            columns[0][i] * columns[1][i] + columns[2][i].abs().ln() + 0.3 * noise
        })
        .collect();
    let mut sorted = score.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let label = score.iter().map(|&s| (s > median) as u8 as f64).collect();
    let names = (1..=8).map(|i| format!("x{i}")).collect();
    Dataset::new(names, columns, "y", label, Task::Classification).expect("synthetic data is valid")
}

/// Regression counterpart: `y = x1*x2 + sin(x3) + 0.1*noise` over five
/// standard-normal features.
pub fn synth_r(n: usize, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed, "synth_r", 0);
    let columns: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let label = (0..n)
        .map(|i| {
            let noise: f64 = rng.sample(StandardNormal);
            columns[0][i] * columns[1][i] + columns[2][i].sin() + 0.1 * noise
        })
        .collect();
    let names = (1..=5).map(|i| format!("x{i}")).collect();
    Dataset::new(names, columns, "y", label, Task::Regression).expect("synthetic data is valid")
}

/// Renders a dataset as CSV (features then label).
pub fn to_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    for name in dataset.names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(dataset.label_name());
    out.push('\n');
    for r in 0..dataset.n_samples() {
        for col in dataset.columns() {
            out.push_str(&col[r].to_string());
            out.push(',');
        }
        out.push_str(&dataset.label()[r].to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_csv_str;

    #[test]
    fn synth_c_is_balanced_and_reproducible() {
        let a = synth_c(500, 42);
        assert_eq!(a, synth_c(500, 42));
        let ones: f64 = a.label().iter().sum();
        assert_eq!(ones, 250.0);
        assert_eq!(a.n_original_features(), 8);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = synth_r(30, 1);
        let back = load_csv_str(&to_csv(&ds), "y", Task::Regression).unwrap();
        assert_eq!(ds, back);
    }
}
