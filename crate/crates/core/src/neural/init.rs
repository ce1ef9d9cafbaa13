use rand::Rng;
use rand_distr::StandardNormal;

use crate::seed;

/// Orthogonal matrix (row-major) scaled by `gain`.
///
/// A Gaussian matrix is orthonormalized by twice-applied modified
/// Gram-Schmidt along its shorter dimension: tall or square results have
/// orthonormal columns, wide results orthonormal rows.
pub fn orthogonal_init(rows: usize, cols: usize, gain: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, "orthogonal", 0);
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // vectors[k] is the k-th vector of length `long` to orthonormalize.
    let mut vectors: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..long).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for k in 0..short {
        for _pass in 0..2 {
            for j in 0..k {
                let (done, rest) = vectors.split_at_mut(k);
                let proj: f64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                for (v, q) in rest[0].iter_mut().zip(&done[j]) {
                    *v -= proj * q;
                }
            }
        }
        let norm = vectors[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        vectors[k].iter_mut().for_each(|v| *v /= norm);
    }
    let mut out = vec![0.0; rows * cols];
    for (k, v) in vectors.iter().enumerate() {
        for (i, &x) in v.iter().enumerate() {
            let (r, c) = if rows >= cols { (i, k) } else { (k, i) };
            out[r * cols + c] = gain * x;
        }
    }
    out
}

/// Uniform Glorot initialization in `[-sqrt(6/(fan_in+fan_out)), +...]`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect()
}
