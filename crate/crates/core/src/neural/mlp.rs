use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;
use super::layout::Layout;
use super::lstm::Activation;
use crate::{Error, Result};

/// Shape of a dense stack: an input width and `(width, activation)` per
/// layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub layers: Vec<(usize, Activation)>,
}

/// Activations recorded by [`MlpSpec::forward`].
#[derive(Debug, Clone)]
pub struct MlpTape {
    /// `acts[0]` is the input, `acts[k + 1]` the output of layer `k`.
    acts: Vec<Vec<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has an input")
    }
}

impl MlpSpec {
    pub fn new(input: usize, layers: Vec<(usize, Activation)>) -> Self {
        MlpSpec { input, layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input, |l| l.0)
    }

    /// Registers `w{k}` / `b{k}` tensors under `prefix`.
    pub fn register(&self, layout: &mut Layout, prefix: &str) {
        let mut fan_in = self.input;
        for (k, &(out, _)) in self.layers.iter().enumerate() {
            layout.push(format!("{prefix}w{k}"), out, fan_in);
            layout.push(format!("{prefix}b{k}"), out, 1);
            fan_in = out;
        }
    }

    pub fn n_params(&self) -> usize {
        let mut l = Layout::default();
        self.register(&mut l, "");
        l.len
    }

    /// Glorot weights and zero biases, written into `params`.
    pub fn init_glorot(&self, params: &mut [f64], rng: &mut impl Rng) {
        let mut off = 0;
        let mut fan_in = self.input;
        for &(out, _) in &self.layers {
            let w = glorot_uniform(out, fan_in, rng);
            params[off..off + w.len()].copy_from_slice(&w);
            off += w.len();
            params[off..off + out].iter_mut().for_each(|b| *b = 0.0);
            off += out;
            fan_in = out;
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> MlpTape {
        debug_assert_eq!(x.len(), self.input);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        let mut fan_in = self.input;
        for &(out, act) in &self.layers {
            let w = &params[off..off + out * fan_in];
            let b = &params[off + out * fan_in..off + out * fan_in + out];
            let input = acts.last().expect("non-empty");
            let y: Vec<f64> = (0..out)
                .map(|r| {
                    let row = &w[r * fan_in..(r + 1) * fan_in];
                    act.apply(b[r] + dot(row, input))
                })
                .collect();
            acts.push(y);
            off += out * fan_in + out;
            fan_in = out;
        }
        MlpTape { acts }
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient.
    pub fn backward(&self, params: &[f64], tape: &MlpTape, dy: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        let mut fan_in = self.input;
        for &(out, _) in &self.layers {
            offsets.push((off, fan_in));
            off += out * fan_in + out;
            fan_in = out;
        }
        let mut delta = dy.to_vec();
        for (k, &(out, act)) in self.layers.iter().enumerate().rev() {
            let (off, fan_in) = offsets[k];
            let y = &tape.acts[k + 1];
            let x = &tape.acts[k];
            for r in 0..out {
                delta[r] *= act.derivative_from_output(y[r]);
            }
            let w = &params[off..off + out * fan_in];
            let mut dx = vec![0.0; fan_in];
            for r in 0..out {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grads[off + r * fan_in..off + (r + 1) * fan_in];
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g += d * xi;
                }
                grads[off + out * fan_in + r] += d;
                for (dxi, wi) in dx.iter_mut().zip(&w[r * fan_in..(r + 1) * fan_in]) {
                    *dxi += d * wi;
                }
            }
            delta = dx;
        }
        delta
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// A standalone dense network owning its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn new(spec: MlpSpec, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; spec.n_params()];
        spec.init_glorot(&mut params, rng);
        Mlp { spec, params }
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let params = vec![0.0; spec.n_params()];
        Mlp { spec, params }
    }

    pub fn layout(&self) -> Layout {
        let mut l = Layout::default();
        self.spec.register(&mut l, "");
        l
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpTape> {
        if x.len() != self.spec.input {
            return Err(Error::shape(self.spec.input, x.len()));
        }
        Ok(self.spec.forward(&self.params, x))
    }

    /// Returns `(parameter gradients, input gradient)`.
    pub fn backward(&self, tape: &MlpTape, dy: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.spec.backward(&self.params, tape, dy, &mut grads);
        (grads, dx)
    }

    pub fn backward_into(&self, tape: &MlpTape, dy: &[f64], grads: &mut [f64]) -> Vec<f64> {
        self.spec.backward(&self.params, tape, dy, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn loss(net: &Mlp, x: &[f64], w: &[f64]) -> f64 {
        net.forward(x).unwrap().output().iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seed::rng(1, "mlp", 0);
        let spec = MlpSpec::new(5, vec![(7, Activation::Tanh), (4, Activation::Relu), (3, Activation::Identity)]);
        let mut net = Mlp::new(spec, &mut rng);
        // keep ReLU away from its kink
        let x: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.5).collect();
        let w = [0.7, -1.3, 0.4];
        let tape = net.forward(&x).unwrap();
        let (grads, dx) = net.backward(&tape, &w);
        let h = 1e-5;
        for i in 0..net.params.len() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = loss(&net, &x, &w);
            net.params[i] = orig - h;
            let down = loss(&net, &x, &w);
            net.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grads[i]).abs() / (fd.abs() + grads[i].abs()).max(1e-8);
            assert!(err < 1e-4 || (fd - grads[i]).abs() < 1e-9, "param {i}: fd {fd} analytic {}", grads[i]);
        }
        for i in 0..5 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&net, &xp, &w) - loss(&net, &xm, &w)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn input_width_is_checked() {
        let net = Mlp::zeros(MlpSpec::new(3, vec![(1, Activation::Identity)]));
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }
}
