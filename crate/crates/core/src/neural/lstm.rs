use serde::{Deserialize, Serialize};

use super::init::{glorot_uniform, orthogonal_init};
use super::layout::Layout;
use super::mlp::{dot, MlpSpec, MlpTape};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => (y > 0.0) as u8 as f64,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqNetConfig {
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub n_layers: usize,
    /// Dense head applied to the final hidden state of the top layer.
    pub head: Vec<(usize, Activation)>,
}

impl SeqNetConfig {
    pub fn head_spec(&self) -> MlpSpec {
        MlpSpec::new(self.hidden, self.head.clone())
    }

    pub fn layout(&self) -> Layout {
        let mut l = Layout::default();
        l.push("embedding", self.vocab, self.embed_dim);
        for k in 0..self.n_layers {
            let input = if k == 0 { self.embed_dim } else { self.hidden };
            l.push(format!("lstm{k}.w_ih"), 4 * self.hidden, input);
            l.push(format!("lstm{k}.w_hh"), 4 * self.hidden, self.hidden);
            l.push(format!("lstm{k}.b"), 4 * self.hidden, 1);
        }
        self.head_spec().register(&mut l, "head.");
        l
    }
}

/// Recorded activations of one LSTM layer across a sequence.
#[derive(Debug, Clone)]
struct LayerTape {
    /// `T x 4H` activated gates in `[i, f, g, o]` order.
    gates: Vec<f64>,
    /// `T x H` cell states.
    cs: Vec<f64>,
    /// `T x H` hidden states.
    hs: Vec<f64>,
}

/// Everything [`SeqNet::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct SeqTape {
    tokens: Vec<usize>,
    layers: Vec<LayerTape>,
    head: MlpTape,
}

impl SeqTape {
    pub fn output(&self) -> &[f64] {
        self.head.output()
    }

    /// Final hidden state of the top LSTM layer.
    pub fn encoding(&self) -> &[f64] {
        let top = self.layers.last().expect("at least one layer");
        let h = top.hs.len() / self.tokens.len();
        &top.hs[top.hs.len() - h..]
    }
}

/// Token embedding, stacked LSTM layers and a dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqNet {
    pub config: SeqNetConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

impl SeqNet {
    pub fn zeros(config: SeqNetConfig) -> Self {
        let layout = config.layout();
        let params = vec![0.0; layout.len];
        SeqNet { config, layout, params }
    }

    /// Glorot-uniform weight matrices and embedding, zero biases.
    pub fn glorot(config: SeqNetConfig, seed: u64) -> Self {
        let mut net = Self::zeros(config);
        let mut rng = seed::rng(seed, "seqnet.glorot", 0);
        for t in net.layout.tensors.clone() {
            if t.cols > 1 {
                let w = glorot_uniform(t.rows, t.cols, &mut rng);
                net.params[t.range()].copy_from_slice(&w);
            }
        }
        net
    }

    /// Every weight matrix and the embedding orthogonally initialized and
    /// scaled by `gain`; biases zero.
    pub fn orthogonal(config: SeqNetConfig, gain: f64, seed: u64) -> Self {
        let mut net = Self::zeros(config);
        for (i, t) in net.layout.tensors.clone().into_iter().enumerate() {
            if t.cols > 1 {
                let w = orthogonal_init(t.rows, t.cols, gain, seed::derive(seed, "seqnet.orthogonal", i as u64));
                net.params[t.range()].copy_from_slice(&w);
            }
        }
        net
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn head_offset(&self) -> usize {
        self.layout.find("head.w0").map_or(self.layout.len, |t| t.offset)
    }

    pub fn head_params(&self) -> &[f64] {
        &self.params[self.head_offset()..]
    }

    pub fn head_params_mut(&mut self) -> &mut [f64] {
        let off = self.head_offset();
        &mut self.params[off..]
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<SeqTape> {
        let cfg = &self.config;
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty token sequence".into()));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= cfg.vocab) {
            return Err(Error::InvalidArgument(format!("token id {bad} outside vocabulary of {}", cfg.vocab)));
        }
        let steps = tokens.len();
        let hsz = cfg.hidden;
        let g4 = 4 * hsz;
        let mut layers: Vec<LayerTape> = Vec::with_capacity(cfg.n_layers);
        for k in 0..cfg.n_layers {
            let w_ih = &self.params[self.layout.get(1 + 3 * k).range()];
            let w_hh = &self.params[self.layout.get(2 + 3 * k).range()];
            let b = &self.params[self.layout.get(3 + 3 * k).range()];
            // input projections b + W_ih x for every step
            let mut zx = vec![0.0; steps * g4];
            if k == 0 {
                let e = cfg.embed_dim;
                let emb = &self.params[self.layout.get(0).range()];
                let mut table: Vec<Option<Vec<f64>>> = vec![None; cfg.vocab];
                for (t, &tok) in tokens.iter().enumerate() {
                    let row = table[tok].get_or_insert_with(|| {
                        let x = &emb[tok * e..(tok + 1) * e];
                        (0..g4).map(|r| b[r] + dot(&w_ih[r * e..(r + 1) * e], x)).collect()
                    });
                    zx[t * g4..(t + 1) * g4].copy_from_slice(row);
                }
            } else {
                for z in zx.chunks_exact_mut(g4) {
                    z.copy_from_slice(b);
                }
                let xs = &layers[k - 1].hs;
                gemm((steps, hsz, g4), (xs, hsz, 1), (w_ih, 1, hsz), 1.0, (&mut zx, g4, 1));
            }
            let mut gates = zx;
            let mut cs = vec![0.0; steps * hsz];
            let mut hs = vec![0.0; steps * hsz];
            for t in 0..steps {
                let g = &mut gates[t * g4..(t + 1) * g4];
                if t > 0 {
                    matvec_add(w_hh, &hs[(t - 1) * hsz..t * hsz], g);
                }
                for j in 0..hsz {
                    let ig = sigmoid(g[j]);
                    let fg = sigmoid(g[hsz + j]);
                    let gg = g[2 * hsz + j].tanh();
                    let og = sigmoid(g[3 * hsz + j]);
                    g[j] = ig;
                    g[hsz + j] = fg;
                    g[2 * hsz + j] = gg;
                    g[3 * hsz + j] = og;
                    let c_prev = if t > 0 { cs[(t - 1) * hsz + j] } else { 0.0 };
                    let c = fg * c_prev + ig * gg;
                    cs[t * hsz + j] = c;
                    hs[t * hsz + j] = og * c.tanh();
                }
            }
            layers.push(LayerTape { gates, cs, hs });
        }
        let top = &layers[cfg.n_layers - 1].hs;
        let last = &top[(steps - 1) * hsz..];
        let head = self.config.head_spec().forward(self.head_params(), last);
        Ok(SeqTape {
            tokens: tokens.to_vec(),
            layers,
            head,
        })
    }

    /// Final hidden state of the top layer.
    pub fn encode(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward(tokens)?.encoding().to_vec())
    }

    pub fn predict(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward(tokens)?.output().to_vec())
    }

    /// Parameter gradients of `dot(dy, output)`.
    pub fn backward(&self, tape: &SeqTape, dy: &[f64]) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(tape, dy, &mut grads);
        grads
    }

    /// Accumulates parameter gradients of `dot(dy, output)` into `grads`.
    pub fn backward_into(&self, tape: &SeqTape, dy: &[f64], grads: &mut [f64]) {
        let cfg = &self.config;
        let hsz = cfg.hidden;
        let g4 = 4 * hsz;
        let steps = tape.tokens.len();
        let head_off = self.head_offset();
        let dlast = {
            let (_, head_grads) = grads.split_at_mut(head_off);
            cfg.head_spec().backward(self.head_params(), &tape.head, dy, head_grads)
        };
        // gradient w.r.t. each hidden state of the current layer
        let mut dh_seq = vec![0.0; steps * hsz];
        dh_seq[(steps - 1) * hsz..].copy_from_slice(&dlast);
        for k in (0..cfg.n_layers).rev() {
            let lt = &tape.layers[k];
            let in_dim = if k == 0 { cfg.embed_dim } else { hsz };
            let t_ih = self.layout.get(1 + 3 * k).clone();
            let t_hh = self.layout.get(2 + 3 * k).clone();
            let t_b = self.layout.get(3 + 3 * k).clone();
            let w_ih = &self.params[t_ih.range()];
            let w_hh = &self.params[t_hh.range()];

            // pre-activation gradients, gate-major: dzt[r * steps + t]
            let mut dzt = vec![0.0; g4 * steps];
            let mut dz = vec![0.0; g4];
            let mut dh_next = vec![0.0; hsz];
            let mut dc_next = vec![0.0; hsz];
            for t in (0..steps).rev() {
                let g = &lt.gates[t * g4..(t + 1) * g4];
                for j in 0..hsz {
                    let dh = dh_seq[t * hsz + j] + dh_next[j];
                    let (ig, fg, gg, og) = (g[j], g[hsz + j], g[2 * hsz + j], g[3 * hsz + j]);
                    let c = lt.cs[t * hsz + j];
                    let tc = c.tanh();
                    let c_prev = if t > 0 { lt.cs[(t - 1) * hsz + j] } else { 0.0 };
                    let dc = dc_next[j] + dh * og * (1.0 - tc * tc);
                    dz[j] = dc * gg * ig * (1.0 - ig);
                    dz[hsz + j] = dc * c_prev * fg * (1.0 - fg);
                    dz[2 * hsz + j] = dc * ig * (1.0 - gg * gg);
                    dz[3 * hsz + j] = dh * tc * og * (1.0 - og);
                    dc_next[j] = dc * fg;
                }
                for r in 0..g4 {
                    dzt[r * steps + t] = dz[r];
                }
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                if t > 0 {
                    matvec_t_add(w_hh, &dz, &mut dh_next);
                }
            }

            for (r, gb) in grads[t_b.range()].iter_mut().enumerate() {
                *gb += dzt[r * steps..(r + 1) * steps].iter().sum::<f64>();
            }
            if steps > 1 {
                gemm(
                    (g4, steps - 1, hsz),
                    (&dzt[1..], steps, 1),
                    (&lt.hs[..(steps - 1) * hsz], hsz, 1),
                    1.0,
                    (&mut grads[t_hh.range()], hsz, 1),
                );
            }

            if k > 0 {
                let xs = &tape.layers[k - 1].hs;
                gemm((g4, steps, in_dim), (&dzt, steps, 1), (xs, in_dim, 1), 1.0, (&mut grads[t_ih.range()], in_dim, 1));
                let mut dx_seq = vec![0.0; steps * in_dim];
                gemm((steps, g4, in_dim), (&dzt, 1, steps), (w_ih, in_dim, 1), 0.0, (&mut dx_seq, in_dim, 1));
                dh_seq = dx_seq;
            } else {
                // the bottom layer's input is an embedding row, so sum the
                // gradients per distinct token first
                let e = cfg.embed_dim;
                let emb_off = self.layout.get(0).offset;
                let mut per_token: Vec<Option<Vec<f64>>> = vec![None; cfg.vocab];
                for (t, &tok) in tape.tokens.iter().enumerate() {
                    let acc = per_token[tok].get_or_insert_with(|| vec![0.0; g4]);
                    for r in 0..g4 {
                        acc[r] += dzt[r * steps + t];
                    }
                }
                for (tok, acc) in per_token.iter().enumerate() {
                    let Some(acc) = acc else { continue };
                    let x = self.params[emb_off + tok * e..emb_off + (tok + 1) * e].to_vec();
                    let mut dx = vec![0.0; e];
                    for r in 0..g4 {
                        let v = acc[r];
                        let gw = &mut grads[t_ih.offset + r * e..t_ih.offset + (r + 1) * e];
                        axpy(v, &x, gw);
                        axpy(v, &w_ih[r * e..(r + 1) * e], &mut dx);
                    }
                    let ge = &mut grads[emb_off + tok * e..emb_off + (tok + 1) * e];
                    ge.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                }
            }
        }
    }
}

/// `C = A B + beta C` for an `m x k` by `k x n` product, each operand given
/// with its row and column strides.
fn gemm(
    (m, k, n): (usize, usize, usize),
    (a, rsa, csa): (&[f64], usize, usize),
    (b, rsb, csb): (&[f64], usize, usize),
    beta: f64,
    (c, rsc, csc): (&mut [f64], usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    if k > 0 {
        assert!(a.len() >= span(m, k, rsa, csa) && b.len() >= span(k, n, rsb, csb));
    }
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: the assertions above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `y += W x` for row-major `W` with `y.len()` rows.
fn matvec_add(w: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    let mut rows = w.chunks_exact(4 * n);
    let mut outs = y.chunks_exact_mut(4);
    for (block, out) in (&mut rows).zip(&mut outs) {
        let (r0, rest) = block.split_at(n);
        let (r1, rest) = rest.split_at(n);
        let (r2, r3) = rest.split_at(n);
        let mut acc = [0.0; 4];
        for c in 0..n {
            let xc = x[c];
            acc[0] += r0[c] * xc;
            acc[1] += r1[c] * xc;
            acc[2] += r2[c] * xc;
            acc[3] += r3[c] * xc;
        }
        out.iter_mut().zip(acc).for_each(|(o, a)| *o += a);
    }
    for (row, out) in rows.remainder().chunks_exact(n).zip(outs.into_remainder()) {
        *out += dot(row, x);
    }
}

/// `y += W^T x` for row-major `W` with `x.len()` rows.
fn matvec_t_add(w: &[f64], x: &[f64], y: &mut [f64]) {
    let n = y.len();
    let mut rows = w.chunks_exact(4 * n);
    let mut xs = x.chunks_exact(4);
    for (block, a) in (&mut rows).zip(&mut xs) {
        let (r0, rest) = block.split_at(n);
        let (r1, rest) = rest.split_at(n);
        let (r2, r3) = rest.split_at(n);
        for c in 0..n {
            y[c] += a[0] * r0[c] + a[1] * r1[c] + a[2] * r2[c] + a[3] * r3[c];
        }
    }
    for (row, &a) in rows.remainder().chunks_exact(n).zip(xs.remainder()) {
        axpy(a, row, y);
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_config() -> SeqNetConfig {
        SeqNetConfig {
            vocab: 9,
            embed_dim: 5,
            hidden: 4,
            n_layers: 2,
            head: vec![(3, Activation::Tanh), (2, Activation::Identity)],
        }
    }

    fn objective(net: &SeqNet, tokens: &[usize], w: &[f64]) -> f64 {
        net.predict(tokens).unwrap().iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn zero_parameters_output_head_bias() {
        let mut net = SeqNet::zeros(small_config());
        let n = net.params.len();
        net.params[n - 2] = 0.25;
        net.params[n - 1] = -1.5;
        let out = net.predict(&[1, 2, 3]).unwrap();
        assert_eq!(out, vec![0.25, -1.5]);
        assert!(net.encode(&[4]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic_and_validates_tokens() {
        let net = SeqNet::glorot(small_config(), 3);
        assert_eq!(net.predict(&[1, 5, 2]).unwrap(), net.predict(&[1, 5, 2]).unwrap());
        assert!(net.forward(&[]).is_err());
        assert!(net.forward(&[9]).is_err());
        assert_eq!(SeqNet::glorot(small_config(), 3), net);
    }

    #[test]
    fn unused_embedding_rows_get_zero_gradient() {
        let net = SeqNet::glorot(small_config(), 4);
        let tape = net.forward(&[1, 2, 1]).unwrap();
        let g = net.backward(&tape, &[1.0, 1.0]);
        let e = &net.layout.get(0);
        for row in [0usize, 3, 4, 5, 6, 7, 8] {
            assert!(g[e.offset + row * 5..e.offset + (row + 1) * 5].iter().all(|&v| v == 0.0));
        }
        assert!(g[e.offset + 5..e.offset + 10].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let net = SeqNet::glorot(small_config(), 5);
        let tape = net.forward(&[3, 1, 4, 1, 5]).unwrap();
        let g1 = net.backward(&tape, &[0.3, -0.7]);
        let g2 = net.backward(&tape, &[0.6, -1.4]);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut net = SeqNet::glorot(small_config(), 6);
        let mut rng = seed::rng(6, "gradcheck", 0);
        for v in net.params.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
        let tokens = [0, 3, 8, 3, 2, 7, 1, 5];
        let w = [0.9, -0.4];
        let tape = net.forward(&tokens).unwrap();
        let g = net.backward(&tape, &w);
        let h = 1e-5;
        for i in 0..net.params.len() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = objective(&net, &tokens, &w);
            net.params[i] = orig - h;
            let down = objective(&net, &tokens, &w);
            net.params[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(g[i].abs());
            assert!(
                (fd - g[i]).abs() <= 1e-4 * scale.max(1e-6),
                "param {i}: fd {fd} analytic {}",
                g[i]
            );
        }
    }
}
