//! Performance predictor and novelty estimator: the two learned reward
//! surrogates that stand in for most downstream evaluations.
//!
//! Both read a transformation sequence through the same encoder shape (a
//! two-layer LSTM over token embeddings). The predictor regresses observed
//! downstream scores. The novelty estimator is a distillation pair: a frozen,
//! orthogonally initialized target network and a trainable estimator whose
//! squared disagreement with the target is the novelty score.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::neural::{save_checkpoint, Activation, Adam, AdamConfig, SeqNet, SeqNetConfig};
use crate::transform::{Token, TransformationSequence, N_OPS};
use crate::{seed, Error, Result};

/// Default token window fed to the encoders; longer sequences keep their
/// most recent tokens.
pub const DEFAULT_MAX_TOKENS: usize = 128;

/// Maps sequence tokens onto embedding rows: three special tokens, then the
/// original features, then the operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub n_original: usize,
    pub max_tokens: usize,
}

impl Vocabulary {
    pub fn new(n_original: usize) -> Self {
        Vocabulary {
            n_original,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_max_tokens(self, max_tokens: usize) -> Self {
        Vocabulary {
            max_tokens: max_tokens.max(1),
            ..self
        }
    }

    pub fn size(&self) -> usize {
        3 + self.n_original + N_OPS
    }

    pub fn id(&self, token: Token) -> Result<usize> {
        Ok(match token {
            Token::Start => 0,
            Token::End => 1,
            Token::Sep => 2,
            Token::Feat(k) if k < self.n_original => 3 + k,
            Token::Op(o) if o < N_OPS => 3 + self.n_original + o,
            other => return Err(Error::Sequence(format!("token {other} outside the vocabulary"))),
        })
    }

    pub fn encode(&self, seq: &TransformationSequence) -> Result<Vec<usize>> {
        let tokens = seq.tokens();
        let start = tokens.len().saturating_sub(self.max_tokens);
        tokens[start..].iter().map(|&t| self.id(t)).collect()
    }
}

/// Architecture and training knobs shared by both surrogates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub n_layers: usize,
    pub lr: f64,
    pub novelty_lr: f64,
    pub batch_size: usize,
    /// Encoders read at most this many trailing tokens.
    pub max_tokens: usize,
    pub cold_start_epochs: usize,
    pub finetune_epochs: usize,
    /// Gain of the frozen target network's orthogonal initialization.
    pub target_gain: f64,
    /// Use the literal signed difference instead of its square.
    pub unsquared_novelty: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            embed_dim: 32,
            hidden: 32,
            n_layers: 2,
            lr: 1e-3,
            novelty_lr: 1e-2,
            batch_size: 16,
            max_tokens: DEFAULT_MAX_TOKENS,
            cold_start_epochs: 200,
            finetune_epochs: 50,
            target_gain: 16.0,
            unsquared_novelty: false,
        }
    }
}

impl PredictorConfig {
    fn net_config(&self, vocab: Vocabulary, head: Vec<(usize, Activation)>) -> SeqNetConfig {
        SeqNetConfig {
            vocab: vocab.size(),
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            n_layers: self.n_layers,
            head,
        }
    }
}

/// A sequence together with its observed downstream score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub sequence: TransformationSequence,
    pub performance: f64,
    pub step: usize,
}

/// One minibatch pass of squared-error regression. Returns the mean loss of
/// the epoch's samples, each measured before the update it contributed to.
fn regression_epoch(
    net: &mut SeqNet,
    opt: &mut Adam,
    data: &[(Vec<usize>, f64)],
    batch_size: usize,
    seed: u64,
    exec: Exec,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seed::rng(seed, "epoch-order", 0));
    let mut total = 0.0;
    let mut grads = vec![0.0; net.n_params()];
    for batch in order.chunks(batch_size.max(1)) {
        let snapshot = &*net;
        let per_sample = exec.map_slice(batch, |&i| -> Result<(f64, Vec<f64>)> {
            let (tokens, target) = &data[i];
            let tape = snapshot.forward(tokens)?;
            let err = tape.output()[0] - target;
            let scale = 2.0 * err / batch.len() as f64;
            Ok((err * err, snapshot.backward(&tape, &[scale])))
        });
        grads.iter_mut().for_each(|g| *g = 0.0);
        for r in per_sample {
            let (loss, g) = r?;
            total += loss;
            for (acc, v) in grads.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        opt.step(&mut net.params, &grads)?;
    }
    Ok(total / data.len() as f64)
}

/// Sequence-to-score regressor.
#[derive(Debug, Clone)]
pub struct PerformancePredictor {
    pub net: SeqNet,
    pub vocab: Vocabulary,
    opt: Adam,
    batch_size: usize,
    seed: u64,
    epochs_run: u64,
}

impl PerformancePredictor {
    /// Two stacked LSTM layers followed by dense layers of width 16 and 1.
    pub fn new(vocab: Vocabulary, cfg: &PredictorConfig, seed: u64) -> Self {
        let net_cfg = cfg.net_config(vocab, vec![(16, Activation::Tanh), (1, Activation::Identity)]);
        let net = SeqNet::glorot(net_cfg, seed::derive(seed, "perf_predictor", 0));
        let opt = Adam::new(net.n_params(), AdamConfig::with_lr(cfg.lr));
        PerformancePredictor {
            net,
            vocab,
            opt,
            batch_size: cfg.batch_size,
            seed,
            epochs_run: 0,
        }
    }

    pub fn predict(&self, seq: &TransformationSequence) -> Result<f64> {
        Ok(self.net.predict(&self.vocab.encode(seq)?)?[0])
    }

    /// Mean squared error over `records`.
    pub fn loss(&self, records: &[SequenceRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("no records".into()));
        }
        let mut total = 0.0;
        for r in records {
            let e = r.performance - self.predict(&r.sequence)?;
            total += e * e;
        }
        Ok(total / records.len() as f64)
    }

    /// Minimizes the mean squared error; returns the per-epoch loss.
    pub fn train(&mut self, records: &[SequenceRecord], epochs: usize, lr: f64, exec: Exec) -> Result<Vec<f64>> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("cannot train the predictor without records".into()));
        }
        let data = records
            .iter()
            .map(|r| Ok((self.vocab.encode(&r.sequence)?, r.performance)))
            .collect::<Result<Vec<_>>>()?;
        self.opt.config.lr = lr;
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let s = seed::derive(self.seed, "perf_predictor.epoch", self.epochs_run);
            history.push(regression_epoch(&mut self.net, &mut self.opt, &data, self.batch_size, s, exec)?);
            self.epochs_run += 1;
        }
        Ok(history)
    }
}

/// Distillation-based novelty: frozen target versus trainable estimator.
#[derive(Debug, Clone)]
pub struct NoveltyEstimator {
    target: SeqNet,
    pub estimator: SeqNet,
    pub vocab: Vocabulary,
    opt: Adam,
    batch_size: usize,
    squared: bool,
    seed: u64,
    epochs_run: u64,
}

impl NoveltyEstimator {
    /// Target: shared encoder shape plus one dense output, orthogonal with
    /// `cfg.target_gain`. Estimator: encoder plus dense widths 16, 4, 1,
    /// orthogonal with unit gain.
    pub fn new(vocab: Vocabulary, cfg: &PredictorConfig, seed: u64) -> Self {
        let target_cfg = cfg.net_config(vocab, vec![(1, Activation::Identity)]);
        let est_cfg = cfg.net_config(
            vocab,
            vec![(16, Activation::Tanh), (4, Activation::Tanh), (1, Activation::Identity)],
        );
        let target = SeqNet::orthogonal(target_cfg, cfg.target_gain, seed::derive(seed, "novelty_target", 0));
        let estimator = SeqNet::orthogonal(est_cfg, 1.0, seed::derive(seed, "novelty_estimator", 0));
        let opt = Adam::new(estimator.n_params(), AdamConfig::with_lr(cfg.novelty_lr));
        NoveltyEstimator {
            target,
            estimator,
            vocab,
            opt,
            batch_size: cfg.batch_size,
            squared: !cfg.unsquared_novelty,
            seed,
            epochs_run: 0,
        }
    }

    /// Read-only view of the frozen target network.
    pub fn target(&self) -> &SeqNet {
        &self.target
    }

    /// `(estimator - target)^2`, or the signed difference when configured
    /// for the unsquared form.
    pub fn novelty_score(&self, seq: &TransformationSequence) -> Result<f64> {
        let ids = self.vocab.encode(seq)?;
        let diff = self.estimator.predict(&ids)?[0] - self.target.predict(&ids)?[0];
        Ok(if self.squared { diff * diff } else { diff })
    }

    /// Frozen target encoder's final hidden state.
    pub fn embed_sequence(&self, seq: &TransformationSequence) -> Result<Vec<f64>> {
        self.target.encode(&self.vocab.encode(seq)?)
    }

    /// Mean squared estimator-target disagreement over `sequences`.
    pub fn loss(&self, sequences: &[&TransformationSequence]) -> Result<f64> {
        if sequences.is_empty() {
            return Err(Error::InvalidArgument("no sequences".into()));
        }
        let mut total = 0.0;
        for s in sequences {
            let ids = self.vocab.encode(s)?;
            let d = self.estimator.predict(&ids)?[0] - self.target.predict(&ids)?[0];
            total += d * d;
        }
        Ok(total / sequences.len() as f64)
    }

    /// Fits the estimator to the frozen target's outputs.
    pub fn train(&mut self, sequences: &[&TransformationSequence], epochs: usize, lr: f64, exec: Exec) -> Result<Vec<f64>> {
        if sequences.is_empty() {
            return Err(Error::InvalidArgument("cannot train the novelty estimator without sequences".into()));
        }
        let target = &self.target;
        let vocab = self.vocab;
        let data = exec
            .map_slice(sequences, |s| -> Result<(Vec<usize>, f64)> {
                let ids = vocab.encode(s)?;
                let y = target.predict(&ids)?[0];
                Ok((ids, y))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        self.opt.config.lr = lr;
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let s = seed::derive(self.seed, "novelty.epoch", self.epochs_run);
            history.push(regression_epoch(&mut self.estimator, &mut self.opt, &data, self.batch_size, s, exec)?);
            self.epochs_run += 1;
        }
        Ok(history)
    }
}

/// Minimum cosine distance `1 - cos` between `embedding` and any history
/// entry. Zero-norm vectors count as distance 1.
pub fn novelty_distance(embedding: &[f64], history: &[Vec<f64>]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::InvalidArgument("novelty distance needs a non-empty history".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ne = norm(embedding);
    let mut best = f64::INFINITY;
    for h in history {
        if h.len() != embedding.len() {
            return Err(Error::shape(embedding.len(), h.len()));
        }
        let nh = norm(h);
        let d = if ne == 0.0 || nh == 0.0 {
            1.0
        } else {
            let cos: f64 = embedding.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / (ne * nh);
            (1.0 - cos).clamp(0.0, 2.0)
        };
        best = best.min(d);
    }
    Ok(best)
}

/// True at episode counts divisible by `every_k` (1-based episode numbers).
pub fn should_finetune(episode: usize, every_k: usize) -> bool {
    every_k > 0 && episode > 0 && episode % every_k == 0
}

/// The predictor and novelty estimator trained together.
#[derive(Debug, Clone)]
pub struct EvaluationComponents {
    pub predictor: PerformancePredictor,
    pub novelty: NoveltyEstimator,
    pub config: PredictorConfig,
}

/// Loss curves from one training round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub predictor_loss: Vec<f64>,
    pub novelty_loss: Vec<f64>,
}

impl EvaluationComponents {
    pub fn new(vocab: Vocabulary, config: PredictorConfig, seed: u64) -> Self {
        let vocab = vocab.with_max_tokens(config.max_tokens);
        EvaluationComponents {
            predictor: PerformancePredictor::new(vocab, &config, seed),
            novelty: NoveltyEstimator::new(vocab, &config, seed),
            config,
        }
    }

    /// Cold-start fit on every collected record.
    pub fn fit_cold_start(&mut self, records: &[SequenceRecord], exec: Exec) -> Result<TrainingReport> {
        let epochs = self.config.cold_start_epochs;
        let predictor_loss = self.predictor.train(records, epochs, self.config.lr, exec)?;
        let seqs: Vec<&TransformationSequence> = records.iter().map(|r| &r.sequence).collect();
        let novelty_loss = self.novelty.train(&seqs, epochs, self.config.novelty_lr, exec)?;
        Ok(TrainingReport {
            predictor_loss,
            novelty_loss,
        })
    }

    /// Finetunes on `samples` drawn from the replay buffer. The predictor
    /// only sees samples that carry a downstream score; if there are none
    /// it is left untouched.
    pub fn finetune(&mut self, samples: &[(&TransformationSequence, Option<f64>)], exec: Exec) -> Result<TrainingReport> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("finetune needs at least one sample".into()));
        }
        let epochs = self.config.finetune_epochs;
        let records: Vec<SequenceRecord> = samples
            .iter()
            .filter_map(|(s, p)| {
                p.map(|performance| SequenceRecord {
                    sequence: (*s).clone(),
                    performance,
                    step: 0,
                })
            })
            .collect();
        let predictor_loss = if records.is_empty() {
            Vec::new()
        } else {
            self.predictor.train(&records, epochs, self.config.lr, exec)?
        };
        let seqs: Vec<&TransformationSequence> = samples.iter().map(|(s, _)| *s).collect();
        let novelty_loss = self.novelty.train(&seqs, epochs, self.config.novelty_lr, exec)?;
        Ok(TrainingReport {
            predictor_loss,
            novelty_loss,
        })
    }

    /// Writes `perf_predictor.bin`, `novelty_target.bin` and
    /// `novelty_estimator.bin` (plus manifests) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let p = &self.predictor.net;
        save_checkpoint(dir.join("perf_predictor.bin"), &p.layout, &p.params)?;
        let t = self.novelty.target();
        save_checkpoint(dir.join("novelty_target.bin"), &t.layout, &t.params)?;
        let e = &self.novelty.estimator;
        save_checkpoint(dir.join("novelty_estimator.bin"), &e.layout, &e.params)
    }
}
