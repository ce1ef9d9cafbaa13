//! Cascading actor-critic agents, rewards, evaluation gating and the
//! TD-prioritized replay buffer.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::{Activation, Adam, AdamConfig, Mlp, MlpSpec};
use crate::predictor::{NoveltyEstimator, PerformancePredictor};
use crate::representation::{OpOneHot, StateVector, STATE_DIM};
use crate::transform::{TransformationSequence, N_OPS};
use crate::{seed, Error, Result};

pub const HEAD_INPUT: usize = 2 * STATE_DIM;
pub const OP_INPUT: usize = 2 * STATE_DIM;
pub const TAIL_INPUT: usize = 3 * STATE_DIM + N_OPS;
const TAIL_PREFIX: usize = 2 * STATE_DIM + N_OPS;

/// `sign(x) * ln(1 + |x|)`: keeps wide-ranged statistics in a trainable
/// range while preserving order.
pub fn symlog(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

fn squash(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| symlog(x)).collect()
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden: 64,
            lr: 1e-4,
            batch_size: 8,
        }
    }
}

/// Head agent view: the overall representation and one representation per
/// candidate cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadObs {
    pub overall: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
}

impl HeadObs {
    pub fn new(overall: &StateVector, clusters: &[StateVector]) -> Self {
        HeadObs {
            overall: squash(overall.values()),
            candidates: clusters.iter().map(|c| squash(c.values())).collect(),
        }
    }

    fn actor_input(&self, k: usize) -> Vec<f64> {
        concat(&[&self.candidates[k], &self.overall])
    }

    pub fn critic_state(&self) -> &[f64] {
        &self.overall
    }
}

/// Operation agent view: chosen head cluster and overall representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpObs {
    pub input: Vec<f64>,
}

impl OpObs {
    pub fn new(head: &StateVector, overall: &StateVector) -> Self {
        OpObs {
            input: squash(&concat(&[head.values(), overall.values()])),
        }
    }

    pub fn critic_state(&self) -> &[f64] {
        &self.input
    }
}

/// Tail agent view: head, overall and operation one-hot, plus one
/// representation per candidate cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailObs {
    pub prefix: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
}

impl TailObs {
    pub fn new(head: &StateVector, overall: &StateVector, op: &OpOneHot, clusters: &[StateVector]) -> Self {
        let mut prefix = squash(&concat(&[head.values(), overall.values()]));
        prefix.extend_from_slice(op.values());
        TailObs {
            prefix,
            candidates: clusters.iter().map(|c| squash(c.values())).collect(),
        }
    }

    fn actor_input(&self, k: usize) -> Vec<f64> {
        concat(&[&self.prefix, &self.candidates[k]])
    }

    pub fn critic_state(&self) -> &[f64] {
        &self.prefix
    }
}

/// One actor and its critic.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Mlp,
    pub critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
}

impl Agent {
    fn new(actor: Mlp, critic: Mlp, lr: f64) -> Self {
        let actor_opt = Adam::new(actor.params.len(), AdamConfig::with_lr(lr));
        let critic_opt = Adam::new(critic.params.len(), AdamConfig::with_lr(lr));
        Agent {
            actor,
            critic,
            actor_opt,
            critic_opt,
        }
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(state)?.output()[0])
    }
}

/// Head, operation and tail agents.
#[derive(Debug, Clone)]
pub struct AgentPolicies {
    pub head: Agent,
    pub op: Agent,
    pub tail: Agent,
}

fn specs(hidden: usize) -> [(MlpSpec, MlpSpec); 3] {
    let net = |input, out| MlpSpec::new(input, vec![(hidden, Activation::Tanh), (out, Activation::Identity)]);
    [
        (net(HEAD_INPUT, 1), net(STATE_DIM, 1)),
        (net(OP_INPUT, N_OPS), net(OP_INPUT, 1)),
        (net(TAIL_INPUT, 1), net(TAIL_PREFIX, 1)),
    ]
}

/// Zeroes the last dense layer so a fresh actor is uniform and a fresh
/// critic predicts 0.
fn zero_output_layer(m: &mut Mlp) {
    let n = m.spec.layers.len();
    let fan_in = if n > 1 { m.spec.layers[n - 2].0 } else { m.spec.input };
    let last = m.spec.layers[n - 1].0 * (fan_in + 1);
    let len = m.params.len();
    m.params[len - last..].fill(0.0);
}

impl AgentPolicies {
    /// Glorot hidden layers with zero output layers.
    pub fn new(cfg: &AgentConfig, seed: u64) -> Self {
        let [h, o, t] = specs(cfg.hidden);
        let build = |(a, c): (MlpSpec, MlpSpec), k: u64| {
            let mut actor = Mlp::new(a, &mut seed::rng(seed, "actor", k));
            let mut critic = Mlp::new(c, &mut seed::rng(seed, "critic", k));
            zero_output_layer(&mut actor);
            zero_output_layer(&mut critic);
            Agent::new(actor, critic, cfg.lr)
        };
        AgentPolicies {
            head: build(h, 0),
            op: build(o, 1),
            tail: build(t, 2),
        }
    }

    /// All parameters zero: uniform policies and zero values.
    pub fn zeros(cfg: &AgentConfig) -> Self {
        let [h, o, t] = specs(cfg.hidden);
        let build = |(a, c): (MlpSpec, MlpSpec)| Agent::new(Mlp::zeros(a), Mlp::zeros(c), cfg.lr);
        AgentPolicies {
            head: build(h),
            op: build(o),
            tail: build(t),
        }
    }

    pub fn head_scores(&self, obs: &HeadObs) -> Result<Vec<f64>> {
        if obs.candidates.is_empty() {
            return Err(Error::InvalidArgument("no candidate clusters".into()));
        }
        (0..obs.candidates.len())
            .map(|k| Ok(self.head.actor.forward(&obs.actor_input(k))?.output()[0]))
            .collect()
    }

    pub fn op_scores(&self, obs: &OpObs) -> Result<Vec<f64>> {
        Ok(self.op.actor.forward(&obs.input)?.output().to_vec())
    }

    pub fn tail_scores(&self, obs: &TailObs) -> Result<Vec<f64>> {
        if obs.candidates.is_empty() {
            return Err(Error::InvalidArgument("no candidate clusters".into()));
        }
        (0..obs.candidates.len())
            .map(|k| Ok(self.tail.actor.forward(&obs.actor_input(k))?.output()[0]))
            .collect()
    }

    pub fn select_head<R: Rng + ?Sized>(&self, obs: &HeadObs, mode: Mode, rng: &mut R) -> Result<usize> {
        choose(&self.head_scores(obs)?, mode, rng)
    }

    pub fn select_operation<R: Rng + ?Sized>(&self, obs: &OpObs, mode: Mode, rng: &mut R) -> Result<usize> {
        choose(&self.op_scores(obs)?, mode, rng)
    }

    pub fn select_tail<R: Rng + ?Sized>(&self, obs: &TailObs, mode: Mode, rng: &mut R) -> Result<usize> {
        choose(&self.tail_scores(obs)?, mode, rng)
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Softmax draw in sample mode, argmax in greedy mode.
pub fn choose<R: Rng + ?Sized>(scores: &[f64], mode: Mode, rng: &mut R) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no candidates to choose from".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite policy score".into()));
    }
    Ok(match mode {
        Mode::Greedy => argmax(scores),
        Mode::Sample => {
            let probs = softmax(scores);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        }
    })
}

pub fn downstream_reward(perf_now: f64, perf_prev: f64) -> f64 {
    perf_now - perf_prev
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay: u64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            eps_start: 0.1,
            eps_end: 0.005,
            decay: 1000,
            gamma: 0.99,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_end <= self.eps_start) || self.eps_end < 0.0 {
            return Err(Error::Config("require 0 <= eps_end <= eps_start".into()));
        }
        if self.decay < 1 {
            return Err(Error::Config("decay must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Novelty weight at global step `i`.
pub fn epsilon_at(cfg: &RewardConfig, i: u64) -> f64 {
    cfg.eps_end + (cfg.eps_start - cfg.eps_end) * (-(i as f64) / cfg.decay as f64).exp()
}

/// `(phi_now - phi_prev) + eps * novelty`.
pub fn combine_pseudo(phi_now: f64, phi_prev: f64, novelty: f64, eps: f64) -> f64 {
    (phi_now - phi_prev) + eps * novelty
}

pub fn pseudo_reward(
    pp: &PerformancePredictor,
    ne: &NoveltyEstimator,
    seq_now: &TransformationSequence,
    seq_prev: &TransformationSequence,
    cfg: &RewardConfig,
    i: u64,
) -> Result<f64> {
    let now = pp.predict(seq_now)?;
    let prev = pp.predict(seq_prev)?;
    Ok(combine_pseudo(now, prev, ne.novelty_score(seq_now)?, epsilon_at(cfg, i)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub alpha: f64,
    pub beta: f64,
    pub min_history: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            alpha: 10.0,
            beta: 5.0,
            min_history: 10,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 100]")));
            }
        }
        Ok(())
    }
}

/// Percentile `q` in `[0, 100]` by linear interpolation between order
/// statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// True while either history is shorter than `min_history`; afterwards
/// true iff the prediction reaches the top-alpha percentile of its
/// history or the novelty reaches the top-beta percentile of its history.
/// A percent of 100 admits every value, 0 admits none.
pub fn should_evaluate_downstream(
    pred_perf: f64,
    novelty: f64,
    gate: &GateConfig,
    perf_history: &[f64],
    novelty_history: &[f64],
) -> bool {
    let warm = gate.min_history.max(1);
    if perf_history.len() < warm || novelty_history.len() < warm {
        return true;
    }
    let top = |q: f64, v: f64, hist: &[f64]| q >= 100.0 || (q > 0.0 && v >= percentile(hist, 100.0 - q));
    let perf_hit = top(gate.alpha, pred_perf, perf_history);
    let novel_hit = top(gate.beta, novelty, novelty_history);
    perf_hit || novel_hit
}

/// Chosen head cluster, operation and optional tail cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub head: usize,
    pub op: usize,
    pub tail: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfFlag {
    Estimated,
    Downstream,
}

/// Critic states of the following step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextStates {
    pub head: Vec<f64>,
    pub op: Vec<f64>,
    pub tail: Option<Vec<f64>>,
}

/// One transition. `next` is `None` on the last step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryUnit {
    pub head: HeadObs,
    pub op: OpObs,
    pub tail: Option<TailObs>,
    pub action: Action,
    pub reward: f64,
    pub next: Option<NextStates>,
    pub next_action: Option<Action>,
    pub sequence: TransformationSequence,
    pub performance: f64,
    pub flag: PerfFlag,
}

/// `|r + gamma * v_next - v| + 1e-6`.
pub fn td_priority(reward: f64, gamma: f64, v_next: f64, v: f64) -> f64 {
    (reward + gamma * v_next - v).abs() + 1e-6
}

/// Bounded FIFO memory sampled in proportion to TD priority.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    units: VecDeque<MemoryUnit>,
    priorities: VecDeque<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be at least 1".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            units: VecDeque::with_capacity(capacity),
            priorities: VecDeque::with_capacity(capacity),
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn units(&self) -> impl Iterator<Item = &MemoryUnit> {
        self.units.iter()
    }

    pub fn priorities(&self) -> impl Iterator<Item = f64> + '_ {
        self.priorities.iter().copied()
    }

    /// Inserts with an explicit priority, evicting the oldest unit when full.
    pub fn push_with_priority(&mut self, unit: MemoryUnit, priority: f64) -> Result<()> {
        if !(priority > 0.0 && priority.is_finite()) {
            return Err(Error::InvalidArgument(format!("priority {priority} is not a positive finite number")));
        }
        if self.units.len() == self.capacity {
            self.units.pop_front();
            self.priorities.pop_front();
        }
        self.units.push_back(unit);
        self.priorities.push_back(priority);
        Ok(())
    }

    /// Inserts with the head critic's absolute TD error as priority.
    pub fn push_memory(&mut self, unit: MemoryUnit, policies: &AgentPolicies, gamma: f64) -> Result<()> {
        let v = policies.head.value(unit.head.critic_state())?;
        let v_next = match &unit.next {
            Some(n) => policies.head.value(&n.head)?,
            None => 0.0,
        };
        let p = td_priority(unit.reward, gamma, v_next, v);
        self.push_with_priority(unit, p)
    }

    /// Indices drawn with replacement in proportion to priority.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.units.is_empty() {
            return Err(Error::InvalidArgument("cannot sample from an empty buffer".into()));
        }
        let dist = WeightedIndex::new(self.priorities.iter().copied())
            .map_err(|e| Error::InvalidArgument(format!("invalid priorities: {e}")))?;
        Ok((0..batch_size).map(|_| dist.sample(rng)).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&MemoryUnit>> {
        Ok(self.sample_indices(batch_size, rng)?.into_iter().map(|i| &self.units[i]).collect())
    }
}

/// Mean losses of one update, per agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub head_critic: f64,
    pub head_actor: f64,
    pub op_critic: f64,
    pub op_actor: f64,
    pub tail_critic: f64,
    pub tail_actor: f64,
}

struct Grads {
    actor: Vec<f64>,
    critic: Vec<f64>,
    critic_loss: f64,
    actor_loss: f64,
    n: usize,
}

impl Grads {
    fn new(agent: &Agent) -> Self {
        Grads {
            actor: vec![0.0; agent.actor.params.len()],
            critic: vec![0.0; agent.critic.params.len()],
            critic_loss: 0.0,
            actor_loss: 0.0,
            n: 0,
        }
    }

    /// Critic step toward `target`; returns the detached advantage.
    fn critic(&mut self, agent: &Agent, state: &[f64], target: f64) -> Result<f64> {
        let tape = agent.critic.forward(state)?;
        let err = tape.output()[0] - target;
        self.critic_loss += err * err;
        agent.critic.backward_into(&tape, &[2.0 * err], &mut self.critic);
        self.n += 1;
        Ok(-err)
    }

    /// Gradient of `-advantage * log softmax(scores)[action]` where each
    /// candidate's score is a scalar actor output.
    fn per_candidate_actor(&mut self, agent: &Agent, inputs: &[Vec<f64>], action: usize, adv: f64) -> Result<()> {
        let tapes = inputs.iter().map(|x| agent.actor.forward(x)).collect::<Result<Vec<_>>>()?;
        let scores: Vec<f64> = tapes.iter().map(|t| t.output()[0]).collect();
        let probs = softmax(&scores);
        self.actor_loss -= adv * probs[action].ln();
        for (k, tape) in tapes.iter().enumerate() {
            let ind = if k == action { 1.0 } else { 0.0 };
            let ds = -adv * (ind - probs[k]);
            if ds != 0.0 {
                agent.actor.backward_into(tape, &[ds], &mut self.actor);
            }
        }
        Ok(())
    }

    fn logits_actor(&mut self, agent: &Agent, input: &[f64], action: usize, adv: f64) -> Result<()> {
        let tape = agent.actor.forward(input)?;
        let probs = softmax(tape.output());
        self.actor_loss -= adv * probs[action].ln();
        let dy: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, p)| -adv * (if k == action { 1.0 } else { 0.0 } - p))
            .collect();
        agent.actor.backward_into(&tape, &dy, &mut self.actor);
        Ok(())
    }

    fn apply(mut self, agent: &mut Agent) -> Result<(f64, f64)> {
        if self.n == 0 {
            return Ok((0.0, 0.0));
        }
        let scale = 1.0 / self.n as f64;
        self.actor.iter_mut().chain(self.critic.iter_mut()).for_each(|g| *g *= scale);
        agent.critic_opt.step(&mut agent.critic.params, &self.critic)?;
        agent.actor_opt.step(&mut agent.actor.params, &self.actor)?;
        Ok((self.critic_loss * scale, self.actor_loss * scale))
    }
}

/// One Adam step per agent: critics regress toward the detached one-step
/// target, actors ascend advantage-weighted log-probability.
pub fn update_agents(policies: &mut AgentPolicies, batch: &[&MemoryUnit], gamma: f64, lr: f64) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("cannot update from an empty batch".into()));
    }
    let mut gh = Grads::new(&policies.head);
    let mut go = Grads::new(&policies.op);
    let mut gt = Grads::new(&policies.tail);
    for unit in batch {
        let next = unit.next.as_ref();
        let boot = |agent: &Agent, s: Option<&[f64]>| -> Result<f64> {
            s.map_or(Ok(0.0), |s| agent.value(s))
        };

        let target = unit.reward + gamma * boot(&policies.head, next.map(|n| n.head.as_slice()))?;
        let adv = gh.critic(&policies.head, unit.head.critic_state(), target)?;
        let inputs: Vec<Vec<f64>> = (0..unit.head.candidates.len()).map(|k| unit.head.actor_input(k)).collect();
        gh.per_candidate_actor(&policies.head, &inputs, unit.action.head, adv)?;

        let target = unit.reward + gamma * boot(&policies.op, next.map(|n| n.op.as_slice()))?;
        let adv = go.critic(&policies.op, unit.op.critic_state(), target)?;
        go.logits_actor(&policies.op, &unit.op.input, unit.action.op, adv)?;

        if let (Some(tail), Some(a)) = (&unit.tail, unit.action.tail) {
            let target = unit.reward + gamma * boot(&policies.tail, next.and_then(|n| n.tail.as_deref()))?;
            let adv = gt.critic(&policies.tail, tail.critic_state(), target)?;
            let inputs: Vec<Vec<f64>> = (0..tail.candidates.len()).map(|k| tail.actor_input(k)).collect();
            gt.per_candidate_actor(&policies.tail, &inputs, a, adv)?;
        }
    }
    let mut report = LossReport::default();
    for agent in [&mut policies.head, &mut policies.op, &mut policies.tail] {
        agent.actor_opt.config.lr = lr;
        agent.critic_opt.config.lr = lr;
    }
    (report.head_critic, report.head_actor) = gh.apply(&mut policies.head)?;
    (report.op_critic, report.op_actor) = go.apply(&mut policies.op)?;
    (report.tail_critic, report.tail_actor) = gt.apply(&mut policies.tail)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::parse_sequence;
    use proptest::prelude::*;

    fn sv(c: f64) -> StateVector {
        StateVector::from_values(vec![c; STATE_DIM]).unwrap()
    }

    fn unit(head: HeadObs, action: Action, reward: f64) -> MemoryUnit {
        let overall = StateVector::from_values(head.overall.clone()).unwrap();
        MemoryUnit {
            op: OpObs::new(&overall, &overall),
            head,
            tail: None,
            action,
            reward,
            next: None,
            next_action: None,
            sequence: parse_sequence("<start> f0 <end>").unwrap(),
            performance: 0.0,
            flag: PerfFlag::Downstream,
        }
    }

    #[test]
    fn input_widths() {
        assert_eq!(HEAD_INPUT, 98);
        assert_eq!(OP_INPUT, 98);
        assert_eq!(TAIL_INPUT, 162);
        let p = AgentPolicies::new(&AgentConfig::default(), 1);
        assert_eq!(p.tail.actor.spec.input, 147 + N_OPS);
        let obs = OpObs::new(&sv(0.3), &sv(-2.0));
        assert_eq!(p.op_scores(&obs).unwrap().len(), 15);
        let op = OpOneHot::new(3, N_OPS).unwrap();
        let tail = TailObs::new(&sv(1.0), &sv(2.0), &op, &[sv(0.5)]);
        assert_eq!(tail.actor_input(0).len(), 162);
    }

    #[test]
    fn single_candidate_is_always_chosen() {
        let p = AgentPolicies::new(&AgentConfig::default(), 2);
        let obs = HeadObs::new(&sv(1.0), &[sv(3.0)]);
        let mut rng = seed::rng(2, "t", 0);
        assert_eq!(p.select_head(&obs, Mode::Sample, &mut rng).unwrap(), 0);
        assert_eq!(p.select_head(&obs, Mode::Greedy, &mut rng).unwrap(), 0);
        assert!(p.select_head(&HeadObs::new(&sv(1.0), &[]), Mode::Greedy, &mut rng).is_err());
    }

    #[test]
    fn zero_actor_samples_uniformly() {
        let p = AgentPolicies::zeros(&AgentConfig::default());
        let obs = HeadObs::new(&sv(1.0), &[sv(0.0), sv(1.0), sv(2.0), sv(3.0)]);
        let mut rng = seed::rng(3, "t", 0);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[p.select_head(&obs, Mode::Sample, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() <= 0.03, "{counts:?}");
        }
        let op_obs = OpObs::new(&sv(1.0), &sv(1.0));
        let mut ops = [0usize; N_OPS];
        for _ in 0..10_000 {
            ops[p.select_operation(&op_obs, Mode::Sample, &mut rng).unwrap()] += 1;
        }
        for c in ops {
            assert!((c as f64 / 10_000.0 - 1.0 / 15.0).abs() <= 0.03);
        }
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let mut rng = seed::rng(0, "t", 0);
        assert_eq!(choose(&[0.1, 0.9, 0.9], Mode::Greedy, &mut rng).unwrap(), 1);
    }

    #[test]
    fn sampling_is_seeded() {
        let p = AgentPolicies::new(&AgentConfig::default(), 4);
        let obs = OpObs::new(&sv(0.5), &sv(1.5));
        let draw = || {
            let mut rng = seed::rng(9, "t", 0);
            (0..20).map(|_| p.select_operation(&obs, Mode::Sample, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn reward_arithmetic() {
        assert_eq!(downstream_reward(0.8, 0.8), 0.0);
        assert!((downstream_reward(0.85, 0.80) - 0.05).abs() < 1e-12);
        assert!((downstream_reward(0.7, 0.9) + 0.2).abs() < 1e-12);
        assert_eq!(combine_pseudo(0.5, 0.5, 0.0, 0.1), 0.0);
        let cfg = RewardConfig::default();
        let r = combine_pseudo(0.52, 0.50, 0.5, epsilon_at(&cfg, 0));
        assert!((r - 0.07).abs() < 1e-12);
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = RewardConfig::default();
        assert!((epsilon_at(&cfg, 0) - 0.1).abs() <= 1e-12);
        let expected = 0.005 + 0.095 * (-1.0f64).exp();
        assert!((epsilon_at(&cfg, 1000) - expected).abs() <= 1e-12);
        assert!((epsilon_at(&cfg, 1_000_000) - 0.005).abs() <= 1e-12);
    }

    #[test]
    fn pseudo_reward_vanishes_for_identical_sequences_and_matching_novelty() {
        use crate::predictor::{PredictorConfig, Vocabulary};
        let cfg = PredictorConfig {
            embed_dim: 4,
            hidden: 4,
            ..Default::default()
        };
        let pp = PerformancePredictor::new(Vocabulary::new(2), &cfg, 1);
        let ne = NoveltyEstimator::new(Vocabulary::new(2), &cfg, 1);
        let s = parse_sequence("<start> f0 f1 plus <end>").unwrap();
        let n = ne.novelty_score(&s).unwrap();
        let r = pseudo_reward(&pp, &ne, &s, &s, &RewardConfig::default(), 0).unwrap();
        assert!((r - 0.1 * n).abs() < 1e-12);
        let late = pseudo_reward(&pp, &ne, &s, &s, &RewardConfig::default(), 5000).unwrap();
        assert!(late <= r);
    }

    #[test]
    fn gating_rules() {
        let gate = GateConfig::default();
        assert!(should_evaluate_downstream(0.0, 0.0, &gate, &[1.0; 3], &[1.0; 3]));
        let hist: Vec<f64> = (1..=100).map(f64::from).collect();
        let flat = vec![10.0; 100];
        assert!(should_evaluate_downstream(95.0, 0.0, &gate, &hist, &flat));
        assert!(!should_evaluate_downstream(80.0, 0.0, &gate, &hist, &flat));
        assert!(should_evaluate_downstream(80.0, 10.0, &gate, &hist, &flat));
        let all = GateConfig { alpha: 100.0, beta: 100.0, min_history: 10 };
        assert!(should_evaluate_downstream(-1e9, -1e9, &all, &hist, &hist));
        assert!((percentile(&hist, 90.0) - 90.1).abs() < 1e-12);
    }

    #[test]
    fn priority_examples() {
        assert!((td_priority(1.0, 0.99, 0.5, 0.2) - (1.295 + 1e-6)).abs() < 1e-12);
        assert!((td_priority(-1.0, 0.99, 0.0, 0.0) - (1.0 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn buffer_evicts_oldest() {
        let mut buf = ReplayBuffer::new(16).unwrap();
        let obs = HeadObs::new(&sv(0.0), &[sv(0.0)]);
        for i in 0..17 {
            buf.push_with_priority(unit(obs.clone(), Action { head: 0, op: 0, tail: None }, i as f64), 1.0).unwrap();
        }
        assert_eq!(buf.len(), 16);
        assert_eq!(buf.units().next().unwrap().reward, 1.0);
        assert!(buf.push_with_priority(unit(obs, Action { head: 0, op: 0, tail: None }, 0.0), 0.0).is_err());
    }

    #[test]
    fn sampling_follows_priorities() {
        let mut buf = ReplayBuffer::new(16).unwrap();
        let obs = HeadObs::new(&sv(0.0), &[sv(0.0)]);
        let mut rng = seed::rng(5, "t", 0);
        assert!(buf.sample_indices(1, &mut rng).is_err());
        for p in [3.0, 1.0] {
            buf.push_with_priority(unit(obs.clone(), Action { head: 0, op: 0, tail: None }, 0.0), p).unwrap();
        }
        let idx = buf.sample_indices(10_000, &mut rng).unwrap();
        let f0 = idx.iter().filter(|&&i| i == 0).count() as f64 / 10_000.0;
        assert!((f0 - 0.75).abs() <= 0.03, "{f0}");
    }

    #[test]
    fn critic_at_fixed_point_is_unchanged() {
        let mut p = AgentPolicies::zeros(&AgentConfig::default());
        let before = p.head.critic.params.clone();
        let obs = HeadObs::new(&sv(1.0), &[sv(2.0)]);
        let u = unit(obs, Action { head: 0, op: 0, tail: None }, 0.0);
        let rep = update_agents(&mut p, &[&u], 0.99, 1e-3).unwrap();
        assert_eq!(rep.head_critic, 0.0);
        assert_eq!(p.head.critic.params, before);
        // one candidate cluster, zero advantage: the head actor is untouched too
        assert_eq!(rep.head_actor, 0.0);
        assert!(update_agents(&mut p, &[], 0.99, 1e-3).is_err());
    }

    #[test]
    fn positive_advantage_raises_probability() {
        let mut p = AgentPolicies::new(&AgentConfig::default(), 6);
        let obs = HeadObs::new(&sv(1.0), &[sv(0.0), sv(5.0), sv(-3.0)]);
        let before = softmax(&p.head_scores(&obs).unwrap())[1];
        let u = unit(obs.clone(), Action { head: 1, op: 2, tail: None }, 1.0);
        update_agents(&mut p, &[&u], 0.99, 1e-3).unwrap();
        assert!(softmax(&p.head_scores(&obs).unwrap())[1] > before);
    }

    #[test]
    fn bandit_learns_the_good_arm() {
        let mut p = AgentPolicies::new(&AgentConfig::default(), 7);
        let obs = HeadObs::new(&sv(0.5), &[sv(1.0), sv(-1.0)]);
        let mut rng = seed::rng(7, "bandit", 0);
        for _ in 0..500 {
            let arm = p.select_head(&obs, Mode::Sample, &mut rng).unwrap();
            let r = if arm == 0 { 1.0 } else { 0.0 };
            let u = unit(obs.clone(), Action { head: arm, op: 0, tail: None }, r);
            update_agents(&mut p, &[&u], 0.99, AgentConfig::default().lr).unwrap();
        }
        let prob = softmax(&p.head_scores(&obs).unwrap())[0];
        assert!(prob > 0.9, "good arm probability {prob}");
    }

    proptest! {
        #[test]
        fn shifting_scores_changes_nothing(scores in proptest::collection::vec(-5.0f64..5.0, 1..8), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            prop_assert_eq!(argmax(&scores), argmax(&shifted));
            for (a, b) in softmax(&scores).iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((softmax(&scores).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn epsilon_decreases_within_bounds(i in 0u64..100_000) {
            let cfg = RewardConfig::default();
            let (a, b) = (epsilon_at(&cfg, i), epsilon_at(&cfg, i + 1));
            prop_assert!(b < a || (a - cfg.eps_end).abs() < 1e-15);
            prop_assert!(a <= cfg.eps_start && a >= cfg.eps_end);
        }

        #[test]
        fn gating_is_monotone(
            perf in proptest::collection::vec(-1.0f64..1.0, 10..40),
            nov in proptest::collection::vec(0.0f64..5.0, 10..40),
            p in -1.0f64..1.0, n in 0.0f64..5.0, dp in 0.0f64..1.0, dn in 0.0f64..1.0,
            alpha in 0.0f64..100.0, beta in 0.0f64..100.0,
        ) {
            let gate = GateConfig { alpha, beta, min_history: 10 };
            if should_evaluate_downstream(p, n, &gate, &perf, &nov) {
                prop_assert!(should_evaluate_downstream(p + dp, n + dn, &gate, &perf, &nov));
            }
        }

        #[test]
        fn priorities_stay_positive(r in -10.0f64..10.0, v in -10.0f64..10.0, vn in -10.0f64..10.0) {
            prop_assert!(td_priority(r, 0.99, vn, v) > 0.0);
        }
    }
}
