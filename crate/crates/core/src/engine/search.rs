use rand::Rng;

use super::{export, Method, RewardKind, RunConfig, RunOutcome, RunReport, StepTrace};
use crate::agents::{
    combine_pseudo, downstream_reward, epsilon_at, should_evaluate_downstream, update_agents, Action, AgentPolicies,
    HeadObs, MemoryUnit, Mode, NextStates, OpObs, PerfFlag, ReplayBuffer, TailObs,
};
use crate::dataset::{evaluate_downstream, make_folds, Dataset, DownstreamEvaluator};
use crate::predictor::{should_finetune, EvaluationComponents, SequenceRecord, Vocabulary};
use crate::representation::{
    discretize, incremental_cluster, rep_feature_set, ClusterSet, Discretized, MiTable, OpOneHot, StateVector,
};
use crate::transform::{
    cross_clusters, operation_by_id, prune_feature_set, sanitize_and_dedupe, Expr, FeatureSet, N_OPS,
};
use crate::{seed, Result};

/// Dataset-bound pieces shared by the search and the baselines.
pub(super) struct Env<'a> {
    pub dataset: &'a Dataset,
    pub cfg: &'a RunConfig,
    pub labels: Discretized,
    pub evaluator: DownstreamEvaluator,
    pub cap: usize,
}

/// Clusters and representations of the live feature set.
pub(super) struct Observation {
    pub clusters: ClusterSet,
    pub cluster_reps: Vec<StateVector>,
    pub overall: StateVector,
}

impl<'a> Env<'a> {
    pub fn new(dataset: &'a Dataset, cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let labels = if dataset.task().is_classification() {
            let idx: Vec<f64> = dataset.class_index().iter().map(|&c| c as f64).collect();
            discretize(&idx, dataset.n_classes().max(2))
        } else {
            discretize(dataset.label(), cfg.bins)
        };
        let folds = make_folds(dataset, cfg.folds, cfg.seed)?;
        let evaluator = DownstreamEvaluator::new(folds, cfg.forest, seed::derive(cfg.seed, "model", 0), cfg.exec);
        let cap = (cfg.feature_cap_multiplier * dataset.n_original_features()).max(1);
        Ok(Env {
            dataset,
            cfg,
            labels,
            evaluator,
            cap,
        })
    }

    /// Raw-feature score. Not counted as a step evaluation.
    pub fn baseline(&self) -> Result<f64> {
        let e = &self.evaluator;
        Ok(evaluate_downstream(self.dataset.columns(), self.dataset, &e.folds, &e.forest, e.model_seed, e.exec)?.score)
    }

    pub fn observe(&self, fs: &FeatureSet) -> Result<Observation> {
        let table = MiTable::compute(&fs.columns, &self.labels, self.cfg.bins, self.cfg.exec);
        let clusters = incremental_cluster(&table, self.cfg.cluster_threshold, self.cfg.varsigma);
        let cluster_reps = clusters
            .clusters
            .iter()
            .map(|c| rep_feature_set(&c.iter().map(|&i| &fs.columns[i]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Observation {
            overall: rep_feature_set(&fs.columns)?,
            clusters,
            cluster_reps,
        })
    }

    /// Applies `action` and returns the sanitized, pruned feature set and
    /// the number of generated columns that survived.
    pub fn cross(&self, fs: &FeatureSet, obs: &Observation, action: Action, step: usize) -> Result<(FeatureSet, usize)> {
        let op = operation_by_id(action.op).expect("op id from the policy");
        let members = |c: usize| -> Vec<(&[f64], &Expr)> {
            obs.clusters.clusters[c].iter().map(|&i| (fs.columns[i].as_slice(), &fs.exprs[i])).collect()
        };
        let head = members(action.head);
        let tail = action.tail.map(members);
        let generated = cross_clusters(&head, &op, tail.as_deref(), self.cfg.exec)?;
        let mut next = fs.clone();
        next.extend(generated, step + 1);
        let next = sanitize_and_dedupe(next);
        let next = prune_feature_set(next, &self.labels, self.cap, self.cfg.bins, self.cfg.exec)?;
        let survived = next.provenance.iter().filter(|&&p| p == step + 1).count();
        Ok((next, survived))
    }

    pub fn member_names(&self, fs: &FeatureSet, obs: &Observation, cluster: usize) -> Vec<String> {
        obs.clusters.clusters[cluster]
            .iter()
            .map(|&i| fs.exprs[i].to_infix(self.dataset.names()))
            .collect()
    }

    pub fn evaluate(&self, fs: &FeatureSet) -> Result<f64> {
        Ok(self.evaluator.evaluate(&fs.columns, self.dataset)?.score)
    }
}

/// Best downstream-evaluated feature set so far.
pub(super) struct Best {
    pub score: f64,
    pub features: Option<FeatureSet>,
}

impl Best {
    pub fn new() -> Self {
        Best {
            score: f64::NEG_INFINITY,
            features: None,
        }
    }

    pub fn offer(&mut self, score: f64, fs: &FeatureSet) {
        if score > self.score {
            self.score = score;
            self.features = Some(fs.clone());
        }
    }
}

pub(super) fn finish(
    env: &Env,
    method: Method,
    best: Best,
    baseline_score: f64,
    trace: Vec<StepTrace>,
    episode_best: Vec<f64>,
    post_cold_start: Option<(usize, usize)>,
    components: Option<EvaluationComponents>,
) -> Result<RunOutcome> {
    let best_features = best.features.unwrap_or_else(|| FeatureSet::from_dataset(env.dataset));
    let evaluated = trace.iter().filter(|t| t.evaluated).count();
    let total = trace.len();
    let post = post_cold_start.map_or(0.0, |(ev, n)| if n == 0 { 0.0 } else { ev as f64 / n as f64 });
    let mut top = export::feature_importance(&best_features, env.dataset, &env.cfg.forest, env.cfg.seed)?;
    top.truncate(10);
    let report = RunReport {
        method,
        metric: env.dataset.task().metric_name().to_string(),
        seed: env.cfg.seed,
        best_score: best.score,
        baseline_score,
        best_sequence: best_features.sequence().to_string(),
        best_feature_count: best_features.n_features(),
        total_steps: total,
        evaluated_steps: evaluated,
        eval_call_fraction: if total == 0 { 0.0 } else { evaluated as f64 / total as f64 },
        post_cold_start_eval_fraction: post,
        episode_best,
        top_features: top,
    };
    Ok(RunOutcome {
        report,
        trace,
        best_features,
        components,
    })
}

struct Selection {
    head_obs: HeadObs,
    op_obs: OpObs,
    tail_obs: Option<TailObs>,
    action: Action,
}

fn select(policies: &AgentPolicies, obs: &Observation, rng: &mut impl Rng) -> Result<Selection> {
    let head_obs = HeadObs::new(&obs.overall, &obs.cluster_reps);
    let head = policies.select_head(&head_obs, Mode::Sample, rng)?;
    let op_obs = OpObs::new(&obs.cluster_reps[head], &obs.overall);
    let op = policies.select_operation(&op_obs, Mode::Sample, rng)?;
    let (tail_obs, tail) = if operation_by_id(op).expect("policy op id").is_binary() {
        let onehot = OpOneHot::new(op, N_OPS)?;
        let t_obs = TailObs::new(&obs.cluster_reps[head], &obs.overall, &onehot, &obs.cluster_reps);
        let t = policies.select_tail(&t_obs, Mode::Sample, rng)?;
        (Some(t_obs), Some(t))
    } else {
        (None, None)
    };
    Ok(Selection {
        head_obs,
        op_obs,
        tail_obs,
        action: Action { head, op, tail },
    })
}

/// Cold start with every step evaluated, then exploration where the
/// evaluation components supply pseudo-rewards and gate real evaluations.
pub fn run(config: &RunConfig, dataset: &Dataset) -> Result<RunOutcome> {
    let env = Env::new(dataset, config)?;
    let cfg = config;
    let gamma = cfg.reward.gamma;
    let baseline_score = env.baseline()?;
    let original = FeatureSet::from_dataset(dataset);
    let original_seq = original.sequence();

    let mut policies = AgentPolicies::new(&cfg.agent, seed::derive(cfg.seed, "agents", 0));
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut components = EvaluationComponents::new(
        Vocabulary::new(dataset.n_original_features()),
        cfg.predictor.clone(),
        seed::derive(cfg.seed, "components", 0),
    );
    let mut records: Vec<SequenceRecord> = Vec::new();
    let mut perf_history: Vec<f64> = Vec::new();
    let mut novelty_history: Vec<f64> = Vec::new();
    let mut best = Best::new();
    let mut trace = Vec::with_capacity(cfg.total_steps());
    let mut episode_best = Vec::with_capacity(cfg.episodes);
    let (mut post_evaluated, mut post_steps) = (0usize, 0usize);
    let mut g = 0usize;

    for episode in 0..cfg.episodes {
        let cold = episode < cfg.cold_start_episodes;
        let mut fs = original.clone();
        let mut prev_true = Some(baseline_score);
        let mut prev_phi = if cold { 0.0 } else { components.predictor.predict(&original_seq)?.clamp(0.0, 1.0) };
        let mut pending: Option<MemoryUnit> = None;

        for step in 0..cfg.steps_per_episode {
            let obs = env.observe(&fs)?;
            let mut rng = seed::rng(cfg.seed, "policy", g as u64);
            let sel = select(&policies, &obs, &mut rng)?;
            if let Some(mut unit) = pending.take() {
                unit.next = Some(NextStates {
                    head: sel.head_obs.critic_state().to_vec(),
                    op: sel.op_obs.critic_state().to_vec(),
                    tail: sel.tail_obs.as_ref().map(|t| t.critic_state().to_vec()),
                });
                unit.next_action = Some(sel.action);
                buffer.push_memory(unit, &policies, gamma)?;
            }

            let (next_fs, new_count) = env.cross(&fs, &obs, sel.action, step)?;
            let seq = next_fs.sequence();

            let (reward, kind, pseudo_perf, novelty, true_perf);
            if cold {
                let t = env.evaluate(&next_fs)?;
                reward = downstream_reward(t, prev_true.unwrap_or(baseline_score));
                kind = RewardKind::Downstream;
                (pseudo_perf, novelty, true_perf) = (None, None, Some(t));
                records.push(SequenceRecord {
                    sequence: seq.clone(),
                    performance: t,
                    step: g,
                });
            } else {
                let phi = components.predictor.predict(&seq)?.clamp(0.0, 1.0);
                let nov = components.novelty.novelty_score(&seq)?;
                let gate = should_evaluate_downstream(phi, nov, &cfg.gate, &perf_history, &novelty_history);
                perf_history.push(phi);
                novelty_history.push(nov);
                if gate || phi > best.score {
                    let t = env.evaluate(&next_fs)?;
                    reward = downstream_reward(t, prev_true.unwrap_or(prev_phi));
                    kind = RewardKind::Downstream;
                    true_perf = Some(t);
                    post_evaluated += 1;
                } else {
                    reward = combine_pseudo(phi, prev_phi, nov, epsilon_at(&cfg.reward, g as u64));
                    kind = RewardKind::Pseudo;
                    true_perf = None;
                }
                post_steps += 1;
                (pseudo_perf, novelty) = (Some(phi), Some(nov));
                prev_phi = phi;
            }
            prev_true = true_perf;
            if let Some(t) = true_perf {
                best.offer(t, &next_fs);
            }

            pending = Some(MemoryUnit {
                head: sel.head_obs,
                op: sel.op_obs,
                tail: sel.tail_obs,
                action: sel.action,
                reward,
                next: None,
                next_action: None,
                sequence: seq.clone(),
                performance: true_perf.or(pseudo_perf).unwrap_or(0.0),
                flag: if true_perf.is_some() { PerfFlag::Downstream } else { PerfFlag::Estimated },
            });
            if !buffer.is_empty() {
                let mut rng = seed::rng(cfg.seed, "replay", g as u64);
                let batch = buffer.sample_batch(cfg.agent.batch_size, &mut rng)?;
                update_agents(&mut policies, &batch, gamma, cfg.agent.lr)?;
            }

            trace.push(StepTrace {
                episode,
                step,
                global_step: g,
                head: env.member_names(&fs, &obs, sel.action.head),
                op: operation_by_id(sel.action.op).expect("policy op id").name.to_string(),
                tail: sel.action.tail.map(|t| env.member_names(&fs, &obs, t)),
                new_feature_count: new_count,
                reward,
                reward_kind: kind,
                pseudo_perf,
                novelty,
                evaluated: true_perf.is_some(),
                true_perf,
                live_feature_count: next_fs.n_features(),
                sequence_line: seq.to_string(),
            });
            fs = next_fs;
            g += 1;
        }
        if let Some(unit) = pending.take() {
            buffer.push_memory(unit, &policies, gamma)?;
        }

        let done = episode + 1;
        if done == cfg.cold_start_episodes {
            components.fit_cold_start(&records, cfg.exec)?;
        } else if done > cfg.cold_start_episodes && done < cfg.episodes && should_finetune(done, cfg.refit_every) {
            let mut rng = seed::rng(cfg.seed, "finetune", done as u64);
            let mut picked = buffer.sample_indices(buffer.capacity(), &mut rng)?;
            picked.sort_unstable();
            picked.dedup();
            let units: Vec<_> = buffer.units().collect();
            let samples: Vec<_> = picked
                .iter()
                .map(|&i| (&units[i].sequence, (units[i].flag == PerfFlag::Downstream).then_some(units[i].performance)))
                .collect();
            components.finetune(&samples, cfg.exec)?;
        }
        episode_best.push(best.score);
    }

    finish(
        &env,
        Method::Fastft,
        best,
        baseline_score,
        trace,
        episode_best,
        Some((post_evaluated, post_steps)),
        Some(components),
    )
}
