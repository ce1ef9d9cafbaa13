use rand::Rng;

use super::search::{finish, Best, Env};
use super::{Method, RewardKind, RunConfig, RunOutcome, StepTrace};
use crate::agents::{downstream_reward, Action};
use crate::dataset::Dataset;
use crate::transform::{
    apply_operation, default_operation_set, operation_by_id, prune_feature_set, sanitize_and_dedupe, Expr, FeatureSet,
    N_OPS,
};
use crate::{seed, Result};

/// Uniform head, operation and (for binary operations) tail for global step `g`.
fn random_action(run_seed: u64, g: usize, n_clusters: usize) -> Action {
    let mut rng = seed::rng(run_seed, "rfg", g as u64);
    let head = rng.random_range(0..n_clusters);
    let op = rng.random_range(0..N_OPS);
    let binary = operation_by_id(op).expect("op id in range").is_binary();
    let tail = binary.then(|| rng.random_range(0..n_clusters));
    Action { head, op, tail }
}

/// Random feature generation: the search loop's step budget with uniformly
/// random head, operation and tail, evaluating every step.
pub fn run_baseline_rfg(config: &RunConfig, dataset: &Dataset) -> Result<RunOutcome> {
    let env = Env::new(dataset, config)?;
    let baseline_score = env.baseline()?;
    let original = FeatureSet::from_dataset(dataset);
    let mut best = Best::new();
    let mut trace = Vec::with_capacity(config.total_steps());
    let mut episode_best = Vec::with_capacity(config.episodes);
    let mut g = 0usize;
    for episode in 0..config.episodes {
        let mut fs = original.clone();
        let mut prev = baseline_score;
        for step in 0..config.steps_per_episode {
            let obs = env.observe(&fs)?;
            let action = random_action(config.seed, g, obs.clusters.len());
            let Action { head, op, tail } = action;
            let (next_fs, new_count) = env.cross(&fs, &obs, action, step)?;
            let t = env.evaluate(&next_fs)?;
            best.offer(t, &next_fs);
            let reward = downstream_reward(t, prev);
            prev = t;
            trace.push(StepTrace {
                episode,
                step,
                global_step: g,
                head: env.member_names(&fs, &obs, head),
                op: operation_by_id(op).expect("op id in range").name.to_string(),
                tail: tail.map(|c| env.member_names(&fs, &obs, c)),
                new_feature_count: new_count,
                reward,
                reward_kind: RewardKind::Downstream,
                pseudo_perf: None,
                novelty: None,
                evaluated: true,
                true_perf: Some(t),
                live_feature_count: next_fs.n_features(),
                sequence_line: next_fs.sequence().to_string(),
            });
            fs = next_fs;
            g += 1;
        }
        episode_best.push(best.score);
    }
    finish(&env, Method::Rfg, best, baseline_score, trace, episode_best, None, None)
}

/// All unary operations on every original feature and all binary
/// operations on every ordered pair, pruned to the cap, evaluated once.
pub fn run_baseline_erg(config: &RunConfig, dataset: &Dataset) -> Result<RunOutcome> {
    let env = Env::new(dataset, config)?;
    let baseline_score = env.baseline()?;
    let mut fs = FeatureSet::from_dataset(dataset);
    let m = dataset.n_original_features();
    let originals: Vec<Expr> = (0..m).map(Expr::feature).collect();
    let mut generated = Vec::new();
    for op in default_operation_set() {
        for a in 0..m {
            if op.is_binary() {
                for b in 0..m {
                    let col = apply_operation(&op, dataset.column(a), Some(dataset.column(b)))?;
                    generated.push((col, Expr::apply(&op, &originals[a], Some(&originals[b]))));
                }
            } else {
                let col = apply_operation(&op, dataset.column(a), None)?;
                generated.push((col, Expr::apply(&op, &originals[a], None)));
            }
        }
    }
    let candidates = generated.len();
    fs.extend(generated, 1);
    let fs = sanitize_and_dedupe(fs);
    let fs = prune_feature_set(fs, &env.labels, env.cap, config.bins, config.exec)?;
    let t = env.evaluate(&fs)?;
    let mut best = Best::new();
    best.offer(t, &fs);
    let trace = vec![StepTrace {
        episode: 0,
        step: 0,
        global_step: 0,
        head: dataset.names().to_vec(),
        op: "all".to_string(),
        tail: Some(dataset.names().to_vec()),
        new_feature_count: candidates,
        reward: downstream_reward(t, baseline_score),
        reward_kind: RewardKind::Downstream,
        pseudo_perf: None,
        novelty: None,
        evaluated: true,
        true_perf: Some(t),
        live_feature_count: fs.n_features(),
        sequence_line: fs.sequence().to_string(),
    }];
    finish(&env, Method::Erg, best, baseline_score, trace, vec![t], None, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_actions_are_uniform_over_operations_and_clusters() {
        let mut ops = [0usize; N_OPS];
        let mut heads = [0usize; 3];
        for g in 0..10_000 {
            let a = random_action(11, g, 3);
            ops[a.op] += 1;
            heads[a.head] += 1;
            assert_eq!(a.tail.is_some(), operation_by_id(a.op).unwrap().is_binary());
        }
        for c in ops {
            assert!((c as f64 / 10_000.0 - 1.0 / N_OPS as f64).abs() <= 0.03, "{ops:?}");
        }
        for c in heads {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() <= 0.03, "{heads:?}");
        }
        assert_eq!(random_action(11, 5, 3), random_action(11, 5, 3));
    }
}
