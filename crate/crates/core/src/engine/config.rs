use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, GateConfig, RewardConfig};
use crate::dataset::{ForestConfig, Task};
use crate::exec::Exec;
use crate::predictor::PredictorConfig;
use crate::representation::DEFAULT_BINS;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub cold_start_episodes: usize,
    pub refit_every: usize,
    pub gate: GateConfig,
    pub reward: RewardConfig,
    pub buffer_capacity: usize,
    pub cluster_threshold: f64,
    pub varsigma: f64,
    pub feature_cap_multiplier: usize,
    pub bins: usize,
    pub folds: usize,
    pub forest: ForestConfig,
    pub predictor: PredictorConfig,
    pub agent: AgentConfig,
    pub seed: u64,
    pub task: Option<Task>,
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            episodes: 200,
            steps_per_episode: 15,
            cold_start_episodes: 10,
            refit_every: 5,
            gate: GateConfig::default(),
            reward: RewardConfig::default(),
            buffer_capacity: 16,
            cluster_threshold: 0.5,
            varsigma: 1e-6,
            feature_cap_multiplier: 4,
            bins: DEFAULT_BINS,
            folds: 5,
            forest: ForestConfig::default(),
            predictor: PredictorConfig::default(),
            agent: AgentConfig::default(),
            seed: 42,
            task: None,
            output_dir: None,
            exec: Exec::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn total_steps(&self) -> usize {
        self.episodes * self.steps_per_episode
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("episodes", self.episodes),
            ("steps_per_episode", self.steps_per_episode),
            ("cold_start_episodes", self.cold_start_episodes),
            ("refit_every", self.refit_every),
            ("buffer_capacity", self.buffer_capacity),
            ("feature_cap_multiplier", self.feature_cap_multiplier),
            ("folds", self.folds),
            ("n_trees", self.forest.n_trees),
            ("batch_size", self.agent.batch_size),
            ("predictor batch_size", self.predictor.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.cold_start_episodes > self.episodes {
            return Err(Error::Config("cold_start_episodes cannot exceed episodes".into()));
        }
        if self.bins < 2 {
            return Err(Error::Config("bins must be at least 2".into()));
        }
        if !(self.cluster_threshold >= 0.0) {
            return Err(Error::Config("cluster_threshold must be non-negative".into()));
        }
        if !(self.varsigma > 0.0 && self.varsigma.is_finite()) {
            return Err(Error::Config("varsigma must be positive".into()));
        }
        self.gate.validate()?;
        self.reward.validate()
    }

    /// Sets one field from its `key=value` spelling. Hyphens and
    /// underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "episodes" => self.episodes = parse(&key, v)?,
            "steps" | "steps_per_episode" => self.steps_per_episode = parse(&key, v)?,
            "cold_start" | "cold_start_episodes" => self.cold_start_episodes = parse(&key, v)?,
            "refit_every" => self.refit_every = parse(&key, v)?,
            "alpha" => self.gate.alpha = parse(&key, v)?,
            "beta" => self.gate.beta = parse(&key, v)?,
            "min_history" => self.gate.min_history = parse(&key, v)?,
            "eps_start" => self.reward.eps_start = parse(&key, v)?,
            "eps_end" => self.reward.eps_end = parse(&key, v)?,
            "decay" => self.reward.decay = parse(&key, v)?,
            "gamma" => self.reward.gamma = parse(&key, v)?,
            "buffer" | "buffer_capacity" => self.buffer_capacity = parse(&key, v)?,
            "cluster_threshold" => self.cluster_threshold = parse(&key, v)?,
            "varsigma" => self.varsigma = parse(&key, v)?,
            "feature_cap_multiplier" => self.feature_cap_multiplier = parse(&key, v)?,
            "bins" => self.bins = parse(&key, v)?,
            "folds" => self.folds = parse(&key, v)?,
            "n_trees" => self.forest.n_trees = parse(&key, v)?,
            "max_depth" => self.forest.max_depth = parse(&key, v)?,
            "min_samples_split" => self.forest.min_samples_split = parse(&key, v)?,
            "predictor_lr" => self.predictor.lr = parse(&key, v)?,
            "novelty_lr" => self.predictor.novelty_lr = parse(&key, v)?,
            "cold_start_epochs" => self.predictor.cold_start_epochs = parse(&key, v)?,
            "finetune_epochs" => self.predictor.finetune_epochs = parse(&key, v)?,
            "max_tokens" => self.predictor.max_tokens = parse(&key, v)?,
            "predictor_batch_size" => self.predictor.batch_size = parse(&key, v)?,
            "unsquared_novelty" => self.predictor.unsquared_novelty = parse(&key, v)?,
            "agent_lr" => self.agent.lr = parse(&key, v)?,
            "agent_hidden" => self.agent.hidden = parse(&key, v)?,
            "batch_size" => self.agent.batch_size = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "task" => self.task = Some(parse(&key, v)?),
            "out" | "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_kv_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_kv_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_setup() {
        let c = RunConfig::default();
        assert_eq!((c.episodes, c.steps_per_episode, c.cold_start_episodes, c.refit_every), (200, 15, 10, 5));
        assert_eq!((c.gate.alpha, c.gate.beta, c.buffer_capacity), (10.0, 5.0, 16));
        assert_eq!(c.total_steps(), 3000);
        c.validate().unwrap();
    }

    #[test]
    fn key_value_overrides() {
        let mut c = RunConfig::default();
        c.apply_kv_str("# desk run\nepisodes = 30\nsteps=10\ncold-start=5\nalpha=100\ntask=regression\n\n").unwrap();
        assert_eq!((c.episodes, c.steps_per_episode, c.cold_start_episodes), (30, 10, 5));
        assert_eq!(c.gate.alpha, 100.0);
        assert_eq!(c.task, Some(Task::Regression));
        assert!(c.apply_kv_str("bogus=1").is_err());
        assert!(c.apply_kv_str("episodes").is_err());
        assert!(c.apply_kv_str("episodes=-3").is_err());
    }

    #[test]
    fn validation_rejects_inconsistent_counts() {
        let c = RunConfig { cold_start_episodes: 20, episodes: 10, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { steps_per_episode: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.gate.alpha = 120.0;
        assert!(c.validate().is_err());
    }
}
