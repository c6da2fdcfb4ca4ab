//! Experiment configuration, read from and written to TOML.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use metaplan_core::generators::TaskTemplate;
use metaplan_core::heuristics::HEURISTIC_NAMES;
use metaplan_core::par::Exec;
use metaplan_core::{EnvConfig, SearchLimits};
use metaplan_learn::itts::IttsConfig;
use metaplan_learn::supervised::SuperConfig;
use metaplan_learn::{stable_hash, MetaConfig, NetConfig};

use crate::{HarnessError, Result};

/// Learned heuristic trained on all candidates, skipping task selection.
pub const ABLATION: &str = "mrl_noitts";

/// Existing task directories to use instead of generating tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDirs {
    pub candidates: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub template: TaskTemplate,
    pub task_seed: u64,
    /// Candidate training tasks offered to task selection.
    pub candidates: usize,
    pub validation: usize,
    pub test: usize,
    /// One learning repetition per seed.
    pub seeds: Vec<u64>,
    pub heuristics: Vec<String>,
    /// Run independent jobs on the thread pool. Results do not depend on it.
    pub parallel: bool,
    /// Fill the `seconds` column of metrics.csv. Leave off for byte-stable output.
    pub record_timing: bool,
    pub oracle_state_cap: usize,
    pub limits: SearchLimits,
    /// Extra random training tasks for the supervised task-addition study.
    pub additions: Vec<usize>,
    pub task_dirs: Option<TaskDirs>,
    /// Shared by every training stage; overrides `meta.env` and `itts.training.env`.
    pub env: EnvConfig,
    pub meta: MetaConfig,
    pub itts: IttsConfig,
    pub supervised: SuperConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk("gripper").expect("gripper is a known domain")
    }
}

impl ExperimentConfig {
    /// Desk-scale settings for one of the bundled domains.
    pub fn desk(domain: &str) -> Option<Self> {
        let template = TaskTemplate::standard(domain)?;
        let mut meta = MetaConfig {
            net: NetConfig { hidden: 32, dense: 32 },
            iterations: 400,
            trials_per_iteration: 16,
            episodes_per_task: 2,
            eval_every: 10,
            ..MetaConfig::default()
        };
        meta.ppo.entropy_coef = 0.05;
        let mut itts = IttsConfig::default();
        itts.training.net = NetConfig { hidden: 32, dense: 32 };
        itts.training.iterations = 100;
        Some(ExperimentConfig {
            name: format!("{domain}-desk"),
            template,
            task_seed: 0,
            candidates: 16,
            validation: 5,
            test: 10,
            seeds: (0..5).collect(),
            heuristics: ["blind", "goalcount", "hmax", "hadd", "super", "mrl", ABLATION].map(String::from).to_vec(),
            parallel: true,
            record_timing: false,
            oracle_state_cap: 200_000,
            limits: SearchLimits { max_expansions: 200_000, max_seconds: 120.0 },
            additions: vec![0, 8, 16],
            task_dirs: None,
            env: EnvConfig::default(),
            meta,
            itts,
            supervised: SuperConfig::default(),
        })
    }

    /// Minutes-scale run on two-ball Gripper, for smoke tests.
    pub fn smoke() -> Self {
        let mut cfg = Self::desk("gripper").expect("gripper is a known domain");
        cfg.name = "gripper-smoke".into();
        cfg.template = TaskTemplate::Gripper { rooms: 2, balls: 2 };
        cfg.candidates = 5;
        cfg.validation = 2;
        cfg.test = 3;
        cfg.seeds = vec![0, 1];
        cfg.parallel = false;
        cfg.additions = vec![0, 2];
        cfg.meta.net = NetConfig { hidden: 8, dense: 8 };
        cfg.meta.iterations = 6;
        cfg.meta.trials_per_iteration = 4;
        cfg.meta.eval_every = 3;
        cfg.itts.training.net = NetConfig { hidden: 8, dense: 8 };
        cfg.itts.training.iterations = 6;
        cfg.itts.transfer_episodes = 2;
        cfg.itts.on_policy_states = 5;
        cfg.itts.random_walk_states = 5;
        cfg.itts.relevance_states = 5;
        cfg.itts.epsilon_diff = 0.0;
        cfg.supervised.widths = vec![8];
        cfg.supervised.depths = vec![1];
        cfg.supervised.learning_rates = vec![1e-2];
        cfg.supervised.epochs = 20;
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Content hash used to refuse resuming a run under a different config.
    pub fn fingerprint(&self) -> u64 {
        stable_hash(self.to_toml().as_bytes())
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    /// Copy of the config with the shared env and execution mode pushed into
    /// every stage config.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        let exec = self.exec();
        cfg.meta.env = self.env.clone();
        cfg.meta.exec = exec;
        cfg.itts.training.env = self.env.clone();
        cfg.itts.training.exec = exec;
        cfg.supervised.exec = exec;
        cfg
    }

    pub fn wants(&self, heuristic: &str) -> bool {
        self.heuristics.iter().any(|h| h == heuristic)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.template.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.env.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.task_dirs.is_none() && (self.candidates == 0 || self.validation == 0 || self.test == 0) {
            return bad("candidates, validation and test counts must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        let mut seen = HashSet::new();
        for h in &self.heuristics {
            if !(HEURISTIC_NAMES.contains(&h.as_str()) || h == ABLATION) {
                return bad(format!("unknown heuristic `{h}`"));
            }
            if !seen.insert(h) {
                return bad(format!("heuristic `{h}` listed twice"));
            }
        }
        if !self.wants("blind") {
            return bad("the roster must include `blind`, the normalization baseline".into());
        }
        if !(self.itts.epsilon_diff >= 0.0) {
            return bad("itts.epsilon_diff must be >= 0".into());
        }
        if self.itts.transfer_episodes == 0 {
            return bad("itts.transfer_episodes must be >= 1".into());
        }
        for (name, ppo) in [("meta", &self.meta.ppo), ("itts.training", &self.itts.training.ppo)] {
            if !(ppo.clip_eps > 0.0) {
                return bad(format!("{name}.ppo.clip_eps must be > 0"));
            }
        }
        if self.meta.iterations == 0 || self.meta.trials_per_iteration == 0 || self.meta.episodes_per_task == 0 {
            return bad("meta iterations, trials and episodes must be positive".into());
        }
        if self.supervised.depths.is_empty() || self.supervised.widths.is_empty() || self.supervised.learning_rates.is_empty() {
            return bad("supervised grid must be nonempty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        for cfg in [ExperimentConfig::desk("blocksworld").unwrap(), ExperimentConfig::smoke()] {
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn partial_files_take_defaults() {
        let cfg = ExperimentConfig::from_toml("name = \"x\"\nseeds = [3]\n[template]\ndomain = \"ferry\"\ncars = 2\nlocations = 3\n").unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.template, TaskTemplate::Ferry { cars: 2, locations: 3 });
        assert_eq!(cfg.validation, 5);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let cases = [
            "heuristics = [\"lmcut\"]",
            "seeds = []",
            "seeds = [1, 1]",
            "unknown_key = 1",
            "[env]\ngamma = 2.0",
            "[meta.ppo]\nclip_eps = 0.0",
            "heuristics = [\"hmax\"]",
        ];
        for text in cases {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn resolved_shares_env() {
        let mut cfg = ExperimentConfig::smoke();
        cfg.env.gamma = 0.9;
        let r = cfg.resolved();
        assert_eq!(r.meta.env.gamma, 0.9);
        assert_eq!(r.itts.training.env.gamma, 0.9);
        assert_eq!(r.meta.exec, Exec::Sequential);
    }
}
