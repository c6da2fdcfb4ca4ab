//! RL² meta-training loop and greedy evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use metaplan_core::par::Exec;
use metaplan_core::search::bfs_oracle;
use metaplan_core::{EnvConfig, GroundTask};

use crate::agent::{AgentParams, NetConfig, ObsLayout};
use crate::ppo::{ppo_epoch, prepare, Optimizers, PpoConfig};
use crate::rollout::{run_trial, ActionMode, Guidance, Trial, TrialSpec};
use crate::{derive_seed, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    pub net: NetConfig,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub iterations: usize,
    /// Tasks sampled (one trial each) per iteration.
    pub trials_per_iteration: usize,
    pub episodes_per_task: usize,
    pub reset_each_episode: bool,
    /// Greedy validation every this many iterations (and after the last).
    /// Zero disables validation and returns the final parameters.
    pub eval_every: usize,
    pub guidance: Guidance,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            net: NetConfig::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            iterations: 300,
            trials_per_iteration: 16,
            episodes_per_task: 2,
            reset_each_episode: false,
            eval_every: 10,
            guidance: Guidance::Critic,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Greedy validation return; NaN on iterations without validation.
    pub validation_return: f64,
}

pub const PROGRESS_HEADER: &str = "iteration,mean_return,policy_loss,value_loss,entropy,validation_return";

impl ProgressRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.mean_return, self.policy_loss, self.value_loss, self.entropy, self.validation_return
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Best parameters by validation return (final parameters when validation
    /// is disabled), rounded to checkpoint precision.
    pub params: AgentParams,
    pub best_iteration: usize,
    /// `None` when validation is disabled.
    pub best_validation: Option<EvalSummary>,
    pub progress: Vec<ProgressRow>,
}

/// A task together with its optimal plan cost.
#[derive(Debug, Clone, Copy)]
pub struct TaskRef<'a> {
    pub task: &'a GroundTask,
    pub optimal_cost: f64,
}

/// Pairs tasks with optimal costs from exhaustive search.
pub fn with_optimal_costs<'a>(tasks: &[&'a GroundTask], exec: Exec) -> Result<Vec<TaskRef<'a>>, LearnError> {
    let costs = exec.map(tasks, |t| bfs_oracle(t, 1_000_000).map(|o| o.optimal_cost));
    tasks
        .iter()
        .zip(costs)
        .map(|(&task, c)| {
            let optimal_cost = c.map_err(|e| LearnError::Invalid(format!("optimal cost of {}: {e}", task.name())))?;
            Ok(TaskRef { task, optimal_cost })
        })
        .collect()
}

fn check_tasks(tasks: &[TaskRef<'_>], layout: ObsLayout) -> Result<(), LearnError> {
    for t in tasks {
        layout.check(t.task)?;
    }
    Ok(())
}

/// Meta-trains fresh parameters on `tasks`; validation uses `validation`, or
/// the training tasks when it is empty.
pub fn meta_train(tasks: &[TaskRef<'_>], validation: &[TaskRef<'_>], cfg: &MetaConfig) -> Result<TrainReport, LearnError> {
    let first = tasks.first().ok_or_else(|| LearnError::Invalid("meta_train needs at least one task".into()))?;
    let layout = ObsLayout::for_task(first.task, cfg.env.goal_features);
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0, u64::MAX));
    let params = AgentParams::new(layout, cfg.net, &mut init_rng);
    continue_training(params, tasks, validation, cfg)
}

/// Trains `params` further with fresh optimizer state.
pub fn continue_training(mut params: AgentParams, tasks: &[TaskRef<'_>], validation: &[TaskRef<'_>], cfg: &MetaConfig) -> Result<TrainReport, LearnError> {
    if tasks.is_empty() {
        return Err(LearnError::Invalid("meta_train needs at least one task".into()));
    }
    cfg.env.validate()?;
    check_tasks(tasks, params.layout)?;
    check_tasks(validation, params.layout)?;
    let validation = if validation.is_empty() { tasks } else { validation };
    let mut opt = Optimizers::new(&params, cfg.ppo.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut progress = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(f64, usize, AgentParams, EvalSummary)> = None;
    let validate = cfg.eval_every > 0;

    for iteration in 0..=cfg.iterations {
        let is_eval = validate && (iteration % cfg.eval_every == 0 || iteration == cfg.iterations);
        let mut row = ProgressRow { iteration, mean_return: f64::NAN, policy_loss: 0.0, value_loss: 0.0, entropy: 0.0, validation_return: f64::NAN };
        if is_eval {
            let q = params.quantized();
            let summary = evaluate_greedy(&q, validation, &cfg.env, cfg.episodes_per_task, cfg.reset_each_episode, cfg.guidance, cfg.exec)?;
            row.validation_return = summary.mean_return;
            let score = summary.mean_return;
            if best.as_ref().is_none_or(|b| score >= b.0) {
                best = Some((score, iteration, q, summary));
            }
        }
        if iteration == cfg.iterations {
            progress.push(row);
            break;
        }
        let picks: Vec<usize> = (0..cfg.trials_per_iteration).map(|_| rng.gen_range(0..tasks.len())).collect();
        let seeds: Vec<(usize, u64)> = picks.iter().enumerate().map(|(k, &i)| (i, derive_seed(cfg.seed, iteration as u64, k as u64))).collect();
        let snapshot = &params;
        let trials: Vec<Trial> = cfg
            .exec
            .map(&seeds, |&(i, seed)| {
                let spec = TrialSpec {
                    task_index: i,
                    task: tasks[i].task,
                    optimal_cost: tasks[i].optimal_cost,
                    episodes: cfg.episodes_per_task,
                    reset_each_episode: cfg.reset_each_episode,
                };
                run_trial(snapshot, spec, &cfg.env, ActionMode::Sample, &mut ChaCha8Rng::seed_from_u64(seed))
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
        let returns: Vec<f64> = trials.iter().flat_map(|t| t.episode_returns.iter().copied()).collect();
        row.mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
        let batches = prepare(&trials, cfg.env.gamma, &cfg.ppo);
        let mut order: Vec<usize> = (0..batches.len()).collect();
        let mut n = 0.0;
        for _ in 0..cfg.ppo.epochs {
            order.shuffle(&mut rng);
            let s = ppo_epoch(&mut params, &mut opt, &batches, &order, &cfg.ppo, cfg.exec);
            row.policy_loss += s.policy_loss;
            row.value_loss += s.value_loss;
            row.entropy += s.entropy;
            n += 1.0;
        }
        if n > 0.0 {
            row.policy_loss /= n;
            row.value_loss /= n;
            row.entropy /= n;
        }
        log::debug!("iter {iteration}: return {:.3} entropy {:.3}", row.mean_return, row.entropy);
        progress.push(row);
    }
    let (best_iteration, params, best_validation) = match best {
        Some((_, i, p, v)) => (i, p, Some(v)),
        None => (cfg.iterations, params.quantized(), None),
    };
    Ok(TrainReport { params, best_iteration, best_validation, progress })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskEval {
    pub task: String,
    pub optimal_cost: f64,
    pub optimal_return: f64,
    pub returns: Vec<f64>,
    pub goals: Vec<bool>,
    pub lengths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub goal_rate: f64,
    pub mean_return: f64,
    pub mean_optimal_return: f64,
    pub per_task: Vec<TaskEval>,
}

impl EvalSummary {
    /// Mean greedy return over mean optimal return.
    pub fn return_ratio(&self) -> f64 {
        self.mean_return / self.mean_optimal_return
    }
}

/// Greedy trials (memory persisting across the episodes of each task).
pub fn evaluate_greedy(
    params: &AgentParams,
    tasks: &[TaskRef<'_>],
    env: &EnvConfig,
    episodes: usize,
    reset_each_episode: bool,
    guidance: Guidance,
    exec: Exec,
) -> Result<EvalSummary, LearnError> {
    let idx: Vec<usize> = (0..tasks.len()).collect();
    let per_task: Vec<TaskEval> = exec
        .map(&idx, |&i| {
            let t = tasks[i];
            let spec = TrialSpec { task_index: i, task: t.task, optimal_cost: t.optimal_cost, episodes, reset_each_episode };
            // greedy trials draw no random numbers
            let trial = run_trial(params, spec, env, ActionMode::Greedy(guidance), &mut ChaCha8Rng::seed_from_u64(0))?;
            Ok(TaskEval {
                task: t.task.name().to_string(),
                optimal_cost: t.optimal_cost,
                optimal_return: env.solved_return(t.optimal_cost.round() as usize),
                returns: trial.episode_returns,
                goals: trial.episode_goal,
                lengths: trial.episode_lengths,
            })
        })
        .into_iter()
        .collect::<Result<_, LearnError>>()?;
    let episodes_total: usize = per_task.iter().map(|t| t.returns.len()).sum();
    let goals = per_task.iter().flat_map(|t| &t.goals).filter(|&&g| g).count();
    let mean_return = per_task.iter().flat_map(|t| &t.returns).sum::<f64>() / episodes_total.max(1) as f64;
    let mean_optimal_return = per_task.iter().map(|t| t.optimal_return * t.returns.len() as f64).sum::<f64>() / episodes_total.max(1) as f64;
    Ok(EvalSummary {
        episodes: episodes_total,
        goal_rate: goals as f64 / episodes_total.max(1) as f64,
        mean_return,
        mean_optimal_return,
        per_task,
    })
}
