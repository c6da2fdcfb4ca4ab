//! Information-theoretic task selection: keep candidates whose single-task
//! policies differ from every already selected one (average KL on sampled
//! validation states) and that transfer usefully to some validation task
//! (entropy reduction after a short fine-tuning).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use metaplan_core::generators::identity_key;
use metaplan_core::{ActionId, EnvConfig, GroundTask, PlanningEnv, State};
use metaplan_nn::policy::{entropy, kl_divergence, masked_softmax};

use crate::agent::AgentParams;
use crate::meta::{continue_training, meta_train, MetaConfig, TaskRef};
use crate::rollout::{run_trial, ActionMode, Guidance, TrialSpec};
use crate::{derive_seed, stable_hash, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IttsConfig {
    /// Minimum policy difference δ to every selected task.
    pub epsilon_diff: f64,
    /// Fine-tuning episodes `l` used by the relevance measure.
    pub transfer_episodes: usize,
    /// On-policy states sampled per validation task.
    pub on_policy_states: usize,
    /// Random-walk states sampled per validation task.
    pub random_walk_states: usize,
    /// States drawn from the fine-tuned policy for the relevance measure.
    pub relevance_states: usize,
    /// Greedy return a single-task policy must reach, as a fraction of optimal.
    pub convergence_ratio: f64,
    /// Draw relevance states before fine-tuning instead of after.
    pub sample_before_transfer: bool,
    /// Training setup for single-task policies and fine-tuning.
    pub training: MetaConfig,
    pub seed: u64,
}

impl Default for IttsConfig {
    fn default() -> Self {
        let training = MetaConfig {
            iterations: 150,
            trials_per_iteration: 8,
            episodes_per_task: 1,
            guidance: Guidance::Actor,
            ..MetaConfig::default()
        };
        IttsConfig {
            epsilon_diff: 0.05,
            transfer_episodes: 10,
            on_policy_states: 50,
            random_walk_states: 50,
            relevance_states: 50,
            convergence_ratio: 0.95,
            sample_before_transfer: false,
            training,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskPolicy {
    pub params: AgentParams,
    pub converged: bool,
    pub greedy_return: f64,
    pub optimal_return: f64,
}

/// Training seed determined by task content, so identical tasks get identical policies.
pub fn task_seed(task: &GroundTask, seed: u64) -> u64 {
    derive_seed(seed, stable_hash(identity_key(task).as_bytes()), task.num_actions() as u64)
}

fn reaches(ret: f64, optimal: f64, ratio: f64) -> bool {
    ret >= optimal - (1.0 - ratio) * optimal.abs() - 1e-9
}

/// Plain recurrent PPO on each task alone; policies missing the convergence
/// ratio are flagged.
pub fn train_single_task_policies(tasks: &[TaskRef<'_>], cfg: &IttsConfig) -> Result<Vec<TaskPolicy>, LearnError> {
    let idx: Vec<usize> = (0..tasks.len()).collect();
    cfg.training
        .exec
        .map(&idx, |&i| {
            let t = tasks[i];
            let train = MetaConfig { seed: task_seed(t.task, cfg.seed), ..cfg.training.clone() };
            let report = meta_train(&[t], &[], &train)?;
            let eval = report.best_validation.expect("single-task training validates");
            let converged = reaches(eval.mean_return, eval.mean_optimal_return, cfg.convergence_ratio);
            if !converged {
                log::info!("policy for {} unconverged: {:.2} vs optimal {:.2}", t.task.name(), eval.mean_return, eval.mean_optimal_return);
            }
            Ok(TaskPolicy { params: report.params, converged, greedy_return: eval.mean_return, optimal_return: eval.mean_optimal_return })
        })
        .into_iter()
        .collect()
}

/// A state reached in a validation task, with the action prefix (from the
/// initial state, fresh memory) that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledState {
    pub validation: usize,
    pub prefix: Vec<ActionId>,
    #[serde(skip)]
    pub state: State,
    pub on_policy: bool,
}

#[derive(Debug, Clone, Default)]
pub struct StateSample {
    pub states: Vec<SampledState>,
}

/// Decision states along sampled episodes of `params` on `task`.
fn on_policy_states(params: &AgentParams, task: TaskRef<'_>, env: &EnvConfig, n: usize, validation: usize, seed: u64) -> Result<Vec<SampledState>, LearnError> {
    let mut out = Vec::with_capacity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while out.len() < n && attempts < 10 * n.max(1) {
        attempts += 1;
        let spec = TrialSpec { task_index: validation, task: task.task, optimal_cost: task.optimal_cost, episodes: 1, reset_each_episode: true };
        let trial = run_trial(params, spec, env, ActionMode::Sample, &mut rng)?;
        let mut s = task.task.init().clone();
        let mut prefix = Vec::new();
        for step in trial.steps.iter().filter(|s| s.is_action()) {
            if out.len() == n {
                break;
            }
            out.push(SampledState { validation, prefix: prefix.clone(), state: s.clone(), on_policy: true });
            let a = step.action.unwrap();
            s = task.task.successor(&s, a);
            prefix.push(a);
        }
    }
    Ok(out)
}

fn random_walk_states(task: TaskRef<'_>, env: &EnvConfig, n: usize, validation: usize, seed: u64) -> Result<Vec<SampledState>, LearnError> {
    let mut out = Vec::with_capacity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = PlanningEnv::new(task.task, env.clone(), Some(task.optimal_cost))?;
    let mut prefix = Vec::new();
    while out.len() < n {
        if e.is_done() || e.applicable().is_empty() {
            if prefix.is_empty() {
                break;
            }
            e.reset();
            prefix.clear();
            continue;
        }
        out.push(SampledState { validation, prefix: prefix.clone(), state: e.state().clone(), on_policy: false });
        let a = *e.applicable().choose(&mut rng).expect("nonempty");
        e.step(a)?;
        prefix.push(a);
    }
    Ok(out)
}

/// Samples states of each validation task: on-policy states of its own policy
/// and states from uniform random walks.
pub fn sample_validation_states(validation: &[TaskRef<'_>], own_policies: &[TaskPolicy], cfg: &IttsConfig) -> Result<StateSample, LearnError> {
    let mut states = Vec::new();
    for (j, (t, p)) in validation.iter().zip(own_policies).enumerate() {
        states.extend(on_policy_states(&p.params, *t, &cfg.training.env, cfg.on_policy_states, j, derive_seed(cfg.seed, 1, j as u64))?);
        states.extend(random_walk_states(*t, &cfg.training.env, cfg.random_walk_states, j, derive_seed(cfg.seed, 2, j as u64))?);
    }
    Ok(StateSample { states })
}

/// Policy at `sample`, with memory formed by replaying its prefix.
pub fn policy_at(params: &AgentParams, task: &GroundTask, env: &EnvConfig, sample: &SampledState) -> Vec<f64> {
    let layout = params.layout;
    let mut memory = params.actor.core.initial_state();
    let mut s = task.init().clone();
    let mut prev = None;
    for &a in &sample.prefix {
        let obs = layout.build(task, &s, prev, false);
        memory = params.actor.step(&obs, &memory).0;
        let next = task.successor(&s, a);
        let r = env.reward(task.action(a).cost, task.is_goal(&next));
        prev = Some((a, r));
        s = next;
    }
    let obs = layout.build(task, &s, prev, false);
    let (_, logits) = params.actor.step(&obs, &memory);
    let mut mask = vec![false; layout.num_actions];
    for a in task.applicable(&s) {
        mask[a] = true;
    }
    masked_softmax(&logits, &mask)
}

/// Distributions of `params` at every sampled state.
pub fn policy_table(params: &AgentParams, validation: &[TaskRef<'_>], env: &EnvConfig, samples: &StateSample) -> Vec<Vec<f64>> {
    samples.states.iter().map(|s| policy_at(params, validation[s.validation].task, env, s)).collect()
}

/// `δ = mean over validation tasks of mean over their states of KL(π1 ‖ π2)`.
pub fn difference_from_tables(p1: &[Vec<f64>], p2: &[Vec<f64>], samples: &StateSample) -> f64 {
    let tasks = samples.states.iter().map(|s| s.validation).max().map_or(0, |m| m + 1);
    let mut sums = vec![(0.0, 0usize); tasks];
    for ((a, b), s) in p1.iter().zip(p2).zip(&samples.states) {
        let e = &mut sums[s.validation];
        e.0 += kl_divergence(a, b);
        e.1 += 1;
    }
    let per_task: Vec<f64> = sums.iter().filter(|e| e.1 > 0).map(|e| e.0 / e.1 as f64).collect();
    if per_task.is_empty() {
        0.0
    } else {
        per_task.iter().sum::<f64>() / per_task.len() as f64
    }
}

pub fn task_difference(p1: &AgentParams, p2: &AgentParams, validation: &[TaskRef<'_>], env: &EnvConfig, samples: &StateSample) -> f64 {
    difference_from_tables(&policy_table(p1, validation, env, samples), &policy_table(p2, validation, env, samples), samples)
}

/// `ρ_l`: mean entropy drop between `p1` and its copy fine-tuned for `l`
/// episodes on `target`, over states visited by the fine-tuned policy.
pub fn task_relevance(p1: &AgentParams, target: TaskRef<'_>, cfg: &IttsConfig, seed: u64) -> Result<f64, LearnError> {
    let env = &cfg.training.env;
    let tune = MetaConfig {
        iterations: cfg.transfer_episodes,
        trials_per_iteration: 1,
        episodes_per_task: 1,
        eval_every: 0,
        seed: derive_seed(seed, 3, 0),
        ..cfg.training.clone()
    };
    let tuned = continue_training(p1.clone(), &[target], &[], &tune)?.params;
    let sampler = if cfg.sample_before_transfer { p1 } else { &tuned };
    let states = on_policy_states(sampler, target, env, cfg.relevance_states, 0, derive_seed(seed, 4, 0))?;
    if states.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = states
        .iter()
        .map(|s| entropy(&policy_at(p1, target.task, env, s)) - entropy(&policy_at(&tuned, target.task, env, s)))
        .sum();
    Ok(total / states.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateAudit {
    pub candidate: usize,
    /// Position in the examination order.
    pub rank: usize,
    pub mean_delta_to_selected: f64,
    /// Smallest δ to a task selected before it; infinite when none was.
    pub min_delta_to_selected: f64,
    pub best_rho: f64,
    pub best_rho_validation: Option<usize>,
    pub eligible: bool,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionLog {
    pub epsilon_diff: f64,
    pub selected: Vec<usize>,
    pub audit: Vec<CandidateAudit>,
}

/// Greedy selection from precomputed `delta[i][c]` and `rho[i][j]`. The next
/// candidate examined is the remaining one with the largest mean δ to the
/// selected set (ties to the lower index). It is kept iff δ to every selected
/// task is at least `eps` and some `ρ ≥ 0`.
pub fn select_from_matrices(delta: &[Vec<f64>], rho: &[Vec<f64>], eligible: &[bool], eps: f64) -> Result<SelectionLog, LearnError> {
    let n = delta.len();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut audit = Vec::with_capacity(n);
    while !remaining.is_empty() {
        let mean_delta = |i: usize| {
            if selected.is_empty() {
                0.0
            } else {
                selected.iter().map(|&c| delta[i][c]).sum::<f64>() / selected.len() as f64
            }
        };
        let (pos, &i) = remaining
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| mean_delta(a).total_cmp(&mean_delta(b)).then(b.cmp(&a)))
            .expect("nonempty");
        remaining.remove(pos);
        let min_delta = selected.iter().map(|&c| delta[i][c]).fold(f64::INFINITY, f64::min);
        let (best_rho_validation, best_rho) = rho[i]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or((None, f64::NEG_INFINITY), |(j, &r)| (Some(j), r));
        let accepted = eligible[i] && min_delta >= eps && best_rho >= 0.0;
        audit.push(CandidateAudit {
            candidate: i,
            rank: audit.len(),
            mean_delta_to_selected: mean_delta(i),
            min_delta_to_selected: min_delta,
            best_rho,
            best_rho_validation,
            eligible: eligible[i],
            accepted,
        });
        if accepted {
            selected.push(i);
        }
    }
    if selected.is_empty() {
        return Err(LearnError::EmptySelection);
    }
    Ok(SelectionLog { epsilon_diff: eps, selected, audit })
}

/// Everything computed by a full selection run; the matrices allow
/// re-selection with other thresholds.
#[derive(Debug, Clone)]
pub struct IttsOutcome {
    pub candidate_policies: Vec<TaskPolicy>,
    pub validation_policies: Vec<TaskPolicy>,
    pub samples: StateSample,
    pub delta: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub eligible: Vec<bool>,
    pub log: SelectionLog,
}

pub fn select_tasks(candidates: &[TaskRef<'_>], validation: &[TaskRef<'_>], cfg: &IttsConfig) -> Result<IttsOutcome, LearnError> {
    if validation.is_empty() {
        return Err(LearnError::Invalid("task selection needs validation tasks".into()));
    }
    let keys: std::collections::HashSet<String> = validation.iter().map(|t| identity_key(t.task)).collect();
    if candidates.iter().any(|c| keys.contains(&identity_key(c.task))) {
        return Err(LearnError::Invalid("validation tasks must be disjoint from candidates".into()));
    }
    let exec = cfg.training.exec;
    let candidate_policies = train_single_task_policies(candidates, cfg)?;
    let validation_policies = train_single_task_policies(validation, cfg)?;
    let samples = sample_validation_states(validation, &validation_policies, cfg)?;
    let env = &cfg.training.env;
    let tables = exec.map(&candidate_policies, |p| policy_table(&p.params, validation, env, &samples));
    let n = candidates.len();
    let delta = exec.map_range(n, |i| (0..n).map(|c| difference_from_tables(&tables[i], &tables[c], &samples)).collect::<Vec<f64>>());
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..validation.len()).map(move |j| (i, j))).collect();
    let rho_flat = exec
        .map(&pairs, |&(i, j)| task_relevance(&candidate_policies[i].params, validation[j], cfg, derive_seed(cfg.seed, i as u64, j as u64)))
        .into_iter()
        .collect::<Result<Vec<f64>, _>>()?;
    let rho: Vec<Vec<f64>> = rho_flat.chunks(validation.len()).map(|c| c.to_vec()).collect();
    let eligible: Vec<bool> = candidate_policies.iter().map(|p| p.converged).collect();
    let log = select_from_matrices(&delta, &rho, &eligible, cfg.epsilon_diff)?;
    Ok(IttsOutcome { candidate_policies, validation_policies, samples, delta, rho, eligible, log })
}
