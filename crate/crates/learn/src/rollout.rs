//! Trials: several episodes on one task with recurrent memory carried across
//! episode boundaries.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use std::collections::HashSet;

use metaplan_core::{ActionId, EnvConfig, GroundTask, PlanningEnv, State};
use metaplan_nn::policy::argmax;

use crate::agent::{AgentParams, Memory};
use crate::LearnError;

/// How greedy rollouts pick actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guidance {
    /// Most probable action under the actor.
    Actor,
    /// One-step lookahead maximizing `r + γ·v(s')` under the critic, skipping
    /// successors already visited in the episode while any unvisited one exists.
    #[default]
    Critic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Sample,
    Greedy(Guidance),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    /// Empty for the observation fed after an episode ends.
    pub mask: Vec<bool>,
    pub action: Option<ActionId>,
    pub logp: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    /// Recurrent memory is zeroed before this step.
    pub reset: bool,
}

impl Step {
    pub fn is_action(&self) -> bool {
        self.action.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub task: usize,
    pub steps: Vec<Step>,
    pub episode_returns: Vec<f64>,
    pub episode_lengths: Vec<usize>,
    pub episode_goal: Vec<bool>,
}

impl Trial {
    pub fn action_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.is_action()).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrialSpec<'a> {
    pub task_index: usize,
    pub task: &'a GroundTask,
    pub optimal_cost: f64,
    pub episodes: usize,
    pub reset_each_episode: bool,
}

/// Runs `spec.episodes` episodes starting from zeroed memory.
pub fn run_trial(params: &AgentParams, spec: TrialSpec<'_>, env_cfg: &EnvConfig, mode: ActionMode, rng: &mut impl Rng) -> Result<Trial, LearnError> {
    let layout = params.layout;
    layout.check(spec.task)?;
    let mut env = PlanningEnv::new(spec.task, env_cfg.clone(), Some(spec.optimal_cost))?;
    let mut trial = Trial { task: spec.task_index, steps: Vec::new(), episode_returns: Vec::new(), episode_lengths: Vec::new(), episode_goal: Vec::new() };
    let mut memory = params.initial_memory();
    for episode in 0..spec.episodes {
        let reset = episode == 0 || spec.reset_each_episode;
        if reset {
            memory = params.initial_memory();
        }
        env.reset();
        let mut prev: Option<(ActionId, f64)> = None;
        let (mut ret, mut len) = (0.0, 0);
        let mut first = true;
        let mut visited = HashSet::from([env.state().clone()]);
        loop {
            let obs = layout.build(spec.task, env.state(), prev, false);
            let mask = env.action_mask();
            let (probs, value, next_memory) = params.observe(&obs, &mask, &memory);
            if env.applicable().is_empty() {
                // dead end at the initial state
                trial.episode_goal.push(false);
                break;
            }
            let action = match mode {
                ActionMode::Sample => WeightedIndex::new(&probs).expect("masked policy has support").sample(rng),
                ActionMode::Greedy(Guidance::Actor) => argmax(&probs),
                ActionMode::Greedy(Guidance::Critic) => {
                    critic_lookahead(params, spec.task, env_cfg, env.state(), env.applicable(), &next_memory, &visited)
                }
            };
            let out = env.step(action)?;
            visited.insert(env.state().clone());
            trial.steps.push(Step {
                obs,
                mask,
                action: Some(action),
                logp: probs[action].ln(),
                value,
                reward: out.reward,
                done: out.done,
                reset: reset && first,
            });
            first = false;
            memory = next_memory;
            ret += out.reward;
            len += 1;
            prev = Some((action, out.reward));
            if out.done {
                let obs = layout.build(spec.task, env.state(), prev, true);
                let (_, value, next_memory) = params.observe(&obs, &vec![false; layout.num_actions], &memory);
                memory = next_memory;
                trial.steps.push(Step { obs, mask: Vec::new(), action: None, logp: 0.0, value, reward: 0.0, done: true, reset: false });
                trial.episode_goal.push(out.goal_reached);
                break;
            }
        }
        trial.episode_returns.push(ret);
        trial.episode_lengths.push(len);
    }
    Ok(trial)
}

fn critic_lookahead(
    params: &AgentParams,
    task: &GroundTask,
    env_cfg: &EnvConfig,
    state: &State,
    applicable: &[ActionId],
    memory: &Memory,
    visited: &HashSet<State>,
) -> ActionId {
    let mut best = (f64::NEG_INFINITY, applicable[0]);
    let mut fresh = false;
    for &a in applicable {
        let next = task.successor(state, a);
        let unseen = !visited.contains(&next);
        if fresh && !unseen {
            continue;
        }
        let goal = task.is_goal(&next);
        let r = env_cfg.reward(task.action(a).cost, goal);
        let score = if goal {
            r
        } else {
            let obs = params.layout.build(task, &next, Some((a, r)), false);
            let (_, v) = params.critic.step(&obs, &memory.critic);
            r + env_cfg.gamma * v[0]
        };
        if score > best.0 || (unseen && !fresh) {
            best = (score, a);
            fresh |= unseen;
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{NetConfig, ObsLayout};
    use crate::toy::chain_task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (GroundTask, AgentParams) {
        let task = chain_task(4);
        let params = AgentParams::new(ObsLayout::for_task(&task, true), NetConfig { hidden: 6, dense: 5 }, &mut ChaCha8Rng::seed_from_u64(1));
        (task, params)
    }

    #[test]
    fn seeded_rollouts_repeat() {
        let (task, params) = setup();
        let spec = TrialSpec { task_index: 0, task: &task, optimal_cost: 3.0, episodes: 2, reset_each_episode: false };
        let cfg = EnvConfig::default();
        let a = run_trial(&params, spec, &cfg, ActionMode::Sample, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = run_trial(&params, spec, &cfg, ActionMode::Sample, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episode_returns.len(), 2);
        // one terminal observation per episode
        assert_eq!(a.steps.len() - a.action_steps(), 2);
        let first = &a.steps[0];
        assert!(first.reset);
        assert!(first.obs[params.layout.encoding_width..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_actions_are_never_taken() {
        let (task, params) = setup();
        let spec = TrialSpec { task_index: 0, task: &task, optimal_cost: 3.0, episodes: 3, reset_each_episode: true };
        let t = run_trial(&params, spec, &EnvConfig::default(), ActionMode::Sample, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for s in t.steps.iter().filter(|s| s.is_action()) {
            assert!(s.mask[s.action.unwrap()]);
        }
        assert_eq!(t.steps.iter().filter(|s| s.reset).count(), 3);
    }
}
