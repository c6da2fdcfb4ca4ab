//! A grounded task viewed as an episodic MDP.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::bfs_oracle;
use crate::task::{ActionId, GroundTask, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HorizonRule {
    Fixed { steps: usize },
    /// `factor` times the optimal plan cost, clamped to `[floor, cap]`.
    Scaled { factor: f64, floor: usize, cap: usize },
}

impl Default for HorizonRule {
    fn default() -> Self {
        HorizonRule::Scaled { factor: 4.0, floor: 20, cap: 200 }
    }
}

impl HorizonRule {
    pub fn resolve(&self, optimal_cost: Option<f64>) -> usize {
        match *self {
            HorizonRule::Fixed { steps } => steps,
            HorizonRule::Scaled { factor, floor, cap } => match optimal_cost {
                Some(c) if c.is_finite() => ((factor * c).ceil() as usize).clamp(floor, cap),
                _ => cap,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub horizon: HorizonRule,
    /// Reward for the transition that reaches a goal (replaces the step reward).
    pub r_goal: f64,
    /// Reward per unit of action cost on non-goal transitions.
    pub step_reward: f64,
    pub gamma: f64,
    /// Append a block marking the goal atoms to every state encoding.
    pub goal_features: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { horizon: HorizonRule::default(), r_goal: 10.0, step_reward: -1.0, gamma: 0.99, goal_features: true }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        match self.horizon {
            HorizonRule::Fixed { steps: 0 } => return bad("horizon must be at least 1"),
            HorizonRule::Scaled { factor, floor, cap } if floor == 0 || cap < floor || factor <= 0.0 => {
                return bad("scaled horizon needs factor > 0 and 1 <= floor <= cap")
            }
            _ => {}
        }
        if self.step_reward > 0.0 {
            return bad("step_reward must be <= 0");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !self.r_goal.is_finite() {
            return bad("r_goal must be finite");
        }
        Ok(())
    }

    /// Undiscounted return of an episode that reaches the goal after `k` unit-cost steps.
    pub fn solved_return(&self, k: usize) -> f64 {
        (k.saturating_sub(1)) as f64 * self.step_reward + self.r_goal
    }

    /// Transition reward for an action of cost `cost` landing in a goal or not.
    pub fn reward(&self, cost: f64, goal: bool) -> f64 {
        if goal {
            self.r_goal
        } else {
            self.step_reward * cost
        }
    }
}

/// Fixed-width numeric state vector: atom truth values in canonical order,
/// then normalized fluents, then (optionally) goal-atom indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState(pub Vec<f64>);

impl Deref for EncodedState {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn encoding_width(task: &GroundTask, goal_features: bool) -> usize {
    task.num_atoms() * if goal_features { 2 } else { 1 } + task.fluents().len()
}

pub fn encode_state(task: &GroundTask, s: &State, goal_features: bool) -> EncodedState {
    let mut v = Vec::with_capacity(encoding_width(task, goal_features));
    encode_into(task, s, goal_features, &mut v);
    EncodedState(v)
}

/// Appends the encoding of `s` to `out`.
pub fn encode_into(task: &GroundTask, s: &State, goal_features: bool, out: &mut Vec<f64>) {
    let start = out.len();
    out.extend((0..task.num_atoms()).map(|i| if s.get(i) { 1.0 } else { 0.0 }));
    out.extend(task.fluents().iter().map(|f| {
        if f.upper > f.lower {
            ((f.value - f.lower) / (f.upper - f.lower)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }));
    if goal_features {
        let base = out.len();
        out.resize(base + task.num_atoms(), 0.0);
        for &g in task.goal_pos() {
            out[base + g] = 1.0;
        }
    }
    debug_assert_eq!(out.len() - start, encoding_width(task, goal_features));
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: EncodedState,
    pub reward: f64,
    pub done: bool,
    pub goal_reached: bool,
    pub invalid: bool,
}

/// Single-owner episodic environment over a shared task.
#[derive(Debug, Clone)]
pub struct PlanningEnv<'a> {
    task: &'a GroundTask,
    config: EnvConfig,
    horizon: usize,
    current: State,
    steps_taken: usize,
    done: bool,
    applicable: Vec<ActionId>,
}

impl<'a> PlanningEnv<'a> {
    /// `optimal_cost` feeds the scaled horizon rule; when absent it is
    /// computed by exhaustive search (capped at 200,000 states).
    pub fn new(task: &'a GroundTask, config: EnvConfig, optimal_cost: Option<f64>) -> Result<Self, EnvError> {
        config.validate()?;
        let optimal = match (config.horizon, optimal_cost) {
            (HorizonRule::Scaled { .. }, None) => bfs_oracle(task, 200_000).ok().map(|o| o.optimal_cost),
            (_, c) => c,
        };
        let horizon = config.horizon.resolve(optimal);
        let mut env = PlanningEnv {
            task,
            config,
            horizon,
            current: task.init().clone(),
            steps_taken: 0,
            done: false,
            applicable: Vec::new(),
        };
        env.reset();
        Ok(env)
    }

    pub fn task(&self) -> &'a GroundTask {
        self.task
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state(&self) -> &State {
        &self.current
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn applicable(&self) -> &[ActionId] {
        &self.applicable
    }

    pub fn reset(&mut self) -> EncodedState {
        self.current = self.task.init().clone();
        self.steps_taken = 0;
        self.done = false;
        self.task.applicable_into(&self.current, &mut self.applicable);
        self.observe()
    }

    pub fn observe(&self) -> EncodedState {
        encode_state(self.task, &self.current, self.config.goal_features)
    }

    pub fn action_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.task.num_actions()];
        for &a in &self.applicable {
            mask[a] = true;
        }
        mask
    }

    /// Executes `action`. Inapplicable actions leave the state unchanged and
    /// still cost a step.
    pub fn step(&mut self, action: ActionId) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        self.steps_taken += 1;
        let (reward, goal_reached, invalid) = match self.task.apply(&self.current, action) {
            Ok((next, cost)) => {
                self.current = next;
                let goal = self.task.is_goal(&self.current);
                (self.config.reward(cost, goal), goal, false)
            }
            Err(_) => (self.config.step_reward, false, true),
        };
        self.task.applicable_into(&self.current, &mut self.applicable);
        self.done = goal_reached || self.steps_taken >= self.horizon || self.applicable.is_empty();
        Ok(StepOutcome { observation: self.observe(), reward, done: self.done, goal_reached, invalid })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::GroundAtom;
    use crate::task::ActionSpec;

    fn line(n: usize) -> GroundTask {
        let atoms = (0..n).map(|i| GroundAtom::new("at", &[&format!("c{i}")])).collect();
        let actions = (0..n - 1)
            .map(|i| ActionSpec {
                name: format!("right{i}"),
                pre_pos: vec![i],
                pre_neg: vec![],
                add: vec![i + 1],
                del: vec![i],
                cost: 1.0,
            })
            .collect();
        GroundTask::from_parts("line", "t", atoms, actions, [0], vec![n - 1], vec![], vec![]).unwrap()
    }

    fn plain() -> EnvConfig {
        EnvConfig { goal_features: false, ..EnvConfig::default() }
    }

    #[test]
    fn encoding_is_bitwise() {
        let t = line(3);
        assert_eq!(encode_state(&t, &State::from_atoms(3, [1]), false).0, vec![0.0, 1.0, 0.0]);
        assert_eq!(encode_state(&t, &State::from_atoms(3, [1]), true).0, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rewards_and_termination() {
        let t = line(3);
        let mut env = PlanningEnv::new(&t, plain(), Some(2.0)).unwrap();
        assert_eq!(env.horizon(), 20);
        let first = env.reset();
        assert_eq!(first, env.reset());
        let o = env.step(0).unwrap();
        assert_eq!((o.reward, o.done, o.goal_reached), (-1.0, false, false));
        let o = env.step(1).unwrap();
        assert_eq!((o.reward, o.done, o.goal_reached), (10.0, true, true));
        assert_eq!(env.step(0), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn horizon_ends_episode_and_invalid_actions_are_noops() {
        let t = line(4);
        let cfg = EnvConfig { horizon: HorizonRule::Fixed { steps: 2 }, ..plain() };
        let mut env = PlanningEnv::new(&t, cfg, None).unwrap();
        let o = env.step(2).unwrap();
        assert!(o.invalid);
        assert_eq!(o.reward, -1.0);
        assert_eq!(env.state(), t.init());
        let o = env.step(0).unwrap();
        assert!(o.done && !o.goal_reached);
    }

    #[test]
    fn dead_end_mask_is_empty() {
        let t = line(2);
        let mut env = PlanningEnv::new(&t, plain(), Some(1.0)).unwrap();
        assert_eq!(env.action_mask(), vec![true]);
        env.step(0).unwrap();
        assert_eq!(env.action_mask(), vec![false]);
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig { gamma: 0.0, ..plain() }.validate().is_err());
        assert!(EnvConfig { step_reward: 1.0, ..plain() }.validate().is_err());
        assert!(EnvConfig { horizon: HorizonRule::Fixed { steps: 0 }, ..plain() }.validate().is_err());
        assert_eq!(plain().solved_return(3), 8.0);
        assert_eq!(HorizonRule::default().resolve(Some(100.0)), 200);
    }
}
