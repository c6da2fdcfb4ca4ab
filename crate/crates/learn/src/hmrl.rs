//! The meta-trained critic as a search heuristic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use metaplan_core::heuristics::{Heuristic, NodeContext};
use metaplan_core::{ActionId, EnvConfig, GroundTask, State};
use metaplan_nn::LstmState;

use crate::agent::{AgentParams, Net, ObsLayout};
use crate::LearnError;

/// Largest finite estimate returned.
pub const H_CAP: f64 = 1e6;

/// Conversion of a value estimate `v` into a cost-to-go estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueToCost {
    /// `max(0, −v)`.
    Negate,
    /// Number of unit steps `k` whose discounted return `Σ_{t<k−1} γ^t r_step + γ^{k−1} r_goal`
    /// equals `v`, clamped to `[0, H_CAP]`.
    #[default]
    ReturnModel,
}

impl ValueToCost {
    pub fn apply(self, v: f64, env: &EnvConfig) -> f64 {
        let h = match self {
            ValueToCost::Negate => -v,
            ValueToCost::ReturnModel => steps_for_value(v, env),
        };
        if h.is_nan() {
            H_CAP
        } else {
            h.clamp(0.0, H_CAP)
        }
    }
}

fn steps_for_value(v: f64, env: &EnvConfig) -> f64 {
    let (g, step, goal) = (env.gamma, env.step_reward, env.r_goal);
    if g >= 1.0 {
        if step == 0.0 {
            return if v >= goal { 0.0 } else { H_CAP };
        }
        return 1.0 + (v - goal) / step;
    }
    // return of k steps: S + γ^{k−1} (r_goal − S), S = step / (1 − γ)
    let s = step / (1.0 - g);
    let ratio = (v - s) / (goal - s);
    if ratio <= 0.0 {
        return H_CAP;
    }
    1.0 + ratio.ln() / g.ln()
}

/// `h(s)` from the critic, with recurrent memory carried from parent to child
/// along the search tree.
#[derive(Debug, Clone)]
pub struct HMrl {
    critic: Net,
    layout: ObsLayout,
    env: EnvConfig,
    mapping: ValueToCost,
}

impl HMrl {
    pub fn new(params: &AgentParams, task: &GroundTask, env: EnvConfig, mapping: ValueToCost) -> Result<Self, LearnError> {
        params.layout.check(task)?;
        Ok(HMrl { critic: params.critic.clone(), layout: params.layout, env, mapping })
    }

    /// Critic value of `state` reached from the given parent memory.
    pub fn critic_value(&self, task: &GroundTask, state: &State, parent: Option<(&LstmState, ActionId)>) -> (f64, LstmState) {
        let (memory, prev) = match parent {
            None => (self.critic.core.initial_state(), None),
            Some((m, a)) => {
                let r = self.env.reward(task.action(a).cost, false);
                (m.clone(), Some((a, r)))
            }
        };
        let obs = self.layout.build(task, state, prev, false);
        let (next, v) = self.critic.step(&obs, &memory);
        (v[0], next)
    }
}

impl Heuristic for HMrl {
    fn name(&self) -> &str {
        "mrl"
    }

    fn is_admissible(&self) -> bool {
        false
    }

    fn evaluate(&mut self, task: &GroundTask, state: &State, parent: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext) {
        if task.is_goal(state) {
            return (0.0, NodeContext::default());
        }
        let parent_memory = parent.map(|(ctx, a)| {
            let m = match &ctx.0 {
                Some(flat) => LstmState::from_flat(flat),
                None => self.critic.core.initial_state(),
            };
            (m, a)
        });
        let (v, memory) = self.critic_value(task, state, parent_memory.as_ref().map(|(m, a)| (m, *a)));
        let h = self.mapping.apply(v, &self.env);
        (h, NodeContext(Some(Arc::from(memory.to_flat()))))
    }
}
