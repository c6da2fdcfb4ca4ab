//! Actor and critic networks and the RL² observation layout.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use metaplan_core::env::{encode_into, encoding_width};
use metaplan_core::{ActionId, GroundTask, State};
use metaplan_nn::policy::masked_softmax;
use metaplan_nn::{prefixed, Checkpoint, Lstm, LstmState, Mlp, NnError, Params, Tensor};

use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    /// LSTM hidden size.
    pub hidden: usize,
    /// Width of the dense layer between the LSTM and each output.
    pub dense: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { hidden: 128, dense: 64 }
    }
}

/// Observation = state encoding ⊕ one-hot previous action ⊕ previous reward ⊕ done flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsLayout {
    pub encoding_width: usize,
    pub num_actions: usize,
    pub goal_features: bool,
}

impl ObsLayout {
    pub fn for_task(task: &GroundTask, goal_features: bool) -> Self {
        ObsLayout { encoding_width: encoding_width(task, goal_features), num_actions: task.num_actions(), goal_features }
    }

    pub fn width(&self) -> usize {
        self.encoding_width + self.num_actions + 2
    }

    pub fn check(&self, task: &GroundTask) -> Result<(), LearnError> {
        let other = ObsLayout::for_task(task, self.goal_features);
        if other != *self {
            return Err(LearnError::DimensionMismatch(format!(
                "task {} has encoding width {} and {} actions, model expects {} and {}",
                task.name(),
                other.encoding_width,
                other.num_actions,
                self.encoding_width,
                self.num_actions
            )));
        }
        Ok(())
    }

    /// `prev` is the action that led to `s` and its reward; `None` at episode start.
    pub fn build(&self, task: &GroundTask, s: &State, prev: Option<(ActionId, f64)>, done: bool) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.width());
        encode_into(task, s, self.goal_features, &mut v);
        let base = v.len();
        v.resize(base + self.num_actions, 0.0);
        let mut reward = 0.0;
        if let Some((a, r)) = prev {
            v[base + a] = 1.0;
            reward = r;
        }
        v.push(reward);
        v.push(if done { 1.0 } else { 0.0 });
        v
    }
}

/// LSTM core with a dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub core: Lstm,
    pub head: Mlp,
}

impl Net {
    pub fn new(input: usize, output: usize, cfg: &NetConfig, output_scale: f64, rng: &mut impl Rng) -> Self {
        let core = Lstm::new(input, cfg.hidden, rng);
        let mut head = Mlp::new(&[cfg.hidden, cfg.dense, output], rng);
        head.scale_output(output_scale);
        Net { core, head }
    }

    pub fn zeros_like(&self) -> Self {
        Net { core: self.core.zeros_like(), head: self.head.zeros_like() }
    }

    pub fn step(&self, x: &[f64], memory: &LstmState) -> (LstmState, Vec<f64>) {
        let (next, _) = self.core.step(x, memory);
        let out = self.head.predict(&next.h);
        (next, out)
    }
}

impl Params for Net {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("core", self.core.tensors());
        v.extend(prefixed("head", self.head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.core.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

/// Separate actor (masked softmax over ground actions) and critic (scalar value).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub actor: Net,
    pub critic: Net,
    pub layout: ObsLayout,
    pub net: NetConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    pub actor: LstmState,
    pub critic: LstmState,
}

impl AgentParams {
    pub fn new(layout: ObsLayout, net: NetConfig, rng: &mut impl Rng) -> Self {
        let actor = Net::new(layout.width(), layout.num_actions, &net, 0.01, rng);
        let critic = Net::new(layout.width(), 1, &net, 1.0, rng);
        AgentParams { actor, critic, layout, net }
    }

    pub fn initial_memory(&self) -> Memory {
        Memory { actor: self.actor.core.initial_state(), critic: self.critic.core.initial_state() }
    }

    /// Feeds one observation to both networks: returns the policy over
    /// `mask` (all zeros when nothing is applicable) and the value.
    pub fn observe(&self, obs: &[f64], mask: &[bool], memory: &Memory) -> (Vec<f64>, f64, Memory) {
        let (actor, logits) = self.actor.step(obs, &memory.actor);
        let (critic, value) = self.critic.step(obs, &memory.critic);
        (masked_softmax(&logits, mask), value[0], Memory { actor, critic })
    }

    /// Parameters rounded to single precision, as stored in checkpoints.
    pub fn quantized(&self) -> Self {
        let mut q = self.clone();
        for net in [&mut q.actor, &mut q.critic] {
            for t in net.tensors_mut() {
                t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
        }
        q
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        for (prefix, net) in [("actor", &self.actor), ("critic", &self.critic)] {
            tensors.extend(prefixed(prefix, net.tensors()).into_iter().map(|(n, t)| (n, t.clone())));
        }
        let meta = json!({ "kind": "agent", "layout": self.layout, "net": self.net, "extra": extra });
        Checkpoint { tensors, meta }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, LearnError> {
        if ck.meta["kind"] != "agent" {
            return Err(LearnError::Checkpoint(NnError::BadCheckpoint("not an agent checkpoint".into())));
        }
        let layout: ObsLayout = serde_json::from_value(ck.meta["layout"].clone()).map_err(NnError::from)?;
        let net: NetConfig = serde_json::from_value(ck.meta["net"].clone()).map_err(NnError::from)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut params = AgentParams::new(layout, net, &mut rng);
        ck.restore_into("actor", &mut params.actor)?;
        ck.restore_into("critic", &mut params.critic)?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::chain_task;
    use rand::SeedableRng;

    #[test]
    fn observation_layout() {
        let task = chain_task(3);
        let layout = ObsLayout::for_task(&task, true);
        assert_eq!(layout.width(), 2 * 3 + task.num_actions() + 2);
        let first = layout.build(&task, task.init(), None, false);
        assert!(first[layout.encoding_width..].iter().all(|&v| v == 0.0));
        let (next, _) = task.apply(task.init(), 0).unwrap();
        let o = layout.build(&task, &next, Some((0, -1.0)), true);
        assert_eq!(o[layout.encoding_width], 1.0);
        assert_eq!(&o[layout.width() - 2..], &[-1.0, 1.0]);
    }

    #[test]
    fn checkpoint_round_trip_is_quantized_params() {
        let task = chain_task(4);
        let layout = ObsLayout::for_task(&task, true);
        let p = AgentParams::new(layout, NetConfig { hidden: 5, dense: 4 }, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        let ck = p.to_checkpoint(json!({}));
        let back = AgentParams::from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes(), ck.meta.clone()).unwrap()).unwrap();
        assert_eq!(back, p.quantized());
    }
}
