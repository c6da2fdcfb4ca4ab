//! Advantage estimation and the clipped-surrogate PPO update over recurrent trials.

use serde::{Deserialize, Serialize};

use metaplan_core::par::Exec;
use metaplan_nn::policy::{entropy, entropy_grad, log_prob_grad, masked_softmax};
use metaplan_nn::{clip_global_norm, Adam, AdamConfig, LstmState, NnError, Params};

use crate::agent::{AgentParams, Net};
use crate::rollout::{Step, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub epochs: usize,
    /// Trials per minibatch.
    pub minibatch_trials: usize,
    /// GAE λ; 0 gives the one-step estimate `r + γ v(s') − v(s)`.
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_eps: 0.2,
            epochs: 8,
            minibatch_trials: 8,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 1e-3,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

/// Advantages and value targets for the action steps of `steps`, in order.
/// `A_t = δ_t + γλ(1 − done_t) A_{t+1}` with `δ_t = r_t + γ v_{t+1}(1 − done_t) − v_t`.
pub fn compute_advantage(steps: &[Step], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let acts: Vec<&Step> = steps.iter().filter(|s| s.is_action()).collect();
    let n = acts.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let s = acts[t];
        let (next_v, cont) = if s.done || t + 1 == n { (0.0, 0.0) } else { (acts[t + 1].value, 1.0) };
        let delta = s.reward + gamma * next_v * cont - s.value;
        adv[t] = delta + gamma * lambda * cont * next_adv;
        next_adv = adv[t];
    }
    let targets = adv.iter().zip(&acts).map(|(a, s)| a + s.value).collect();
    (adv, targets)
}

/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Derivative of the clipped surrogate with respect to `log π`.
fn surrogate_dlogp(ratio: f64, advantage: f64, eps: f64) -> f64 {
    if ratio * advantage <= ratio.clamp(1.0 - eps, 1.0 + eps) * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub skipped_batches: usize,
}

/// A trial prepared for optimization.
pub struct Batch<'a> {
    pub trial: &'a Trial,
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
}

struct TrialGrads {
    actor: Net,
    critic: Net,
    stats: UpdateStats,
}

type Replay = (Vec<Vec<f64>>, Vec<metaplan_nn::MlpCache>, Vec<(usize, Vec<metaplan_nn::LstmStepCache>)>);

/// Runs `net` over the trial, honoring memory resets; returns per-step
/// outputs, heads' caches and the LSTM caches split by segment.
fn replay(net: &Net, steps: &[Step]) -> Replay {
    let mut outputs = Vec::with_capacity(steps.len());
    let mut head_caches = Vec::with_capacity(steps.len());
    let mut segments: Vec<(usize, Vec<metaplan_nn::LstmStepCache>)> = Vec::new();
    let mut state = net.core.initial_state();
    for (t, s) in steps.iter().enumerate() {
        if s.reset || t == 0 {
            state = net.core.initial_state();
            segments.push((t, Vec::new()));
        }
        let (next, cache) = net.core.step(&s.obs, &state);
        let (out, hc) = net.head.forward(&next.h);
        outputs.push(out);
        head_caches.push(hc);
        segments.last_mut().unwrap().1.push(cache);
        state = next;
    }
    (outputs, head_caches, segments)
}

fn backprop(net: &Net, grads: &mut Net, head_caches: &[metaplan_nn::MlpCache], out_grads: &[Option<Vec<f64>>], segments: &[(usize, Vec<metaplan_nn::LstmStepCache>)]) {
    let hidden = net.core.hidden_size();
    let dh: Vec<Vec<f64>> = head_caches
        .iter()
        .zip(out_grads)
        .map(|(c, g)| match g {
            Some(g) => net.head.backward(c, g, &mut grads.head),
            None => vec![0.0; hidden],
        })
        .collect();
    for (start, caches) in segments {
        net.core.backward(caches, &dh[*start..*start + caches.len()], None::<&LstmState>, &mut grads.core);
    }
}

fn trial_gradients(params: &AgentParams, batch: &Batch<'_>, cfg: &PpoConfig, norm: f64) -> TrialGrads {
    let steps = &batch.trial.steps;
    let mut stats = UpdateStats::default();

    let (logits, actor_heads, actor_segments) = replay(&params.actor, steps);
    let mut actor_out: Vec<Option<Vec<f64>>> = vec![None; steps.len()];
    let mut k = 0;
    for (t, s) in steps.iter().enumerate() {
        let Some(a) = s.action else { continue };
        let p = masked_softmax(&logits[t], &s.mask);
        let ratio = (p[a].ln() - s.logp).exp();
        let adv = batch.advantages[k];
        k += 1;
        stats.policy_loss -= clipped_surrogate(ratio, adv, cfg.clip_eps) / norm;
        let h = entropy(&p);
        stats.entropy += h / norm;
        if (ratio - 1.0).abs() > cfg.clip_eps {
            stats.clip_fraction += 1.0 / norm;
        }
        let d = surrogate_dlogp(ratio, adv, cfg.clip_eps);
        let glp = log_prob_grad(&p, a);
        let gh = entropy_grad(&p);
        // minimize −surrogate − c·H
        let g: Vec<f64> = glp.iter().zip(&gh).map(|(l, e)| (-d * l - cfg.entropy_coef * e) / norm).collect();
        actor_out[t] = Some(g);
    }
    let mut actor = params.actor.zeros_like();
    backprop(&params.actor, &mut actor, &actor_heads, &actor_out, &actor_segments);

    let (values, critic_heads, critic_segments) = replay(&params.critic, steps);
    let mut critic_out: Vec<Option<Vec<f64>>> = vec![None; steps.len()];
    let mut k = 0;
    for (t, s) in steps.iter().enumerate() {
        if !s.is_action() {
            continue;
        }
        let err = values[t][0] - batch.targets[k];
        k += 1;
        stats.value_loss += 0.5 * err * err / norm;
        critic_out[t] = Some(vec![cfg.value_coef * err / norm]);
    }
    let mut critic = params.critic.zeros_like();
    backprop(&params.critic, &mut critic, &critic_heads, &critic_out, &critic_segments);
    TrialGrads { actor, critic, stats }
}

/// Loss gradients `(actor, critic)` for one batch, averaged over its action steps.
pub fn batch_gradients(params: &AgentParams, batch: &Batch<'_>, cfg: &PpoConfig) -> (Net, Net, UpdateStats) {
    let g = trial_gradients(params, batch, cfg, batch.advantages.len().max(1) as f64);
    (g.actor, g.critic, g.stats)
}

/// Actor and critic optimizers.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub actor: Adam,
    pub critic: Adam,
}

impl Optimizers {
    pub fn new(params: &AgentParams, lr: f64) -> Self {
        let cfg = AdamConfig { lr, ..AdamConfig::default() };
        Optimizers { actor: Adam::new(&params.actor, cfg), critic: Adam::new(&params.critic, cfg) }
    }
}

/// Builds batches with advantages normalized across all trials.
pub fn prepare<'a>(trials: &'a [Trial], gamma: f64, cfg: &PpoConfig) -> Vec<Batch<'a>> {
    let mut batches: Vec<Batch<'a>> = trials
        .iter()
        .map(|trial| {
            let (advantages, targets) = compute_advantage(&trial.steps, gamma, cfg.gae_lambda);
            Batch { trial, advantages, targets }
        })
        .collect();
    if cfg.normalize_advantages {
        let all: Vec<f64> = batches.iter().flat_map(|b| b.advantages.iter().copied()).collect();
        if all.len() > 1 {
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let std = (all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
            for b in &mut batches {
                b.advantages.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
            }
        }
    }
    batches
}

/// One optimization pass over `order` (indices into `batches`) split into
/// minibatches. Per-trial gradients may be computed in parallel and are
/// summed in index order.
pub fn ppo_epoch(params: &mut AgentParams, opt: &mut Optimizers, batches: &[Batch<'_>], order: &[usize], cfg: &PpoConfig, exec: Exec) -> UpdateStats {
    let mut total = UpdateStats::default();
    let mut n_mb = 0.0;
    for chunk in order.chunks(cfg.minibatch_trials.max(1)) {
        let members: Vec<&Batch<'_>> = chunk.iter().map(|&i| &batches[i]).collect();
        let norm = members.iter().map(|b| b.advantages.len()).sum::<usize>().max(1) as f64;
        let snapshot = &*params;
        let grads = exec.map(&members, |b| trial_gradients(snapshot, b, cfg, norm));
        let mut actor = params.actor.zeros_like();
        let mut critic = params.critic.zeros_like();
        let mut stats = UpdateStats::default();
        for g in &grads {
            actor.add_scaled(&g.actor, 1.0);
            critic.add_scaled(&g.critic, 1.0);
            stats.policy_loss += g.stats.policy_loss;
            stats.value_loss += g.stats.value_loss;
            stats.entropy += g.stats.entropy;
            stats.clip_fraction += g.stats.clip_fraction;
        }
        clip_global_norm(&mut actor, cfg.max_grad_norm);
        clip_global_norm(&mut critic, cfg.max_grad_norm);
        let applied = apply(params, opt, &actor, &critic);
        if !applied {
            total.skipped_batches += 1;
            log::warn!("skipping update: non-finite gradient");
            continue;
        }
        total.policy_loss += stats.policy_loss;
        total.value_loss += stats.value_loss;
        total.entropy += stats.entropy;
        total.clip_fraction += stats.clip_fraction;
        n_mb += 1.0;
    }
    if n_mb > 0.0 {
        total.policy_loss /= n_mb;
        total.value_loss /= n_mb;
        total.entropy /= n_mb;
        total.clip_fraction /= n_mb;
    }
    total
}

fn apply(params: &mut AgentParams, opt: &mut Optimizers, actor: &Net, critic: &Net) -> bool {
    if !actor.is_finite() || !critic.is_finite() {
        return false;
    }
    match (opt.actor.step(&mut params.actor, actor), opt.critic.step(&mut params.critic, critic)) {
        (Ok(()), Ok(())) => true,
        (Err(NnError::NonFiniteGradient(_)), _) | (_, Err(NnError::NonFiniteGradient(_))) => false,
        (Err(e), _) | (_, Err(e)) => panic!("optimizer layout error: {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(reward: f64, value: f64, done: bool) -> Step {
        Step { obs: vec![], mask: vec![], action: Some(0), logp: 0.0, value, reward, done, reset: false }
    }

    #[test]
    fn one_step_advantage() {
        // r = −1, v(s') = −3, v(s) = −5, γ = 1
        let (a, t) = compute_advantage(&[step(-1.0, -5.0, false), step(-1.0, -3.0, true)], 1.0, 0.0);
        assert_eq!(a[0], 1.0);
        assert_eq!(t[0], -4.0);
        // terminal: A = r − v(s)
        assert_eq!(a[1], 2.0);
    }

    #[test]
    fn exact_values_give_zero_advantage() {
        // chain with 3 steps to goal, γ = 0.9, step −1, goal +10
        let g: f64 = 0.9;
        let v2 = 10.0;
        let v1 = -1.0 + g * v2;
        let v0 = -1.0 + g * v1;
        let (a, _) = compute_advantage(&[step(-1.0, v0, false), step(-1.0, v1, false), step(10.0, v2, true)], g, 0.0);
        assert!(a.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn terminal_observations_are_skipped() {
        let mut term = step(0.0, 99.0, true);
        term.action = None;
        let (a, _) = compute_advantage(&[step(10.0, 4.0, true), term, step(10.0, 1.0, true)], 1.0, 0.0);
        assert_eq!(a, vec![6.0, 9.0]);
    }

    #[test]
    fn clip_arithmetic() {
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) - (-0.8)).abs() < 1e-12);
        assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
    }

    #[test]
    fn surrogate_gradient_vanishes_only_when_clipped() {
        assert_eq!(surrogate_dlogp(1.5, 1.0, 0.2), 0.0);
        assert_eq!(surrogate_dlogp(1.5, -1.0, 0.2), -1.5);
        assert_eq!(surrogate_dlogp(0.5, -1.0, 0.2), 0.0);
        assert_eq!(surrogate_dlogp(1.1, 2.0, 0.2), 2.2);
    }
}
