//! Maskable proximal policy optimization, written out by hand.
//!
//! Actor and critic are separate tanh MLPs over the environment observation.
//! Illegal actions get a logit of [`MASK_LOGIT`] before the softmax, so they
//! carry exactly zero probability and zero gradient. Advantages come from
//! GAE(λ) and the update minimizes the clipped surrogate plus a value
//! regression term minus an entropy bonus, with Adam on each network.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionMask, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::nn::{Adam, LayerData, Mlp};
use crate::petrinet::Time;
use crate::policies::{run_episode, Policy};
use crate::schedule::Schedule;

/// Logit given to masked actions; far enough below any real logit that the
/// softmax underflows to exactly zero, without the NaNs that -inf invites.
pub const MASK_LOGIT: f64 = -1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl NetworkParams {
    /// Two hidden layers of width `hidden` for both networks.
    pub fn new(input_len: usize, num_actions: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            actor: Mlp::new(&[input_len, hidden, hidden, num_actions], 0.01, &mut rng)?,
            critic: Mlp::new(&[input_len, hidden, hidden, 1], 1.0, &mut rng)?,
        })
    }

    pub fn zeros(input_len: usize, num_actions: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            actor: Mlp::zeros(&[input_len, hidden, hidden, num_actions])?,
            critic: Mlp::zeros(&[input_len, hidden, hidden, 1])?,
        })
    }

    pub fn input_len(&self) -> usize {
        self.actor.input_len()
    }

    pub fn num_actions(&self) -> usize {
        self.actor.output_len()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }
}

/// Logits over the actions and the state value.
pub fn forward(params: &NetworkParams, observation: &[f64]) -> Result<(Vec<f64>, f64)> {
    let logits = params.actor.forward(observation)?;
    let value = params.critic.forward(observation)?[0];
    Ok((logits, value))
}

/// Log-probabilities under the masked softmax; masked entries are -inf.
fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            expected: logits.len(),
            found: mask.len(),
        });
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptyMask);
    }
    let masked: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &on)| if on { z } else { MASK_LOGIT })
        .collect();
    let max = masked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = masked.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(masked
        .iter()
        .zip(mask)
        .map(|(z, &on)| if on { z - max - log_sum } else { f64::NEG_INFINITY })
        .collect())
}

/// Action probabilities with masked entries forced to zero.
pub fn masked_distribution(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            expected: logits.len(),
            found: mask.len(),
        });
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptyMask);
    }
    let masked: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &on)| if on { z } else { MASK_LOGIT })
        .collect();
    let max = masked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = masked.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Highest-probability enabled action; ties go to the lowest index.
pub fn greedy_action(logits: &[f64], mask: &[bool]) -> Result<usize> {
    if logits.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            expected: logits.len(),
            found: mask.len(),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (&z, &on)) in logits.iter().zip(mask).enumerate() {
        if on && best.map_or(true, |(_, b)| z > b) {
            best = Some((i, z));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyMask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    /// Log-probability of `action` under the policy that collected it.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// The episode ended after this step.
    pub done: bool,
}

/// Generalized advantage estimates and returns for a trajectory that may
/// span several episodes. `bootstrap` is the value of the state after the
/// last transition, used only if that transition is not terminal.
pub fn compute_gae(trajectory: &[Transition], bootstrap: f64, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = trajectory.len();
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let tr = &trajectory[t];
        let next_value = if t + 1 < n { trajectory[t + 1].value } else { bootstrap };
        let live = if tr.done { 0.0 } else { 1.0 };
        let delta = tr.reward + gamma * next_value * live - tr.value;
        running = delta + gamma * lambda * live * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(trajectory).map(|(a, tr)| a + tr.value).collect();
    Ok((advantages, returns))
}

/// Rescales to mean 0 and standard deviation 1. A constant vector becomes
/// all zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Per-sample clipped surrogate `min(ρÂ, clip(ρ, 1-ε, 1+ε)Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Decision steps to collect in total.
    pub total_steps: u64,
    pub rollout_len: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub learning_rate: f64,
    pub hidden: usize,
    pub seed: u64,
    /// Rescale each minibatch gradient to at most this global norm.
    pub max_grad_norm: Option<f64>,
    /// Cut episodes off after this many decision steps.
    pub max_episode_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            rollout_len: 2048,
            epochs: 10,
            minibatch_size: 64,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.01,
            learning_rate: 3e-4,
            hidden: 64,
            seed: 0,
            max_grad_norm: None,
            max_episode_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must lie in (0, 1]");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if self.total_steps == 0 || self.rollout_len == 0 || self.epochs == 0 || self.minibatch_size == 0 || self.hidden == 0 {
            return bad("sizes must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.vf_coef.is_finite() || !self.ent_coef.is_finite() {
            return bad("learning_rate must be positive and coefficients finite");
        }
        if self.max_grad_norm.is_some_and(|g| !(g > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Transitions with their advantages and returns.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Negated mean clipped surrogate.
    pub policy_loss: f64,
    /// Mean squared error of the value against the return.
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean of `(ρ - 1) - ln ρ`, an estimate of KL(old || new).
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// `policy_loss + c1 * value_loss - c_ent * entropy`.
    pub loss: f64,
}

/// Gradients of the total loss, laid out like the networks' parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.actor.iter().chain(&self.critic).map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Loss of `params` on the samples `indices` of `batch` (advantages used as
/// given) and its exact gradient.
pub fn loss_and_gradients(params: &NetworkParams, batch: &Batch, indices: &[usize], config: &TrainConfig) -> Result<(LossReport, Gradients)> {
    if indices.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let b = indices.len() as f64;
    let eps = config.clip_epsilon;
    let mut grads = Gradients {
        actor: vec![0.0; params.actor.num_params()],
        critic: vec![0.0; params.critic.num_params()],
    };
    let mut report = LossReport::default();
    let mut clipped = 0usize;

    for &i in indices {
        let tr = &batch.transitions[i];
        let adv = batch.advantages[i];
        let ret = batch.returns[i];

        let trace = params.actor.trace(&tr.observation)?;
        let logp = masked_log_softmax(trace.output(), &tr.mask)?;
        let logp_a = logp[tr.action];
        let ratio = (logp_a - tr.log_prob).exp();
        let surr_unclipped = ratio * adv;
        let surrogate = clipped_surrogate(ratio, adv, eps);
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }

        let mut entropy = 0.0;
        for &lp in logp.iter().filter(|lp| lp.is_finite()) {
            entropy -= lp.exp() * lp;
        }

        report.policy_loss -= surrogate / b;
        report.entropy += entropy / b;
        report.approx_kl += ((ratio - 1.0) - (logp_a - tr.log_prob)) / b;

        // d(-surrogate/b)/d(log p_a): only the unclipped branch carries gradient.
        let g_logp = if surr_unclipped <= surrogate { -ratio * adv / b } else { 0.0 };
        let mut g_logits = vec![0.0; logp.len()];
        for (k, &lp) in logp.iter().enumerate() {
            if !lp.is_finite() {
                continue;
            }
            let p = lp.exp();
            let indicator = if k == tr.action { 1.0 } else { 0.0 };
            // policy term, then -c_ent * H / b with dH/dz_k = -p_k (log p_k + H)
            g_logits[k] = g_logp * (indicator - p) + config.ent_coef / b * p * (lp + entropy);
        }
        params.actor.backward(&trace, &g_logits, &mut grads.actor);

        let vtrace = params.critic.trace(&tr.observation)?;
        let value = vtrace.output()[0];
        let err = value - ret;
        report.value_loss += err * err / b;
        params.critic.backward(&vtrace, &[2.0 * config.vf_coef * err / b], &mut grads.critic);
    }

    report.clip_fraction = clipped as f64 / b;
    report.loss = report.policy_loss + config.vf_coef * report.value_loss - config.ent_coef * report.entropy;
    Ok((report, grads))
}

/// One Adam optimizer per network.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub actor: Adam,
    pub critic: Adam,
}

impl Optimizer {
    pub fn new(params: &NetworkParams, learning_rate: f64) -> Self {
        Self {
            actor: Adam::new(params.actor.num_params(), learning_rate),
            critic: Adam::new(params.critic.num_params(), learning_rate),
        }
    }
}

/// Several epochs of minibatch descent on one batch. Advantages are
/// normalized over the whole batch first. Returns the loss statistics
/// averaged over all minibatches, each measured before its step.
pub fn ppo_update(
    params: &mut NetworkParams,
    optimizer: &mut Optimizer,
    batch: &Batch,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let view = Batch {
        transitions: batch.transitions.clone(),
        advantages: normalize(&batch.advantages),
        returns: batch.returns.clone(),
    };

    let mut indices: Vec<usize> = (0..view.len()).collect();
    let mut total = LossReport::default();
    let mut count = 0.0;
    for _ in 0..config.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(config.minibatch_size) {
            let (report, mut grads) = loss_and_gradients(params, &view, chunk, config)?;
            if !report.loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("{report:?}")));
            }
            if let Some(max_norm) = config.max_grad_norm {
                let norm = grads.norm();
                if norm > max_norm {
                    let scale = max_norm / norm;
                    grads.actor.iter_mut().chain(grads.critic.iter_mut()).for_each(|g| *g *= scale);
                }
            }
            optimizer.actor.step(params.actor.params_mut(), &grads.actor);
            optimizer.critic.step(params.critic.params_mut(), &grads.critic);
            if !params.is_finite() {
                return Err(Error::NonFiniteLoss(format!("parameters diverged after step with {report:?}")));
            }
            total.policy_loss += report.policy_loss;
            total.value_loss += report.value_loss;
            total.entropy += report.entropy;
            total.approx_kl += report.approx_kl;
            total.clip_fraction += report.clip_fraction;
            total.loss += report.loss;
            count += 1.0;
        }
    }
    Ok(LossReport {
        policy_loss: total.policy_loss / count,
        value_loss: total.value_loss / count,
        entropy: total.entropy / count,
        approx_kl: total.approx_kl / count,
        clip_fraction: total.clip_fraction / count,
        loss: total.loss / count,
    })
}

/// One line of the training metrics log, written after each update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Decision steps collected so far.
    pub step: u64,
    /// Mean length of the last (up to) 100 finished episodes.
    pub ep_len: f64,
    /// Mean total reward of the same episodes.
    pub ep_rew: f64,
    pub kl: f64,
    pub entropy: f64,
    pub vf_loss: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Decision steps collected when the episode ended.
    pub step: u64,
    pub length: u64,
    pub reward: f64,
    pub makespan: Time,
    /// False when the episode was cut off by `max_episode_steps`.
    pub completed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<MetricsRow>,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<LossReport>,
}

const EPISODE_WINDOW: usize = 100;

impl TrainLog {
    pub fn episode_lengths(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.length as f64).collect()
    }

    /// CSV with columns `step,ep_len,ep_rew,kl,entropy,vf_loss,loss`.
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn window_means(&self) -> (f64, f64) {
        let start = self.episodes.len().saturating_sub(EPISODE_WINDOW);
        let recent = &self.episodes[start..];
        if recent.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let n = recent.len() as f64;
        (
            recent.iter().map(|e| e.length as f64).sum::<f64>() / n,
            recent.iter().map(|e| e.reward).sum::<f64>() / n,
        )
    }
}

/// Chooses from the masked distribution, either greedily or by sampling.
#[derive(Debug, Clone)]
pub struct Agent {
    params: NetworkParams,
    greedy: bool,
    rng: ChaCha8Rng,
}

impl Agent {
    /// Deterministic argmax over the legal actions.
    pub fn greedy(params: NetworkParams) -> Self {
        Self {
            params,
            greedy: true,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn sampling(params: NetworkParams, seed: u64) -> Self {
        Self {
            params,
            greedy: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }
}

impl Policy for Agent {
    fn act(&mut self, env: &Environment, mask: &ActionMask) -> Result<usize> {
        let obs = env.observe();
        let logits = self.params.actor.forward(obs.as_slice())?;
        // Greedy deployment always respects the guards; an argmax on an
        // illegal action would otherwise repeat forever.
        if self.greedy || env.config().masking {
            if self.greedy {
                return greedy_action(&logits, mask.bits());
            }
            let probs = masked_distribution(&logits, mask.bits())?;
            return sample(&probs, &mut self.rng);
        }
        let probs = masked_distribution(&logits, ActionMask::all(logits.len()).bits())?;
        sample(&probs, &mut self.rng)
    }
}

fn sample(probs: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
    let dist = WeightedIndex::new(probs).map_err(|_| Error::EmptyMask)?;
    Ok(dist.sample(rng))
}

/// Greedy rollout of a trained agent; the schedule has been validated.
pub fn evaluate(params: &NetworkParams, instance: &Instance, env_config: &EnvConfig) -> Result<Schedule> {
    let mut agent = Agent::greedy(params.clone());
    Ok(run_episode(&mut agent, instance, env_config)?.schedule)
}

/// Checks that every instance fits one network shape and returns the
/// capacity to train at.
fn family_capacity(instances: &[Instance], env_config: &EnvConfig) -> Result<usize> {
    let Some(first) = instances.first() else {
        return Err(Error::InvalidConfig("no training instances".into()));
    };
    if let Some(other) = instances.iter().find(|i| i.num_machines() != first.num_machines()) {
        return Err(Error::InvalidConfig(format!(
            "training instances mix {} and {} machines",
            first.num_machines(),
            other.num_machines()
        )));
    }
    let widest = instances.iter().map(Instance::num_jobs).max().unwrap_or(0);
    Ok(env_config.capacity.unwrap_or(widest))
}

/// Trains on one instance, or round-robin over a family sharing a machine
/// count; see [`train_with_progress`].
pub fn train(instances: &[Instance], env_config: &EnvConfig, config: &TrainConfig) -> Result<(NetworkParams, TrainLog)> {
    train_with_progress(instances, env_config, config, |_| {})
}

/// Collects `rollout_len` decision steps per update until `total_steps`
/// are spent, calling `on_update` with each new metrics row. The run is
/// reproducible from `config.seed`.
pub fn train_with_progress<F>(
    instances: &[Instance],
    env_config: &EnvConfig,
    config: &TrainConfig,
    mut on_update: F,
) -> Result<(NetworkParams, TrainLog)>
where
    F: FnMut(&MetricsRow),
{
    config.validate()?;
    env_config.validate()?;
    let capacity = family_capacity(instances, env_config)?;
    let env_config = env_config.clone().with_capacity(capacity);

    let mut next_instance = 0;
    let make_env = |next: &mut usize| {
        let inst = instances[*next % instances.len()].clone();
        *next += 1;
        Environment::new(inst, env_config.clone())
    };
    let mut env = make_env(&mut next_instance)?;

    let mut params = NetworkParams::new(env.observation_len(), env.num_actions(), config.hidden, config.seed)?;
    let mut optimizer = Optimizer::new(&params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut log = TrainLog::default();

    let mut step = 0u64;
    let mut ep_len = 0u64;
    let mut ep_rew = 0.0;
    let full_mask = ActionMask::all(env.num_actions());

    while step < config.total_steps {
        let budget = (config.total_steps - step).min(config.rollout_len as u64) as usize;
        let mut transitions = Vec::with_capacity(budget);
        for _ in 0..budget {
            let obs = env.observe();
            let mask = if env_config.masking { env.action_mask() } else { full_mask.clone() };
            let (logits, value) = forward(&params, obs.as_slice())?;
            let logp = masked_log_softmax(&logits, mask.bits())?;
            let probs: Vec<f64> = logp.iter().map(|lp| lp.exp()).collect();
            let action = sample(&probs, &mut rng)?;
            let result = env.step(action)?;
            step += 1;
            ep_len += 1;
            ep_rew += result.reward;

            let truncated = config.max_episode_steps.is_some_and(|cap| ep_len >= cap);
            let done = result.terminated;
            transitions.push(Transition {
                observation: obs.0,
                mask: mask.bits().to_vec(),
                action,
                log_prob: logp[action],
                reward: result.reward,
                value,
                done,
            });
            if done || truncated {
                if truncated && !done {
                    // bootstrap the cut-off tail from the value of where it stopped
                    let (_, tail) = forward(&params, env.observe().as_slice())?;
                    let last = transitions.last_mut().expect("just pushed");
                    last.reward += config.gamma * tail;
                    last.done = true;
                }
                log.episodes.push(EpisodeRecord {
                    step,
                    length: ep_len,
                    reward: ep_rew,
                    makespan: env.clock(),
                    completed: done,
                });
                ep_len = 0;
                ep_rew = 0.0;
                env = make_env(&mut next_instance)?;
            }
        }

        let bootstrap = if transitions.last().is_some_and(|t| t.done) {
            0.0
        } else {
            forward(&params, env.observe().as_slice())?.1
        };
        let (advantages, returns) = compute_gae(&transitions, bootstrap, config.gamma, config.gae_lambda)?;
        let batch = Batch {
            transitions,
            advantages,
            returns,
        };
        let report = ppo_update(&mut params, &mut optimizer, &batch, config, &mut rng)?;
        let (mean_len, mean_rew) = log.window_means();
        let row = MetricsRow {
            step,
            ep_len: mean_len,
            ep_rew: mean_rew,
            kl: report.approx_kl,
            entropy: report.entropy,
            vf_loss: report.value_loss,
            loss: report.loss,
        };
        on_update(&row);
        log.rows.push(row);
        log.updates.push(report);
    }
    Ok((params, log))
}

/// On-disk form of trained parameters: layer shapes with row-major weights,
/// plus the environment settings the networks were shaped for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub env: EnvConfig,
    pub actor: Vec<LayerData>,
    pub critic: Vec<LayerData>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(params: &NetworkParams, env: &EnvConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            env: env.clone(),
            actor: params.actor.to_layers(),
            critic: params.critic.to_layers(),
        }
    }

    pub fn params(&self) -> Result<NetworkParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported checkpoint version {}", self.version)));
        }
        let params = NetworkParams {
            actor: Mlp::from_layers(&self.actor)?,
            critic: Mlp::from_layers(&self.critic)?,
        };
        if params.critic.input_len() != params.actor.input_len() || params.critic.output_len() != 1 {
            return Err(Error::InvalidConfig("actor and critic shapes disagree".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(reward: f64, value: f64, done: bool) -> Transition {
        Transition {
            observation: vec![0.0],
            mask: vec![true],
            action: 0,
            log_prob: 0.0,
            reward,
            value,
            done,
        }
    }

    #[test]
    fn zero_weights_give_equal_logits() {
        let p = NetworkParams::zeros(5, 4, 8).unwrap();
        let (logits, value) = forward(&p, &[0.3, 1.0, -1.0, 0.0, 2.0]).unwrap();
        assert!(logits.iter().all(|&z| z == logits[0]));
        assert_eq!(value, 0.0);
    }

    #[test]
    fn forward_is_pure() {
        let p = NetworkParams::new(3, 2, 4, 7).unwrap();
        assert_eq!(forward(&p, &[0.1, 0.2, 0.3]).unwrap(), forward(&p, &[0.1, 0.2, 0.3]).unwrap());
        assert!(matches!(forward(&p, &[0.1]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn masked_distribution_examples() {
        assert_eq!(masked_distribution(&[0.0, 0.0], &[true, false]).unwrap(), vec![1.0, 0.0]);
        let p = masked_distribution(&[1.0, 1.0, 1.0], &[true; 3]).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(masked_distribution(&[1.0], &[false]), Err(Error::EmptyMask)));
        // huge logits do not overflow and a masked huge logit stays zero
        let p = masked_distribution(&[1e300, 5.0, 700.0], &[false, true, true]).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_respects_mask() {
        assert_eq!(greedy_action(&[5.0, 1.0, 2.0], &[false, true, true]).unwrap(), 2);
        assert_eq!(greedy_action(&[1.0, 1.0], &[true, true]).unwrap(), 0);
    }

    #[test]
    fn gae_examples() {
        let (a, r) = compute_gae(&[tr(1.0, 0.0, true)], 0.0, 0.99, 0.95).unwrap();
        assert_eq!((a[0], r[0]), (1.0, 1.0));

        // lambda = 0: one-step TD errors
        let traj = [tr(1.0, 0.5, false), tr(2.0, 0.25, false)];
        let (a, _) = compute_gae(&traj, 3.0, 0.9, 1e-300).unwrap();
        assert!((a[0] - (1.0 + 0.9 * 0.25 - 0.5)).abs() < 1e-12);
        assert!((a[1] - (2.0 + 0.9 * 3.0 - 0.25)).abs() < 1e-12);

        // gamma = lambda = 1, V = 0: reward-to-go, reset at episode ends
        let traj = [tr(1.0, 0.0, false), tr(2.0, 0.0, true), tr(4.0, 0.0, false)];
        let (a, r) = compute_gae(&traj, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![3.0, 2.0, 4.0]);
        assert_eq!(r, a);

        assert!(matches!(compute_gae(&[], 0.0, 0.9, 0.9), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn surrogate_examples() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-12);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_constant_is_zero() {
        assert_eq!(normalize(&[2.0, 2.0]), vec![0.0, 0.0]);
        let n = normalize(&[1.0, 2.0, 3.0]);
        assert!(n.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let cfg = TrainConfig { gamma: 0.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { clip_epsilon: 1.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = NetworkParams::new(4, 3, 5, 1).unwrap();
        let ck = Checkpoint::new(&p, &EnvConfig::default().with_capacity(2));
        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(back.params().unwrap(), p);
        assert_eq!(back.actor[0].inputs, 4);
        assert_eq!(back.actor[0].outputs, 5);
        assert_eq!(back.actor[0].weights.len(), 20);
    }
}
