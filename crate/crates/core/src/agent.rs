//! Hierarchical learning stack: an outer-loop DQN picks the relays' binary
//! radio modes once per episode, an inner-loop DDPG controls the continuous
//! variables each epoch, and a model-based optimizer can inject
//! better-informed actions and target values into the DDPG updates.
//!
//! The optimizer path mirrors the learning variants compared in the
//! experiments: `ModelFree` never consults it, `Simplified` solves one conic
//! program at the actor's time split, and `FullOpt` runs the complete
//! polyblock lower-bound search every epoch.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::channel::cophase_passive;
use crate::env::{decode_action, encode_action, raw_action_len, Env};
use crate::error::{Error, Result};
use crate::nn::{adam_step, blend, Activation, AdamState, Grads, Mlp};
use crate::phy::HybridAction;
use crate::polyblock::{realize_action, LowerBoundSolver};

/// Which optimizer (if any) feeds the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    ModelFree,
    Simplified,
    FullOpt,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model_free" => Ok(TrainMode::ModelFree),
            "simplified" => Ok(TrainMode::Simplified),
            "full_opt" => Ok(TrainMode::FullOpt),
            other => Err(Error::Config(format!(
                "unknown mode '{}' (expected model_free|simplified|full_opt)",
                other
            ))),
        }
    }
}

impl TrainMode {
    pub fn label(&self) -> &'static str {
        match self {
            TrainMode::ModelFree => "model_free",
            TrainMode::Simplified => "simplified",
            TrainMode::FullOpt => "full_opt",
        }
    }
}

/// Learning hyperparameters.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub discount: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub dqn_lr: f64,
    pub hidden: usize,
    pub batch_size: usize,
    pub dqn_batch_size: usize,
    pub replay_capacity: usize,
    pub dqn_replay_capacity: usize,
    /// Gaussian exploration noise scale and per-episode decay factor.
    pub noise_sigma: f64,
    pub noise_decay: f64,
    /// Outer-loop epsilon schedule (linear decay over the given episodes).
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    /// DDPG target soft-update rate.
    pub tau: f64,
    /// DQN target hard-copy period (in training steps).
    pub dqn_sync_every: usize,
    /// Episode reward for the outer loop: mean of the last this-many epochs.
    pub outer_reward_window: usize,
    pub epochs_per_episode: usize,
    /// Rewards are divided by this inside the critics, keeping value targets
    /// near unit scale. Buffered rewards stay raw.
    pub reward_scale: f64,
    /// Global gradient-norm clip applied to every Adam step (0 disables).
    pub grad_clip: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            discount: 0.9,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            dqn_lr: 1e-3,
            hidden: 128,
            batch_size: 64,
            dqn_batch_size: 32,
            replay_capacity: 50_000,
            dqn_replay_capacity: 2_000,
            noise_sigma: 0.3,
            noise_decay: 0.995,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 200,
            tau: 0.005,
            dqn_sync_every: 100,
            outer_reward_window: 20,
            epochs_per_episode: 10,
            reward_scale: 16.0,
            grad_clip: 1.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Config(format!("discount {} outside (0,1)", self.discount)));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)]
        {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Config(format!("{} = {} outside [0,1]", name, eps)));
            }
        }
        if self.batch_size == 0 || self.dqn_batch_size == 0 || self.epochs_per_episode == 0 {
            return Err(Error::Config("batch sizes and episode length must be positive".into()));
        }
        if self.reward_scale <= 0.0 || self.grad_clip < 0.0 {
            return Err(Error::Config(
                "reward_scale must be > 0 and grad_clip >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One inner-loop replay record.
#[derive(Debug, Clone)]
pub struct TransitionSample {
    pub state: Vec<f64>,
    pub modes: Vec<bool>,
    pub raw_action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Optimization-driven target; present exactly when the optimizer's
    /// action was executed.
    pub optimizer_target: Option<f64>,
}

/// One outer-loop replay record.
#[derive(Debug, Clone)]
pub struct OuterSample {
    pub state: Vec<f64>,
    pub mode_index: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded FIFO with uniform without-replacement sampling.
#[derive(Debug)]
pub struct ReplayBuffer<T> {
    data: std::collections::VecDeque<T>,
    capacity: usize,
    rng: ChaCha12Rng,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        ReplayBuffer {
            data: std::collections::VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity: capacity.max(1),
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(item);
    }

    /// Uniform sample of `batch` distinct indices (all of them when the
    /// buffer is smaller than the batch).
    pub fn sample_indices(&mut self, batch: usize) -> Vec<usize> {
        let n = self.data.len();
        if n <= batch {
            return (0..n).collect();
        }
        // Partial Fisher-Yates over an index arena.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..batch {
            let j = i + (self.rng.random::<u64>() as usize) % (n - i);
            idx.swap(i, j);
        }
        idx.truncate(batch);
        idx
    }

    pub fn get(&self, i: usize) -> &T {
        &self.data[i]
    }
}

/// Little-endian bijection between mode indices and mode vectors
/// (`bit k` set means relay `k` is passive).
pub fn index_to_modes(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|k| (index >> k) & 1 == 1).collect()
}

pub fn modes_to_index(modes: &[bool]) -> usize {
    modes
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &m)| acc | ((m as usize) << k))
}

/// Epsilon-greedy mode selection over all `2^N` vectors, ties broken by the
/// lowest index.
pub fn dqn_select_modes(
    q_net: &Mlp,
    state: &[f64],
    epsilon: f64,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<bool>> {
    if n > 16 {
        return Err(Error::OutOfDomain(format!(
            "mode enumeration over {} relays (max 16)",
            n
        )));
    }
    let count = 1usize << n;
    if rng.random::<f64>() < epsilon {
        let pick = (rng.random::<u64>() as usize) % count;
        return Ok(index_to_modes(pick, n));
    }
    let q = q_net.forward(state)?;
    let out = q.output();
    let mut best = 0usize;
    for i in 1..count {
        if out[i] > out[best] {
            best = i;
        }
    }
    Ok(index_to_modes(best, n))
}

/// Actor forward plus iid Gaussian exploration noise.
pub fn ddpg_act(actor: &Mlp, state: &[f64], sigma: f64, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
    let out = actor.forward(state)?.output().to_vec();
    Ok(out
        .into_iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Merge rule: execute the optimizer's action (and store its target) only
/// when it strictly beats the candidate; ties keep the actor's action.
pub fn merge_targets(
    y_candidate: f64,
    y_optimizer: f64,
    a_candidate: HybridAction,
    a_optimizer: HybridAction,
) -> (HybridAction, Option<f64>) {
    if y_optimizer > y_candidate {
        (a_optimizer, Some(y_optimizer))
    } else {
        (a_candidate, None)
    }
}

/// Model-based proposal for the current state and mode choice: co-phase the
/// passive relays, solve the bound (full polyblock search or the one-shot
/// fixed-time program), and realize the solution as an executable action.
/// Returns the action and its throughput under the environment's power
/// policy.
pub fn optimized_proposal(
    env: &Env,
    modes: &[bool],
    fixed_t: Option<f64>,
    solver: &LowerBoundSolver,
) -> Result<(HybridAction, f64)> {
    let ch = &env.state().channels;
    let cfg = env.config();
    let phases = if modes.iter().any(|&m| m) {
        cophase_passive(ch, modes, cfg.gamma_max)?
    } else {
        vec![0.0; modes.len()]
    };
    let relay_cfg = crate::channel::RelayConfig {
        modes: modes.to_vec(),
        phases: phases.clone(),
        gamma_max: cfg.gamma_max,
    };
    let enh = crate::channel::enhance_channels(ch, &relay_cfg)?;
    let (t, w0, w1) = match fixed_t {
        Some(t) => {
            let (_, w0, w1) = solver.solve_fixed_t(&enh, &cfg.budget, t)?;
            (t, w0, w1)
        }
        None => {
            let res = solver.solve(&enh, &cfg.budget)?;
            (res.t_opt, res.w0_opt, res.w1_opt)
        }
    };
    let mut action = realize_action(&enh, &cfg.budget, modes, &phases, t, &w0, &w1);
    // Execution will re-grant powers by the battery policy; clear them so
    // the reward below is exactly what the environment would pay.
    action.relay_powers.clear();
    let reward = env.peek_reward(&action)?;
    Ok((action, reward))
}

/// The four-network hierarchical agent with its replay memories and
/// exploration schedules.
pub struct HybridAgent {
    pub config: AgentConfig,
    pub k: usize,
    pub n: usize,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Mlp,
    pub critic_target: Mlp,
    pub q_net: Mlp,
    pub q_target: Mlp,
    pub adam_actor: AdamState,
    pub adam_critic: AdamState,
    pub adam_q: AdamState,
    pub buffer: ReplayBuffer<TransitionSample>,
    pub outer_buffer: ReplayBuffer<OuterSample>,
    rng: ChaCha12Rng,
    pub episodes_done: usize,
    pub ddpg_train_steps: usize,
    pub dqn_train_steps: usize,
}

/// Per-episode record streamed to the harness.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mode_index: usize,
    pub rewards: Vec<f64>,
    pub override_count: usize,
    pub critic_loss: f64,
    pub dqn_loss: Option<f64>,
}

impl EpisodeRecord {
    pub fn reward_mean(&self) -> f64 {
        if self.rewards.is_empty() {
            return 0.0;
        }
        self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
    }

    pub fn reward_std(&self) -> f64 {
        if self.rewards.len() < 2 {
            return 0.0;
        }
        let mean = self.reward_mean();
        (self.rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
            / self.rewards.len() as f64)
            .sqrt()
    }
}

impl HybridAgent {
    pub fn new(feature_len: usize, k: usize, n: usize, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if n > 16 {
            return Err(Error::OutOfDomain("at most 16 relays supported".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let h = config.hidden;
        let raw_len = raw_action_len(k, n);
        let relu2 = [Activation::Relu, Activation::Relu, Activation::Identity];
        let actor = Mlp::new(&[feature_len, h, h, raw_len], &relu2, &mut rng);
        let critic = Mlp::new(&[feature_len + n + raw_len, h, h, 1], &relu2, &mut rng);
        let q_net = Mlp::new(&[feature_len, h, h, 1 << n], &relu2, &mut rng);
        let buffer_seed = rng.random::<u64>();
        let outer_seed = rng.random::<u64>();
        Ok(HybridAgent {
            adam_actor: AdamState::new(&actor, config.actor_lr),
            adam_critic: AdamState::new(&critic, config.critic_lr),
            adam_q: AdamState::new(&q_net, config.dqn_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            q_target: q_net.clone(),
            actor,
            critic,
            q_net,
            buffer: ReplayBuffer::new(config.replay_capacity, buffer_seed),
            outer_buffer: ReplayBuffer::new(config.dqn_replay_capacity, outer_seed),
            rng,
            episodes_done: 0,
            ddpg_train_steps: 0,
            dqn_train_steps: 0,
            config,
            k,
            n,
        })
    }

    pub fn current_sigma(&self) -> f64 {
        self.config.noise_sigma * self.config.noise_decay.powi(self.episodes_done as i32)
    }

    pub fn current_epsilon(&self) -> f64 {
        let c = &self.config;
        if c.epsilon_decay_episodes == 0 {
            return c.epsilon_end;
        }
        let frac = (self.episodes_done as f64 / c.epsilon_decay_episodes as f64).min(1.0);
        c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac
    }

    fn critic_input(&self, state: &[f64], modes: &[bool], raw: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(state.len() + modes.len() + raw.len());
        input.extend_from_slice(state);
        input.extend(modes.iter().map(|&m| m as u8 as f64));
        input.extend_from_slice(raw);
        input
    }

    /// One DDPG update on a sampled mini-batch: TD regression for the critic
    /// (optimizer-flagged samples take the larger of the bootstrap and the
    /// optimizer-informed target), deterministic policy gradient for the
    /// actor, then soft target updates. Returns `(critic_loss, mean_q)`.
    pub fn ddpg_train_step(&mut self) -> Result<(f64, f64)> {
        let idx = self.buffer.sample_indices(self.config.batch_size);
        if idx.is_empty() {
            return Ok((0.0, 0.0));
        }
        let gamma = self.config.discount;
        let scale = self.config.reward_scale;
        let inv = 1.0 / idx.len() as f64;

        // Critic regression on reward-scaled targets.
        let mut critic_grads = Grads::zeros_like(&self.critic);
        let mut loss = 0.0;
        for &i in &idx {
            let s = self.buffer.get(i).clone();
            let a_next = self.actor_target.forward(&s.next_state)?.output().to_vec();
            let q_next = self
                .critic_target
                .forward(&self.critic_input(&s.next_state, &s.modes, &a_next))?
                .output()[0];
            let bootstrap_tail = if s.done { 0.0 } else { gamma * q_next };
            let mut y = s.reward / scale + bootstrap_tail;
            if let Some(target) = s.optimizer_target {
                y = y.max(target / scale + bootstrap_tail);
            }
            let cache = self
                .critic
                .forward(&self.critic_input(&s.state, &s.modes, &s.raw_action))?;
            let q = cache.output()[0];
            loss += (q - y) * (q - y) * inv;
            let (g, _) = self.critic.backward(&cache, &[2.0 * (q - y) * inv])?;
            critic_grads.add(&g);
        }
        critic_grads.clip_global_norm(self.config.grad_clip);
        adam_step(&mut self.critic, &critic_grads, &mut self.adam_critic)?;

        // Deterministic policy gradient: ascend mean Q(s, pi(s)).
        let (mut actor_grads, mean_q) = self.actor_policy_gradients(&idx)?;
        actor_grads.clip_global_norm(self.config.grad_clip);
        adam_step(&mut self.actor, &actor_grads, &mut self.adam_actor)?;

        blend(&mut self.actor_target, &self.actor, self.config.tau)?;
        blend(&mut self.critic_target, &self.critic, self.config.tau)?;
        self.ddpg_train_steps += 1;
        Ok((loss, mean_q))
    }

    /// Gradients of `-mean Q(s, pi(s))` w.r.t. the actor parameters, chained
    /// through the critic's input gradient.
    fn actor_policy_gradients(&self, idx: &[usize]) -> Result<(Grads, f64)> {
        let inv = 1.0 / idx.len().max(1) as f64;
        let mut grads = Grads::zeros_like(&self.actor);
        let mut mean_q = 0.0;
        let state_len = self.actor.in_dim();
        for &i in idx {
            let s = self.buffer.get(i);
            let actor_cache = self.actor.forward(&s.state)?;
            let a = actor_cache.output().to_vec();
            let critic_cache = self.critic.forward(&self.critic_input(&s.state, &s.modes, &a))?;
            mean_q += critic_cache.output()[0] * inv;
            let (_, dq_dinput) = self.critic.backward(&critic_cache, &[1.0])?;
            // Slice of the critic's input gradient that belongs to the raw
            // action block.
            let dq_da = &dq_dinput[state_len + s.modes.len()..];
            let dout: Vec<f64> = dq_da.iter().map(|g| -g * inv).collect();
            let (g, _) = self.actor.backward(&actor_cache, &dout)?;
            grads.add(&g);
        }
        Ok((grads, mean_q))
    }

    /// One DQN update: TD targets from the hard-synced target head, MSE on
    /// the taken mode index. Returns the batch loss.
    pub fn dqn_train_step(&mut self) -> Result<f64> {
        let idx = self.outer_buffer.sample_indices(self.config.dqn_batch_size);
        if idx.is_empty() {
            return Ok(0.0);
        }
        let gamma = self.config.discount;
        let scale = self.config.reward_scale;
        let inv = 1.0 / idx.len() as f64;
        let mut grads = Grads::zeros_like(&self.q_net);
        let mut loss = 0.0;
        for &i in &idx {
            let s = self.outer_buffer.get(i).clone();
            let next_q = self.q_target.forward(&s.next_state)?;
            let best_next = next_q
                .output()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let y = s.reward / scale + gamma * best_next;
            let cache = self.q_net.forward(&s.state)?;
            let q = cache.output()[s.mode_index];
            loss += (q - y) * (q - y) * inv;
            let mut dout = vec![0.0; self.q_net.out_dim()];
            dout[s.mode_index] = 2.0 * (q - y) * inv;
            let (g, _) = self.q_net.backward(&cache, &dout)?;
            grads.add(&g);
        }
        grads.clip_global_norm(self.config.grad_clip);
        adam_step(&mut self.q_net, &grads, &mut self.adam_q)?;
        self.dqn_train_steps += 1;
        if self.dqn_train_steps % self.config.dqn_sync_every == 0 {
            blend(&mut self.q_target, &self.q_net, 1.0)?;
        }
        Ok(loss)
    }

    /// Runs one full episode: outer mode selection, then per-epoch
    /// act / merge / step / buffer / train. Deterministic per
    /// `(agent seed, episode_seed)`.
    pub fn run_episode(
        &mut self,
        env: &mut Env,
        mode: TrainMode,
        solver: &LowerBoundSolver,
        episode_seed: u64,
    ) -> Result<EpisodeRecord> {
        env.reset(episode_seed);
        let mut feats = env.encode_state();
        let episode_start = feats.clone();
        let epsilon = self.current_epsilon();
        let sigma = self.current_sigma();
        let modes = dqn_select_modes(&self.q_net, &feats, epsilon, self.n, &mut self.rng)?;
        let mode_index = modes_to_index(&modes);

        let epochs = self.config.epochs_per_episode;
        let mut rewards = Vec::with_capacity(epochs);
        let mut override_count = 0usize;
        let mut critic_loss_acc = 0.0;
        let mut trained = 0usize;

        for epoch in 0..epochs {
            let raw_c = ddpg_act(&self.actor, &feats, sigma, &mut self.rng)?;
            let a_c = decode_action(&raw_c, &modes, self.k)?;
            let r_c = env.peek_reward(&a_c)?;

            let (executed, raw_executed, override_target) = if mode == TrainMode::ModelFree {
                (a_c, raw_c, None)
            } else {
                let fixed_t = match mode {
                    TrainMode::Simplified => Some(a_c.t),
                    _ => None,
                };
                match optimized_proposal(env, &modes, fixed_t, solver) {
                    Ok((a_o, r_opt)) => {
                        let (chosen, target) = merge_targets(r_c, r_opt, a_c, a_o);
                        let raw = match target {
                            Some(_) => encode_action(&chosen, self.k),
                            None => raw_c,
                        };
                        (chosen, raw, target)
                    }
                    // Solver trouble: fall back to the actor's action.
                    Err(_) => (a_c, raw_c, None),
                }
            };
            if override_target.is_some() {
                override_count += 1;
            }

            let out = env.step(&executed)?;
            let next_feats = env.encode_state();
            self.buffer.push(TransitionSample {
                state: feats,
                modes: modes.clone(),
                raw_action: raw_executed,
                reward: out.reward,
                next_state: next_feats.clone(),
                done: epoch + 1 == epochs,
                optimizer_target: override_target,
            });
            rewards.push(out.reward);
            feats = next_feats;

            if self.buffer.len() >= self.config.batch_size {
                let (l, _) = self.ddpg_train_step()?;
                critic_loss_acc += l;
                trained += 1;
            }
        }

        // Outer-loop transition: the episode reward is the mean of the final
        // window, approximating the inner loop's converged value.
        let window = self.config.outer_reward_window.min(rewards.len()).max(1);
        let outer_reward =
            rewards[rewards.len() - window..].iter().sum::<f64>() / window as f64;
        self.outer_buffer.push(OuterSample {
            state: episode_start,
            mode_index,
            reward: outer_reward,
            next_state: feats,
        });
        let dqn_loss = if self.outer_buffer.len() >= self.config.dqn_batch_size {
            Some(self.dqn_train_step()?)
        } else {
            None
        };

        let record = EpisodeRecord {
            episode: self.episodes_done,
            mode_index,
            rewards,
            override_count,
            critic_loss: if trained > 0 {
                critic_loss_acc / trained as f64
            } else {
                0.0
            },
            dqn_loss,
        };
        self.episodes_done += 1;
        Ok(record)
    }
}
