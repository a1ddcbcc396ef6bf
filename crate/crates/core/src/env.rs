//! Episodic MDP around the physical layer: block-fading channel draws,
//! per-relay battery dynamics, and reward emission.
//!
//! The state carries the *raw* channels (the enhanced ones depend on the
//! agent's own mode choice) plus each relay's stored energy. Every epoch the
//! environment executes one slot: harvest, two hops, energy bookkeeping,
//! then a fresh fading block for the next epoch.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::channel::{
    db_to_linear, enhance_channels, generate_channels, ChannelRealization, PathLossModel,
    RelayConfig, Topology,
};
use crate::error::{Error, Result};
use crate::numerics::CVector;
use crate::phy::{power_budget, throughput, HybridAction, LinkBudget, T_MIN};

/// Environment parameters.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub topology: Topology,
    pub path_loss: PathLossModel,
    pub budget: LinkBudget,
    /// Reflection magnitude of passive relays.
    pub gamma_max: f64,
    /// Battery capacity (normalized energy units).
    pub e_max: f64,
    /// Initial battery level at reset.
    pub e_init: f64,
    /// Standby energy a passive relay burns per slot.
    pub passive_standby: f64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.path_loss.validate()?;
        self.budget.validate()?;
        if self.e_max <= 0.0 || self.e_init < 0.0 || self.e_init > self.e_max {
            return Err(Error::Config(format!(
                "battery bounds: e_init {} / e_max {}",
                self.e_init, self.e_max
            )));
        }
        if self.passive_standby < 0.0 {
            return Err(Error::Config("passive standby power must be >= 0".into()));
        }
        Ok(())
    }
}

/// One MDP state: the current fading block plus battery levels.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub channels: ChannelRealization,
    pub energy: Vec<f64>,
    pub epoch: u64,
}

/// Outcome of one executed slot.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    /// Per-relay harvested energy this slot (zero for passive relays).
    pub harvested: Vec<f64>,
    /// Per-relay energy spent this slot (`p_n t` active, standby passive).
    pub spent: Vec<f64>,
    /// Powers actually granted to the active relays.
    pub powers: Vec<f64>,
}

/// Feature vector length: `2K + 2KN + 2N + N(N-1) + N`.
pub fn feature_len(k: usize, n: usize) -> usize {
    2 * k + 2 * k * n + 2 * n + n * (n - 1).max(0) + n
}

/// Channel-feature normalizer: the one-meter reference amplitude rounded to
/// a power of two. Dividing by a power of two is exact in binary floating
/// point, so the encoding stays invertible bit-for-bit while the network
/// inputs live near unit scale.
pub fn channel_feature_scale(path_loss: &PathLossModel) -> f64 {
    let ref_amplitude = db_to_linear((-path_loss.unit_loss_db - path_loss.noise_dbm) / 2.0);
    2f64.powi(ref_amplitude.log2().round() as i32)
}

pub struct Env {
    cfg: EnvConfig,
    rng: ChaCha12Rng,
    state: EnvState,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let channels = generate_channels(&cfg.topology, &cfg.path_loss, 0);
        let energy = vec![cfg.e_init; cfg.topology.num_relays()];
        Ok(Env {
            rng: ChaCha12Rng::seed_from_u64(0),
            state: EnvState {
                channels,
                energy,
                epoch: 0,
            },
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn antennas(&self) -> usize {
        self.cfg.topology.antennas
    }

    pub fn num_relays(&self) -> usize {
        self.cfg.topology.num_relays()
    }

    /// Replaces the current fading block (external bindings and tests
    /// evaluate caller-supplied channels this way). Batteries and the epoch
    /// counter are untouched.
    pub fn set_channels(&mut self, channels: ChannelRealization) -> Result<()> {
        if channels.antennas() != self.antennas() || channels.num_relays() != self.num_relays() {
            return Err(Error::DimensionMismatch(format!(
                "channels for K={} N={} in a K={} N={} environment",
                channels.antennas(),
                channels.num_relays(),
                self.antennas(),
                self.num_relays()
            )));
        }
        self.state.channels = channels;
        Ok(())
    }

    /// Fresh episode: new channel stream, batteries at `e_init`, epoch 0.
    pub fn reset(&mut self, seed: u64) -> &EnvState {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
        let draw_seed = self.rng.random::<u64>();
        self.state = EnvState {
            channels: generate_channels(&self.cfg.topology, &self.cfg.path_loss, draw_seed),
            energy: vec![self.cfg.e_init; self.cfg.topology.num_relays()],
            epoch: 0,
        };
        &self.state
    }

    /// The slot evaluation shared by `peek_reward` and `step`: enhances the
    /// channels for the action's mode/phase choice, grants each active relay
    /// `min(harvest budget, available energy / t)`, and prices the slot.
    fn evaluate(&self, action: &HybridAction) -> Result<SlotEval> {
        let n = self.num_relays();
        if action.modes.len() != n || action.phases.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "action for {} relays in a {}-relay environment",
                action.modes.len(),
                n
            )));
        }
        let cfg = RelayConfig {
            modes: action.modes.clone(),
            phases: action.phases.clone(),
            gamma_max: self.cfg.gamma_max,
        };
        let enh = enhance_channels(&self.state.channels, &cfg)?;
        let mut harvested = vec![0.0; n];
        let mut powers = Vec::with_capacity(enh.num_active());
        for (i, &relay) in enh.active.iter().enumerate() {
            let cap = power_budget(&enh, &action.w0, action.t, &self.cfg.budget, i)?;
            let h = cap * action.t; // eta (1 - 2t) p_t |f_n^H w0|^2
            harvested[relay] = h;
            let available = (self.state.energy[relay] + h).min(self.cfg.e_max);
            powers.push(cap.min(available / action.t));
        }
        let mut executed = action.clone();
        executed.relay_powers = powers.clone();
        let reward = throughput(&enh, &executed, &self.cfg.budget)?;
        Ok(SlotEval {
            reward,
            harvested,
            powers,
            active: enh.active,
        })
    }

    /// Reward the current state would pay for `action`, without advancing.
    pub fn peek_reward(&self, action: &HybridAction) -> Result<f64> {
        Ok(self.evaluate(action)?.reward)
    }

    /// Executes one slot: pays the reward, settles the energy ledger, and
    /// draws the next fading block.
    pub fn step(&mut self, action: &HybridAction) -> Result<StepOutcome> {
        let eval = self.evaluate(action)?;
        let n = self.num_relays();
        let mut spent = vec![0.0; n];
        for (i, &relay) in eval.active.iter().enumerate() {
            spent[relay] = eval.powers[i] * action.t;
        }
        for (relay, &passive) in action.modes.iter().enumerate() {
            if passive {
                spent[relay] = self.cfg.passive_standby;
            }
        }
        for relay in 0..n {
            let e = self.state.energy[relay] + eval.harvested[relay] - spent[relay];
            self.state.energy[relay] = e.clamp(0.0, self.cfg.e_max);
        }
        let draw_seed = self.rng.random::<u64>();
        self.state.channels = generate_channels(&self.cfg.topology, &self.cfg.path_loss, draw_seed);
        self.state.epoch += 1;
        Ok(StepOutcome {
            reward: eval.reward,
            harvested: eval.harvested,
            spent,
            powers: eval.powers,
        })
    }

    /// Flat feature encoding of the current state. Field order:
    /// `f0` re/im pairs (2K), each relay's `f_n` re/im (2KN), `g_n` re/im
    /// (2N), upper-triangular `z` re/im (N(N-1)), then `e_n / e_max` (N).
    /// Channel entries are divided by [`channel_feature_scale`].
    pub fn encode_state(&self) -> Vec<f64> {
        encode_state(
            &self.state,
            self.cfg.e_max,
            channel_feature_scale(&self.cfg.path_loss),
        )
    }
}

struct SlotEval {
    reward: f64,
    harvested: Vec<f64>,
    powers: Vec<f64>,
    active: Vec<usize>,
}

/// See [`Env::encode_state`].
pub fn encode_state(state: &EnvState, e_max: f64, channel_scale: f64) -> Vec<f64> {
    let k = state.channels.antennas();
    let n = state.channels.num_relays();
    let mut out = Vec::with_capacity(feature_len(k, n));
    let inv = 1.0 / channel_scale;
    let push_c = |out: &mut Vec<f64>, z: Complex64| {
        out.push(z.re * inv);
        out.push(z.im * inv);
    };
    for &z in &state.channels.f0 {
        push_c(&mut out, z);
    }
    for f_n in &state.channels.f {
        for &z in f_n {
            push_c(&mut out, z);
        }
    }
    for &z in &state.channels.g {
        push_c(&mut out, z);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            push_c(&mut out, state.channels.z_at(a, b));
        }
    }
    for &e in &state.energy {
        out.push(e / e_max);
    }
    debug_assert_eq!(out.len(), feature_len(k, n));
    out
}

/// Length of the raw continuous action vector: `1 + 4K + N`.
pub fn raw_action_len(k: usize, n: usize) -> usize {
    1 + 4 * k + n
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn block_to_beamformer(block: &[f64]) -> CVector {
    let k = block.len() / 2;
    let v: CVector = (0..k)
        .map(|i| Complex64::new(block[2 * i], block[2 * i + 1]))
        .collect();
    match crate::numerics::unit_align(&v) {
        Ok(u) => u,
        Err(_) => {
            // Degenerate all-zero block: deterministic canonical fallback.
            let mut e1 = vec![Complex64::ZERO; k];
            e1[0] = Complex64::ONE;
            e1
        }
    }
}

/// Maps an unconstrained actor output onto the feasible action set:
/// `t` through a sigmoid onto `[T_MIN, 0.5 - T_MIN]`, each beamformer block
/// normalized onto the unit sphere, phases through `pi (tanh + 1)`.
/// Relay powers are left empty; the environment grants them at execution.
pub fn decode_action(raw: &[f64], modes: &[bool], k: usize) -> Result<HybridAction> {
    let n = modes.len();
    if raw.len() != raw_action_len(k, n) {
        return Err(Error::DimensionMismatch(format!(
            "raw action of len {} (need {})",
            raw.len(),
            raw_action_len(k, n)
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite raw action entry".into()));
    }
    let t = T_MIN + (0.5 - 2.0 * T_MIN) * sigmoid(raw[0]);
    let w0 = block_to_beamformer(&raw[1..1 + 2 * k]);
    let w1 = block_to_beamformer(&raw[1 + 2 * k..1 + 4 * k]);
    let phases: Vec<f64> = raw[1 + 4 * k..]
        .iter()
        .map(|&x| (std::f64::consts::PI * (x.tanh() + 1.0)).clamp(0.0, std::f64::consts::TAU))
        .collect();
    Ok(HybridAction {
        t,
        w0,
        w1,
        modes: modes.to_vec(),
        phases,
        relay_powers: vec![],
    })
}

/// Inverse of [`decode_action`] up to clamping: encodes an action as a raw
/// vector such that decoding reproduces it (beamformers are already unit
/// norm, so normalization is a no-op).
pub fn encode_action(action: &HybridAction, k: usize) -> Vec<f64> {
    let mut raw = Vec::with_capacity(raw_action_len(k, action.modes.len()));
    raw.push(logit((action.t - T_MIN) / (0.5 - 2.0 * T_MIN)));
    for w in [&action.w0, &action.w1] {
        for z in w.iter() {
            raw.push(z.re);
            raw.push(z.im);
        }
    }
    for &th in &action.phases {
        let u = (th / std::f64::consts::PI - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
        raw.push(0.5 * ((1.0 + u) / (1.0 - u)).ln());
    }
    raw
}
