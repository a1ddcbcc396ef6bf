//! Node geometry, log-distance path-loss fading, and backscatter channel
//! enhancement.
//!
//! All channel entries are noise-normalized at generation time: the linear
//! path gain is divided by the noise power, so every downstream SNR formula
//! uses unit noise.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hdot, CVector};

/// dB (or dBm) to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Node positions in meters and the HAP antenna count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub hap: [f64; 2],
    pub receiver: [f64; 2],
    pub relays: Vec<[f64; 2]>,
    pub antennas: usize,
}

impl Default for Topology {
    /// Five relays between the HAP and the receiver, three antennas.
    fn default() -> Self {
        Topology {
            hap: [0.0, 0.0],
            receiver: [10.0, 0.0],
            relays: vec![[4.0, 1.0], [4.0, -1.0], [5.0, 0.0], [6.0, 1.0], [6.0, -1.0]],
            antennas: 3,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Topology {
    pub fn num_relays(&self) -> usize {
        self.relays.len()
    }

    /// Keeps only the first `n` relays (used by sweeps over relay count).
    pub fn truncated(&self, n: usize) -> Topology {
        let mut t = self.clone();
        t.relays.truncate(n);
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::Config("topology: antennas must be >= 1".into()));
        }
        let mut nodes = vec![self.hap, self.receiver];
        nodes.extend(self.relays.iter().copied());
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if dist(nodes[i], nodes[j]) <= 0.0 {
                    return Err(Error::Config(format!(
                        "topology: nodes {} and {} are co-located",
                        i, j
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Log-distance path loss plus noise floor; `direct_extra_attenuation_db`
/// models blockage on the direct HAP-receiver link only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathLossModel {
    pub unit_loss_db: f64,
    pub exponent: f64,
    pub noise_dbm: f64,
    pub direct_extra_attenuation_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            unit_loss_db: 25.0,
            exponent: 2.0,
            noise_dbm: -80.0,
            direct_extra_attenuation_db: 35.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if self.exponent <= 0.0 {
            return Err(Error::Config("path_loss: exponent must be > 0".into()));
        }
        if self.unit_loss_db < 0.0 {
            return Err(Error::Config("path_loss: unit_loss_db must be >= 0".into()));
        }
        Ok(())
    }

    /// Noise-normalized amplitude scale for a link of length `d` meters.
    fn amplitude_scale(&self, d: f64, extra_db: f64) -> f64 {
        let pl_db = self.unit_loss_db + 10.0 * self.exponent * d.log10() + extra_db;
        db_to_linear((-pl_db - self.noise_dbm) / 2.0)
    }
}

/// Raw complex channels for one fading block.
///
/// `z` is the full relay-to-relay matrix in row-major order; it is symmetric
/// (`z[n][m] == z[m][n]`, channel reciprocity) with an unused zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub f0: CVector,
    pub f: Vec<CVector>,
    pub g: Vec<Complex64>,
    pub z: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.f0.len()
    }

    pub fn num_relays(&self) -> usize {
        self.f.len()
    }

    pub fn z_at(&self, n: usize, m: usize) -> Complex64 {
        self.z[n * self.num_relays() + m]
    }
}

/// Relay mode/phase assignment. `modes[k] == true` marks relay `k` passive.
#[derive(Debug, Clone)]
pub struct RelayConfig {
    pub modes: Vec<bool>,
    pub phases: Vec<f64>,
    pub gamma_max: f64,
}

impl RelayConfig {
    pub fn all_active(n: usize, gamma_max: f64) -> Self {
        RelayConfig {
            modes: vec![false; n],
            phases: vec![0.0; n],
            gamma_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.len() != self.phases.len() {
            return Err(Error::DimensionMismatch(format!(
                "relay config: {} modes vs {} phases",
                self.modes.len(),
                self.phases.len()
            )));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max <= 1.0) {
            return Err(Error::OutOfDomain(format!(
                "reflection magnitude {} outside (0, 1]",
                self.gamma_max
            )));
        }
        for (k, &th) in self.phases.iter().enumerate() {
            if !(0.0..=std::f64::consts::TAU).contains(&th) {
                return Err(Error::OutOfDomain(format!(
                    "phase {} of relay {} outside [0, 2pi]",
                    th, k
                )));
            }
        }
        Ok(())
    }

    pub fn active_ids(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&k| !self.modes[k]).collect()
    }

    pub fn passive_ids(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&k| self.modes[k]).collect()
    }

    /// Complex reflection coefficient of relay `k`.
    pub fn gamma(&self, k: usize) -> Complex64 {
        Complex64::from_polar(self.gamma_max, self.phases[k])
    }
}

/// Effective channels after folding in the passive relays' reflections.
/// `f_hat`/`g_hat` are indexed by position in `active`, which holds the
/// original relay ids.
#[derive(Debug, Clone)]
pub struct EnhancedChannels {
    pub f0_hat: CVector,
    pub active: Vec<usize>,
    pub f_hat: Vec<CVector>,
    pub g_hat: Vec<Complex64>,
}

impl EnhancedChannels {
    pub fn antennas(&self) -> usize {
        self.f0_hat.len()
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }
}

/// Draws one fading block. Entries are `sqrt(gain) * h` with
/// `h ~ CN(0, 1)`; the draw order (f0, then each relay's f, then g, then the
/// upper triangle of z) is fixed so results are reproducible per seed.
pub fn generate_channels(
    topology: &Topology,
    path_loss: &PathLossModel,
    seed: u64,
) -> ChannelRealization {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let k = topology.antennas;
    let n = topology.num_relays();
    let mut cn = |scale: f64| -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * (scale / std::f64::consts::SQRT_2)
    };

    let s0 = path_loss.amplitude_scale(
        dist(topology.hap, topology.receiver),
        path_loss.direct_extra_attenuation_db,
    );
    let f0: CVector = (0..k).map(|_| cn(s0)).collect();

    let mut f = Vec::with_capacity(n);
    for r in 0..n {
        let s = path_loss.amplitude_scale(dist(topology.hap, topology.relays[r]), 0.0);
        f.push((0..k).map(|_| cn(s)).collect::<CVector>());
    }

    let g: Vec<Complex64> = (0..n)
        .map(|r| cn(path_loss.amplitude_scale(dist(topology.relays[r], topology.receiver), 0.0)))
        .collect();

    let mut z = vec![Complex64::ZERO; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let s = path_loss.amplitude_scale(dist(topology.relays[a], topology.relays[b]), 0.0);
            let v = cn(s);
            z[a * n + b] = v;
            z[b * n + a] = v;
        }
    }

    ChannelRealization { f0, f, g, z }
}

/// Applies the passive relays' reflections to the raw channels:
///
/// - direct:     `f0_hat = f0 + sum_k b_k g_k Gamma_k f_k`
/// - to relay n: `f_hat_n = f_n + sum_{k != n} b_k z_kn Gamma_k f_k`
/// - from relay: `g_hat_n = g_n + sum_{k != n} b_k z_nk Gamma_k g_k`
pub fn enhance_channels(ch: &ChannelRealization, cfg: &RelayConfig) -> Result<EnhancedChannels> {
    let n = ch.num_relays();
    if cfg.modes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "relay config for {} relays applied to {}-relay channels",
            cfg.modes.len(),
            n
        )));
    }
    cfg.validate()?;

    let passive = cfg.passive_ids();
    let active = cfg.active_ids();

    let mut f0_hat = ch.f0.clone();
    for &k in &passive {
        let c = ch.g[k] * cfg.gamma(k);
        for (dst, src) in f0_hat.iter_mut().zip(&ch.f[k]) {
            *dst += c * src;
        }
    }

    let mut f_hat = Vec::with_capacity(active.len());
    let mut g_hat = Vec::with_capacity(active.len());
    for &a in &active {
        let mut fa = ch.f[a].clone();
        let mut ga = ch.g[a];
        for &k in &passive {
            let c = ch.z_at(k, a) * cfg.gamma(k);
            for (dst, src) in fa.iter_mut().zip(&ch.f[k]) {
                *dst += c * src;
            }
            ga += ch.z_at(a, k) * cfg.gamma(k) * ch.g[k];
        }
        f_hat.push(fa);
        g_hat.push(ga);
    }

    Ok(EnhancedChannels {
        f0_hat,
        active,
        f_hat,
        g_hat,
    })
}

/// Chooses passive-relay phases that strengthen the direct channel.
///
/// Builds `f0_hat` incrementally: each passive relay's reflected term is
/// rotated to add constructively to the accumulated vector. A short
/// coordinate-ascent refinement follows, and all-zero phases are kept as a
/// floor so the result never falls below the unphased channel.
pub fn cophase_passive(ch: &ChannelRealization, modes: &[bool], gamma_max: f64) -> Result<Vec<f64>> {
    let n = ch.num_relays();
    if modes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} modes for {} relays",
            modes.len(),
            n
        )));
    }
    let passive: Vec<usize> = (0..n).filter(|&k| modes[k]).collect();
    if passive.is_empty() {
        return Err(Error::DegenerateInput(
            "cophase_passive: no passive relays".into(),
        ));
    }

    // Reflected term of relay k at zero phase, scaled by the magnitude.
    let term = |k: usize| -> CVector {
        ch.f[k]
            .iter()
            .map(|x| x * ch.g[k] * gamma_max)
            .collect::<CVector>()
    };

    let mut phases = vec![0.0f64; n];
    let mut acc = ch.f0.clone();
    for &k in &passive {
        let b = term(k);
        let d = hdot(&acc, &b).expect("equal dims");
        let theta = if d.norm() > 0.0 { -d.arg() } else { 0.0 };
        phases[k] = theta.rem_euclid(std::f64::consts::TAU);
        let rot = Complex64::from_polar(1.0, phases[k]);
        for (dst, src) in acc.iter_mut().zip(&b) {
            *dst += rot * src;
        }
    }

    // Coordinate-ascent refinement: re-optimize each phase against all the
    // others. Each update is the exact argmax of ||f0_hat|| over one phase,
    // so the norm is nondecreasing.
    for _ in 0..2 {
        for &k in &passive {
            let b = term(k);
            let rot_old = Complex64::from_polar(1.0, phases[k]);
            let mut partial = acc.clone();
            for (dst, src) in partial.iter_mut().zip(&b) {
                *dst -= rot_old * src;
            }
            let d = hdot(&partial, &b).expect("equal dims");
            if d.norm() > 0.0 {
                phases[k] = (-d.arg()).rem_euclid(std::f64::consts::TAU);
            }
            let rot_new = Complex64::from_polar(1.0, phases[k]);
            acc = partial;
            for (dst, src) in acc.iter_mut().zip(&b) {
                *dst += rot_new * src;
            }
        }
    }

    // Never return phases worse than all-zeros.
    let norm_of = |ph: &[f64]| -> f64 {
        let cfg = RelayConfig {
            modes: modes.to_vec(),
            phases: ph.to_vec(),
            gamma_max,
        };
        crate::numerics::norm(&enhance_channels(ch, &cfg).expect("validated").f0_hat)
    };
    let zeros = vec![0.0f64; n];
    if norm_of(&phases) >= norm_of(&zeros) {
        Ok(phases)
    } else {
        Ok(zeros)
    }
}
