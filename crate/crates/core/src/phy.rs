//! Exact two-hop SNR and throughput evaluation.
//!
//! This is the ground truth every other component is measured against: the
//! environment's reward, the optimizer's feasibility checks, and the
//! acceptance suite all reduce to these formulas.
//!
//! Protocol recap: a slot of unit length spends `1 - 2t` beaming energy to
//! the active relays, then two hops of length `t` each. In the first hop the
//! receiver hears the HAP directly (SNR `gamma_1`); in the second hop the
//! active relays amplify-and-forward while the HAP repeats the symbol
//! aligned to the enhanced direct channel, and the receiver combines both
//! copies (`gamma_1 + gamma_2`).

use num_complex::Complex64;

use crate::channel::EnhancedChannels;
use crate::error::{Error, Result};
use crate::numerics::{hdot, norm, norm_sq, CVector};

/// Smallest admissible hop time; `t` lives in `[T_MIN, 0.5 - T_MIN]`.
pub const T_MIN: f64 = 1e-3;

/// Norm slack tolerated on beamformers before rejecting an action.
pub const NORM_TOL: f64 = 1e-9;

/// Budget slack tolerated when checking relay powers.
pub const BUDGET_TOL: f64 = 1e-9;

/// Full decision tuple for one slot.
///
/// `relay_powers` holds the transmit power of each *active* relay, ordered
/// like [`EnhancedChannels::active`].
#[derive(Debug, Clone)]
pub struct HybridAction {
    pub t: f64,
    pub w0: CVector,
    pub w1: CVector,
    pub modes: Vec<bool>,
    pub phases: Vec<f64>,
    pub relay_powers: Vec<f64>,
}

impl HybridAction {
    /// Structural validation against antenna count `k` and relay count `n`.
    pub fn validate(&self, k: usize, n: usize) -> Result<()> {
        if self.w0.len() != k || self.w1.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "beamformers of dim {}/{} for {} antennas",
                self.w0.len(),
                self.w1.len(),
                k
            )));
        }
        if self.modes.len() != n || self.phases.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "modes/phases of len {}/{} for {} relays",
                self.modes.len(),
                self.phases.len(),
                n
            )));
        }
        if !(T_MIN..=0.5 - T_MIN).contains(&self.t) {
            return Err(Error::OutOfDomain(format!(
                "t = {} outside [{}, {}]",
                self.t,
                T_MIN,
                0.5 - T_MIN
            )));
        }
        if norm(&self.w0) > 1.0 + NORM_TOL || norm(&self.w1) > 1.0 + NORM_TOL {
            return Err(Error::OutOfDomain(format!(
                "beamformer norms {}/{} exceed 1",
                norm(&self.w0),
                norm(&self.w1)
            )));
        }
        for &th in &self.phases {
            if !(0.0..=std::f64::consts::TAU).contains(&th) {
                return Err(Error::OutOfDomain(format!("phase {} outside [0, 2pi]", th)));
            }
        }
        // Powers may be absent (granted later by the executor) or one per
        // active relay.
        let actives = self.modes.iter().filter(|&&m| !m).count();
        if !self.relay_powers.is_empty() && self.relay_powers.len() != actives {
            return Err(Error::DimensionMismatch(format!(
                "{} relay powers for {} active relays",
                self.relay_powers.len(),
                actives
            )));
        }
        if self.relay_powers.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::OutOfDomain("negative or non-finite relay power".into()));
        }
        Ok(())
    }
}

/// Transmit power (linear, noise-normalized) and harvesting efficiency.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget {
    pub p_t: f64,
    pub eta: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if self.p_t <= 0.0 {
            return Err(Error::OutOfDomain(format!("p_t = {} must be > 0", self.p_t)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::OutOfDomain(format!("eta = {} outside (0, 1]", self.eta)));
        }
        Ok(())
    }
}

/// First-hop SNR `gamma_1 = p_t |f0_hat^H w1|^2`.
pub fn snr_first_hop(enh: &EnhancedChannels, w1: &[Complex64], p_t: f64) -> f64 {
    let d = hdot(&enh.f0_hat, w1).expect("dimension checked by caller");
    p_t * d.norm_sqr()
}

/// Power amplifier coefficient `x_n = sqrt(p_n / (1 + |y_n|^2))` of an
/// active relay, where `y_n = sqrt(p_t) f_hat_n^H w1` is its received
/// first-hop signal gain.
pub fn amplifier_coeff(p_n: f64, y_n: Complex64) -> f64 {
    if p_n <= 0.0 {
        return 0.0;
    }
    (p_n / (1.0 + y_n.norm_sqr())).sqrt()
}

/// Second-hop SNR after maximal-ratio combining of the relayed copies with
/// the HAP's repeated transmission (beamformed along `f0_hat`):
///
/// `gamma_2 = |sum_n x_n y_n g_hat_n + sqrt(p_t) ||f0_hat|| |^2
///            / (1 + sum_n |x_n g_hat_n|^2)`
pub fn snr_second_hop(enh: &EnhancedChannels, w1: &[Complex64], p_t: f64, powers: &[f64]) -> f64 {
    debug_assert_eq!(powers.len(), enh.num_active());
    let mut num = Complex64::new(p_t.sqrt() * norm(&enh.f0_hat), 0.0);
    let mut den = 1.0;
    for (i, &p_n) in powers.iter().enumerate() {
        let y_n = hdot(&enh.f_hat[i], w1).expect("dims") * p_t.sqrt();
        let x_n = amplifier_coeff(p_n, y_n);
        num += y_n * enh.g_hat[i] * x_n;
        den += (enh.g_hat[i] * x_n).norm_sqr();
    }
    num.norm_sqr() / den
}

/// Maximum sustainable transmit power of active relay `n` (index into
/// `enh.active`) from the energy harvested during the `1 - 2t` sub-slot:
/// `eta (1/t - 2) p_t |f_hat_n^H w0|^2`.
pub fn power_budget(
    enh: &EnhancedChannels,
    w0: &[Complex64],
    t: f64,
    budget: &LinkBudget,
    n: usize,
) -> Result<f64> {
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::OutOfDomain(format!("t = {} outside (0, 1/2)", t)));
    }
    let s_n0 = hdot(&enh.f_hat[n], w0).expect("dims").norm_sqr();
    Ok(budget.eta * (1.0 / t - 2.0) * budget.p_t * s_n0)
}

/// Slot throughput `t log2(1 + gamma_1 + gamma_2)`.
///
/// Validates the action and rejects any relay power above its harvest
/// budget (carrying the offending relay's id).
pub fn throughput(enh: &EnhancedChannels, action: &HybridAction, budget: &LinkBudget) -> Result<f64> {
    budget.validate()?;
    action.validate(enh.antennas(), action.modes.len())?;
    if enh.num_active() != action.relay_powers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} powers for {} active relays",
            action.relay_powers.len(),
            enh.num_active()
        )));
    }
    for (i, &p_n) in action.relay_powers.iter().enumerate() {
        let cap = power_budget(enh, &action.w0, action.t, budget, i)?;
        if p_n > cap + BUDGET_TOL.max(cap * 1e-9) {
            return Err(Error::BudgetViolation {
                relay: enh.active[i],
                power: p_n,
                budget: cap,
            });
        }
    }
    let g1 = snr_first_hop(enh, &action.w1, budget.p_t);
    let g2 = snr_second_hop(enh, &action.w1, budget.p_t, &action.relay_powers);
    Ok(action.t * (1.0 + g1 + g2).log2())
}

/// The Rayleigh-quotient bound on the combined SNR for any action using the
/// aligned second-hop beamformer:
/// `gamma_1 + gamma_2 <= p_t ||f0_hat||^2 + p_t sum_{n in Na u {0}} |f_hat_n^H w1|^2`.
pub fn combined_snr_upper_bound(enh: &EnhancedChannels, w1: &[Complex64], p_t: f64) -> f64 {
    let mut acc = norm_sq(&enh.f0_hat) + hdot(&enh.f0_hat, w1).expect("dims").norm_sqr();
    for fh in &enh.f_hat {
        acc += hdot(fh, w1).expect("dims").norm_sqr();
    }
    p_t * acc
}
