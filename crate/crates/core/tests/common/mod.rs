//! Shared oracles for the integration suites: dense grid searches over the
//! K = 2, single-active-relay instances where brute force is tractable.
//!
//! Everything here recomputes the physics from the formulas directly and
//! never calls into the solver paths it is used to check.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use wpbr_core::channel::EnhancedChannels;
use wpbr_core::numerics::CVector;
use wpbr_core::phy::{LinkBudget, T_MIN};
use wpbr_core::sdp::quad_root;

/// Random K-antenna instance with `a` active relays at a mixed magnitude
/// scale (some near unit, some channel-realistic).
pub fn random_instance(seed: u64, k: usize, a: usize) -> EnhancedChannels {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let scale = if seed % 3 == 0 { 40.0 } else { 1.5 };
    let mut vec_k = |s: f64| -> CVector {
        (0..k)
            .map(|_| {
                Complex64::new(
                    (rng.random::<f64>() - 0.5) * s,
                    (rng.random::<f64>() - 0.5) * s,
                )
            })
            .collect()
    };
    let f0 = vec_k(scale);
    let f_hat: Vec<CVector> = (0..a).map(|_| vec_k(2.0 * scale)).collect();
    let g_hat: Vec<Complex64> = (0..a)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
        .collect();
    EnhancedChannels {
        f0_hat: f0,
        active: (0..a).collect(),
        f_hat,
        g_hat,
    }
}

/// Unit beamformer on the K = 2 sphere, parameterized by a polar angle and a
/// relative phase (the global phase never enters quadratic forms).
pub fn sphere_point(a_idx: usize, p_idx: usize, a_grid: usize, p_grid: usize) -> CVector {
    let a = std::f64::consts::FRAC_PI_2 * a_idx as f64 / (a_grid - 1) as f64;
    let p = std::f64::consts::TAU * p_idx as f64 / p_grid as f64;
    vec![
        Complex64::new(a.cos(), 0.0),
        Complex64::from_polar(a.sin(), p),
    ]
}

fn hdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Brute-force maximum of the *bound* problem over `t` and the `w1` sphere
/// for a K = 2, single-active-relay instance. `w0` only enters through
/// `|f1^H w0|^2` and the objective increases in it, so the exact sphere
/// maximum `||f1||^2` is used for the harvest budget.
pub fn grid_bound_optimum(
    enh: &EnhancedChannels,
    budget: &LinkBudget,
    t_grid: usize,
    w_grid: usize,
) -> f64 {
    assert_eq!(enh.f0_hat.len(), 2);
    assert_eq!(enh.num_active(), 1);
    let p_t = budget.p_t;
    let base = p_t * norm_sq(&enh.f0_hat);
    let s0_max = norm_sq(&enh.f_hat[0]);
    let psi = budget.eta * p_t * enh.g_hat[0].norm_sqr() * norm_sq(&enh.f0_hat);

    let mut best = f64::MIN;
    for ti in 1..=t_grid {
        let t = T_MIN + (0.5 - 2.0 * T_MIN) * ti as f64 / t_grid as f64;
        let c = 1.0 / t - 2.0;
        let cap = quad_root(psi * c * s0_max, p_t);
        for ai in 0..w_grid {
            for pi in 0..w_grid {
                let w1 = sphere_point(ai, pi, w_grid, w_grid);
                let q = hdot(&enh.f0_hat, &w1).norm_sqr();
                let s1 = hdot(&enh.f_hat[0], &w1).norm_sqr();
                let gamma = base + p_t * (q + s1.min(cap));
                let val = t * (1.0 + gamma).log2();
                best = best.max(val);
            }
        }
    }
    best
}

/// Brute-force estimate of the *original* two-hop problem's optimum for a
/// K = 2, single-active-relay instance: grids `t` and the `w1` sphere,
/// aligns `w0` with the relay channel (the budget is monotone in
/// `|f1^H w0|^2`), and maximizes the exact second-hop SNR over the relay
/// power in closed form.
pub fn grid_true_optimum(
    enh: &EnhancedChannels,
    budget: &LinkBudget,
    t_grid: usize,
    w_grid: usize,
) -> f64 {
    assert_eq!(enh.f0_hat.len(), 2);
    assert_eq!(enh.num_active(), 1);
    let p_t = budget.p_t;
    let f0n = norm_sq(&enh.f0_hat);
    let s0_max = norm_sq(&enh.f_hat[0]);
    let g1 = enh.g_hat[0];

    let mut best = f64::MIN;
    for ti in 1..=t_grid {
        let t = T_MIN + (0.5 - 2.0 * T_MIN) * ti as f64 / t_grid as f64;
        let p_cap = budget.eta * (1.0 / t - 2.0) * p_t * s0_max;
        for ai in 0..w_grid {
            for pi in 0..w_grid {
                let w1 = sphere_point(ai, pi, w_grid, w_grid);
                let gamma1 = p_t * hdot(&enh.f0_hat, &w1).norm_sqr();
                let y = hdot(&enh.f_hat[0], &w1) * p_t.sqrt();
                let gamma2 = best_gamma2_single_relay(y, g1, f0n, p_t, p_cap);
                let val = t * (1.0 + gamma1 + gamma2).log2();
                best = best.max(val);
            }
        }
    }
    best
}

/// Exact maximum over `p in [0, p_cap]` of the single-relay second-hop SNR
/// `|x y g + sqrt(p_t)||f0|| |^2 / (1 + |x g|^2)` with
/// `x = sqrt(p / (1 + |y|^2))`. In `u = x|g|` the objective is
/// `(alpha u^2 + beta u + delta) / (1 + u^2)`, whose stationary points solve
/// a quadratic.
fn best_gamma2_single_relay(y: Complex64, g: Complex64, f0n: f64, p_t: f64, p_cap: f64) -> f64 {
    let d = (p_t * f0n).sqrt();
    let gm = g.norm();
    if gm == 0.0 {
        return d * d;
    }
    // x y g = u * |y| e^{i theta} with theta = arg(y g).
    let ymag = y.norm();
    let cos_t = if ymag > 0.0 { (y * g).re / (ymag * gm) } else { 1.0 };
    let alpha = ymag * ymag / (gm * gm);
    let beta = 2.0 * (ymag / gm) * cos_t * d;
    let delta = d * d;

    let u_max = (p_cap / (1.0 + ymag * ymag)).sqrt() * gm;
    let eval = |u: f64| (alpha * u * u + beta * u + delta) / (1.0 + u * u);

    let mut best = eval(0.0).max(eval(u_max));
    // d/du = 0 <=> -beta u^2 + 2(alpha - delta) u + beta = 0.
    if beta.abs() > 1e-300 {
        let a2 = -beta;
        let b2 = 2.0 * (alpha - delta);
        let disc = b2 * b2 - 4.0 * a2 * beta;
        if disc >= 0.0 {
            for sign in [-1.0, 1.0] {
                let u = (-b2 + sign * disc.sqrt()) / (2.0 * a2);
                if u > 0.0 && u < u_max {
                    best = best.max(eval(u));
                }
            }
        }
    } else if alpha > delta {
        // Monotone increasing; the endpoint already covers it.
        best = best.max(eval(u_max));
    }
    best
}
