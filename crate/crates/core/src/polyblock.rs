//! Monotonic (polyblock outer approximation) solver for the throughput
//! lower bound.
//!
//! After the change of variables the bound problem maximizes
//! `r(t, gamma_bar) = t log2(1 + gamma_bar)` over the normal (downward
//! closed) feasible set `Omega` in the `(t, gamma_bar)` plane. A polyblock -
//! a finite union of boxes `[0, v]` - encloses `Omega` from above; each
//! iteration evaluates `r` on the vertex set, projects the best vertex onto
//! the boundary of `Omega` by bisection (each feasibility test is one conic
//! solve), and cuts the box above the projection point away.
//!
//! The upper bound `r_U` comes from the vertices; the lower bound `r_L`
//! tracks the best value realized by actual unit-norm beamformers restored
//! from the projection solves, so the reported optimum is always achievable.

use num_complex::Complex64;

use crate::channel::EnhancedChannels;
use crate::error::{Error, Result};
use crate::numerics::{hdot, norm_sq, unit_align, CVector};
use crate::phy::{amplifier_coeff, HybridAction, LinkBudget, T_MIN};
use crate::sdp::{quad_root, FeasibilityInstance, FeasibilityResult, FeasibilitySolver};

/// One corner of the polyblock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub t: f64,
    pub gamma_bar: f64,
}

impl Vertex {
    /// Objective `r(t, gamma_bar) = t log2(1 + gamma_bar)`.
    pub fn objective(&self) -> f64 {
        self.t * (1.0 + self.gamma_bar).log2()
    }

    fn dominated_by(&self, other: &Vertex) -> bool {
        self.t <= other.t && self.gamma_bar <= other.gamma_bar
    }
}

/// Vertex set with the incumbent bounds.
#[derive(Debug, Clone)]
pub struct Polyblock {
    pub vertices: Vec<Vertex>,
    pub r_upper: f64,
    pub r_lower: f64,
}

impl Polyblock {
    pub fn initial(gamma_max: f64) -> Self {
        let v = Vertex {
            t: 0.5,
            gamma_bar: gamma_max,
        };
        Polyblock {
            r_upper: v.objective(),
            r_lower: 0.0,
            vertices: vec![v],
        }
    }

    /// Index of the vertex maximizing `r`, ties broken by smallest `t` then
    /// smallest `gamma_bar` (keeps iterate paths deterministic).
    pub fn best_vertex(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            match best {
                None => best = Some(i),
                Some(b) => {
                    let rb = self.vertices[b].objective();
                    let ri = v.objective();
                    if ri > rb
                        || (ri == rb
                            && (v.t < self.vertices[b].t
                                || (v.t == self.vertices[b].t
                                    && v.gamma_bar < self.vertices[b].gamma_bar)))
                    {
                        best = Some(i);
                    }
                }
            }
        }
        best
    }

    /// Replaces vertex `z_idx` with the two standard children
    /// `(o.t, z.gamma_bar)` and `(z.t, o.gamma_bar)`, then removes dominated
    /// vertices. The new polyblock still covers every point of `Omega` that
    /// the old one covered below `o` (the removed region lies above `o`).
    pub fn cut(&mut self, z_idx: usize, o: Vertex) {
        let z = self.vertices.swap_remove(z_idx);
        debug_assert!(o.t <= z.t + 1e-12 && o.gamma_bar <= z.gamma_bar + 1e-12);
        let children = [
            Vertex {
                t: o.t,
                gamma_bar: z.gamma_bar,
            },
            Vertex {
                t: z.t,
                gamma_bar: o.gamma_bar,
            },
        ];
        for c in children {
            if c.t > 0.0 && c.gamma_bar > 0.0 {
                self.vertices.push(c);
            }
        }
        // Keep only maximal vertices.
        let mut keep = vec![true; self.vertices.len()];
        for i in 0..self.vertices.len() {
            if !keep[i] {
                continue;
            }
            for j in 0..self.vertices.len() {
                if i == j || !keep[j] {
                    continue;
                }
                let vi = &self.vertices[i];
                let vj = &self.vertices[j];
                if vi.dominated_by(vj) && (vj.t > vi.t || vj.gamma_bar > vi.gamma_bar || j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut idx = 0;
        self.vertices.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
    }
}

/// Upper bound on `gamma_bar` over the feasible set:
/// `2 p_t ||f0_hat||^2 + p_t sum_n ||f_hat_n||^2`.
pub fn gamma_max(enh: &EnhancedChannels, p_t: f64) -> f64 {
    2.0 * p_t * norm_sq(&enh.f0_hat) + p_t * enh.f_hat.iter().map(|f| norm_sq(f)).sum::<f64>()
}

/// Result of projecting one vertex onto the boundary of `Omega`.
#[derive(Debug)]
pub struct ProjectionOutcome {
    /// Largest scaling that keeps the vertex feasible.
    pub lambda: f64,
    /// `o = lambda * z`.
    pub point: Vertex,
    /// Full solve at the feasible end of the bisection (beamformer witness).
    pub witness: FeasibilityResult,
    /// Bisection trace `(lambda, feasible)` in evaluation order.
    pub trace: Vec<(f64, bool)>,
}

/// Bisection projection of `z`: finds the largest `lambda` with
/// `(lambda t, lambda gamma_bar)` feasible, certified by the conic solver at
/// each probe. Feasibility of a scaled point is `m(lambda t) >= lambda
/// gamma_bar`.
pub fn project(
    z: Vertex,
    enh: &EnhancedChannels,
    budget: &LinkBudget,
    solver: &FeasibilitySolver,
    lambda_tol: f64,
) -> Result<ProjectionOutcome> {
    let p_t = budget.p_t;
    let mut trace = Vec::new();

    let feasible_at = |lambda: f64| -> Result<bool> {
        let tau = (lambda * z.t).min(0.5);
        let inst = FeasibilityInstance::new(enh, p_t, budget.eta, tau)?;
        solver.decide(&inst, lambda * z.gamma_bar)
    };

    // The relay-free value p_t||f0||^2 + p_t s_{0,1} is always achievable,
    // so any lambda with lambda gamma_bar <= 2 p_t ||f0||^2 is feasible.
    let floor = if z.gamma_bar > 0.0 {
        (2.0 * p_t * norm_sq(&enh.f0_hat) / z.gamma_bar).min(1.0)
    } else {
        1.0
    };

    let solve_at = |lambda: f64| -> Result<FeasibilityResult> {
        let tau = (lambda * z.t).min(0.5);
        let inst = FeasibilityInstance::new(enh, p_t, budget.eta, tau)?;
        solver.solve(&inst)
    };

    if feasible_at(1.0)? {
        trace.push((1.0, true));
        return Ok(ProjectionOutcome {
            lambda: 1.0,
            point: z,
            witness: solve_at(1.0)?,
            trace,
        });
    }
    trace.push((1.0, false));

    let mut lo = floor.min(1.0 - lambda_tol).max(1e-9);
    // The floor is feasible by construction; record it for the trace audit.
    trace.push((lo, true));
    let mut hi = 1.0;
    while hi - lo > lambda_tol {
        let mid = 0.5 * (lo + hi);
        let ok = feasible_at(mid)?;
        trace.push((mid, ok));
        if ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let witness = solve_at(lo)?;
    Ok(ProjectionOutcome {
        lambda: lo,
        point: Vertex {
            t: lo * z.t,
            gamma_bar: lo * z.gamma_bar,
        },
        witness,
        trace,
    })
}

/// Converged lower-bound solution.
#[derive(Debug, Clone)]
pub struct LowerBoundResult {
    /// Best realized bound value `t log2(1 + gamma_bar(w0, w1))`.
    pub value: f64,
    pub t_opt: f64,
    pub w0_opt: CVector,
    pub w1_opt: CVector,
    /// Per-active-relay powers that realize the bound (already within the
    /// harvest budget).
    pub relay_powers: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    /// False when `max_iter` ran out before the gap closed.
    pub converged: bool,
    /// `(r_lower, r_upper)` after each iteration, for audits.
    pub history: Vec<(f64, f64)>,
}

/// Shared solver configuration for the lower-bound search.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundSolver {
    pub epsilon: f64,
    pub max_iter: usize,
    pub lambda_tol: f64,
    pub feasibility: FeasibilitySolver,
}

impl Default for LowerBoundSolver {
    fn default() -> Self {
        LowerBoundSolver {
            epsilon: 1e-2,
            max_iter: 200,
            lambda_tol: 1e-3,
            feasibility: FeasibilitySolver::default(),
        }
    }
}

impl LowerBoundSolver {
    /// Polyblock outer approximation: starts from the box
    /// `[0, (1/2, gamma_max)]`, projects the best vertex each iteration, and
    /// terminates when `r_upper - r_lower <= epsilon` (or `max_iter`).
    pub fn solve(&self, enh: &EnhancedChannels, budget: &LinkBudget) -> Result<LowerBoundResult> {
        budget.validate()?;
        let p_t = budget.p_t;
        let k = enh.antennas();

        // Relays that can never contribute (zero harvest or zero forward
        // channel) reduce the problem to the relay-free boundary optimum.
        let alive = enh
            .f_hat
            .iter()
            .zip(&enh.g_hat)
            .any(|(fh, g)| norm_sq(fh) * g.norm_sqr() * norm_sq(&enh.f0_hat) > 1e-280);
        if !alive {
            return Ok(self.relay_free_result(enh, budget, k));
        }

        let gmax = gamma_max(enh, p_t);
        let mut poly = Polyblock::initial(gmax);

        // Warm incumbent: direct-link alignment at the largest hop time.
        let mut best = self.relay_free_result(enh, budget, k);
        poly.r_lower = best.value;

        let mut history = Vec::new();
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iter {
            iterations += 1;
            let Some(zi) = poly.best_vertex() else {
                converged = true;
                break;
            };
            let z = poly.vertices[zi];
            poly.r_upper = z.objective().max(poly.r_lower);
            if poly.r_upper - poly.r_lower <= self.epsilon {
                converged = true;
                history.push((poly.r_lower, poly.r_upper));
                break;
            }

            let proj = project(z, enh, budget, &self.feasibility, self.lambda_tol)?;
            self.consider_incumbent(enh, budget, &proj, &mut best, &mut poly.r_lower);

            if proj.lambda >= 1.0 - 1e-12 {
                // The whole box below z is feasible; its optimum is r(z) and
                // the witness already realizes it as well as extraction can.
                poly.vertices.swap_remove(zi);
            } else {
                poly.cut(zi, proj.point);
            }
            history.push((poly.r_lower, poly.r_upper));
        }

        if !converged {
            // Final bound from whatever vertices remain.
            if let Some(zi) = poly.best_vertex() {
                poly.r_upper = poly.vertices[zi].objective().max(poly.r_lower);
            } else {
                poly.r_upper = poly.r_lower;
            }
            converged = poly.r_upper - poly.r_lower <= self.epsilon;
        } else if poly.vertices.is_empty() {
            poly.r_upper = poly.r_lower;
        }

        best.iterations = iterations;
        best.gap = (poly.r_upper - poly.r_lower).max(0.0);
        best.converged = converged;
        best.history = history;
        Ok(best)
    }

    /// Fixed-time variant: a single conic solve at `tau = t`, value
    /// `t log2(1 + m_k)`.
    pub fn solve_fixed_t(
        &self,
        enh: &EnhancedChannels,
        budget: &LinkBudget,
        t: f64,
    ) -> Result<(f64, CVector, CVector)> {
        budget.validate()?;
        if !(T_MIN..=0.5 - T_MIN).contains(&t) {
            return Err(Error::OutOfDomain(format!(
                "t = {} outside [{}, {}]",
                t,
                T_MIN,
                0.5 - T_MIN
            )));
        }
        let inst = FeasibilityInstance::new(enh, budget.p_t, budget.eta, t)?;
        let res = self.feasibility.solve(&inst)?;
        Ok((t * (1.0 + res.m_k).log2(), res.w0, res.w1))
    }

    fn relay_free_result(&self, enh: &EnhancedChannels, budget: &LinkBudget, k: usize) -> LowerBoundResult {
        let t = 0.5 - T_MIN;
        let mut e1 = vec![Complex64::ZERO; k];
        e1[0] = Complex64::ONE;
        let w1 = unit_align(&enh.f0_hat).unwrap_or_else(|_| e1.clone());
        let value = realized_bound_value(enh, budget, t, &e1, &w1);
        let powers = alignment_powers(enh, budget, t, &e1, &w1);
        LowerBoundResult {
            value,
            t_opt: t,
            w0_opt: e1,
            w1_opt: w1,
            relay_powers: powers,
            iterations: 0,
            gap: 0.0,
            converged: true,
            history: vec![],
        }
    }

    /// Evaluates the projection witness as a concrete action and keeps it if
    /// it improves the incumbent.
    fn consider_incumbent(
        &self,
        enh: &EnhancedChannels,
        budget: &LinkBudget,
        proj: &ProjectionOutcome,
        best: &mut LowerBoundResult,
        r_lower: &mut f64,
    ) {
        let t_real = proj.point.t.clamp(T_MIN, 0.5 - T_MIN);
        let value = realized_bound_value(enh, budget, t_real, &proj.witness.w0, &proj.witness.w1);
        if value > best.value {
            best.value = value;
            best.t_opt = t_real;
            best.w0_opt = proj.witness.w0.clone();
            best.w1_opt = proj.witness.w1.clone();
            best.relay_powers =
                alignment_powers(enh, budget, t_real, &proj.witness.w0, &proj.witness.w1);
        }
        *r_lower = r_lower.max(best.value);
    }
}

/// Realized value of the bound objective for concrete unit beamformers at
/// hop time `t` (each relay capped at the smaller of its channel gain and
/// harvest root).
pub fn realized_bound_value(
    enh: &EnhancedChannels,
    budget: &LinkBudget,
    t: f64,
    w0: &[Complex64],
    w1: &[Complex64],
) -> f64 {
    let inst = FeasibilityInstance::new(enh, budget.p_t, budget.eta, t.min(0.5))
        .expect("t in (0, 1/2]");
    t * (1.0 + inst.rank_one_objective(w0, w1)).log2()
}

/// Relay powers that realize the bound with coherent combining: each relay
/// transmits exactly the power that aligns its forwarded copy, capped at the
/// harvest budget.
pub fn alignment_powers(
    enh: &EnhancedChannels,
    budget: &LinkBudget,
    t: f64,
    w0: &[Complex64],
    w1: &[Complex64],
) -> Vec<f64> {
    let p_t = budget.p_t;
    let f0n = norm_sq(&enh.f0_hat);
    let c = (1.0 / t - 2.0).max(0.0);
    enh.f_hat
        .iter()
        .zip(&enh.g_hat)
        .map(|(fh, g)| {
            let s0 = hdot(fh, w0).expect("dims").norm_sqr();
            let cap = budget.eta * c * p_t * s0;
            let denom = g.norm_sqr() * f0n;
            if denom <= 0.0 {
                return 0.0;
            }
            let psi = budget.eta * p_t * g.norm_sqr() * f0n;
            let s1 = hdot(fh, w1)
                .expect("dims")
                .norm_sqr()
                .min(quad_root(psi * c * s0, p_t));
            let p = s1 * (1.0 + p_t * s1) / denom;
            p.min(cap).max(0.0)
        })
        .collect()
}

/// Builds the executable action for a lower-bound solution: the given relay
/// mode/phase context, the solver's `(t, w0, w1)`, alignment powers, and the
/// global phase of `w1` rotated so the relayed copies combine coherently
/// with the direct link (the rotation leaves every `|.|^2` unchanged).
pub fn realize_action(
    enh: &EnhancedChannels,
    budget: &LinkBudget,
    modes: &[bool],
    phases: &[f64],
    t: f64,
    w0: &[Complex64],
    w1: &[Complex64],
) -> HybridAction {
    let powers = alignment_powers(enh, budget, t, w0, w1);
    let mut s = Complex64::ZERO;
    for (i, &p_n) in powers.iter().enumerate() {
        let y_n = hdot(&enh.f_hat[i], w1).expect("dims") * budget.p_t.sqrt();
        let x_n = amplifier_coeff(p_n, y_n);
        s += y_n * enh.g_hat[i] * x_n;
    }
    let w1_rot: CVector = if s.norm() > 0.0 {
        let rot = Complex64::from_polar(1.0, -s.arg());
        w1.iter().map(|z| z * rot).collect()
    } else {
        w1.to_vec()
    };
    HybridAction {
        t,
        w0: w0.to_vec(),
        w1: w1_rot,
        modes: modes.to_vec(),
        phases: phases.to_vec(),
        relay_powers: powers,
    }
}
