//! Two-hop relay network simulator and optimizer for a multi-antenna access
//! point assisted by wireless-powered hybrid (active/passive backscatter)
//! relays.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: small complex linear algebra (Hermitian eigen, PSD checks).
//! - [`channel`]: topology, path-loss fading generation, and backscatter
//!   channel enhancement.
//! - [`phy`]: exact two-hop SNR and throughput evaluation - the ground-truth
//!   reward.
//! - [`sdp`]: the per-projection feasibility program solved by semidefinite
//!   relaxation with a dense barrier method, plus rank-one extraction.
//! - [`polyblock`]: the monotonic (polyblock outer approximation) solver for
//!   the throughput lower bound, and the cheaper fixed-time variant.
//! - [`env`]: the episodic MDP wrapping the physical layer.
//! - [`nn`]: feed-forward networks with manual backprop and Adam.
//! - [`agent`]: outer-loop DQN over relay modes, inner-loop DDPG over the
//!   continuous controls, and the optimization-driven target merge.
//! - [`harness`]: configuration, baselines, sweeps, CSV output.

pub mod agent;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod numerics;
pub mod phy;
pub mod polyblock;
pub mod sdp;

pub use error::{Error, Result};
