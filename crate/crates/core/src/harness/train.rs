//! Training driver: runs one learning variant for one seed and lays down the
//! run directory (`config.copy`, `checkpoints/`, `results.csv`,
//! `timing.csv`).

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::agent::{HybridAgent, TrainMode};
use crate::env::{feature_len, Env};
use crate::error::{Error, Result};
use crate::nn::{write_checkpoint, AdamState, Mlp};

use super::config::{derive_seed, ExperimentConfig};
use super::csv::{emit_csv, emit_timing_csv, ResultRow, TimingRow};

/// Outcome of one `(mode, seed)` training run.
pub struct TrainRun {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<TimingRow>,
    pub run_dir: PathBuf,
}

/// Trains one variant for one seed; returns the episode rows, timings, and
/// the trained agent (no filesystem side effects).
pub fn train_episodes(
    config: &ExperimentConfig,
    mode: TrainMode,
    seed: u64,
) -> Result<(Vec<ResultRow>, Vec<TimingRow>, HybridAgent)> {
    let env_cfg = config.default_env_config();
    let k = env_cfg.topology.antennas;
    let n = env_cfg.topology.num_relays();
    let mut env = Env::new(env_cfg)?;
    let mut agent = HybridAgent::new(feature_len(k, n), k, n, config.agent_config(), seed)?;
    let solver = config.train_solver();

    let mut rows = Vec::with_capacity(config.train.episodes);
    let mut timings = Vec::with_capacity(config.train.episodes);
    for episode in 0..config.train.episodes {
        let episode_seed = derive_seed(seed, episode as u64);
        let t0 = Instant::now();
        let rec = agent.run_episode(&mut env, mode, &solver, episode_seed)?;
        let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
        rows.push(ResultRow {
            scheme: mode.label().to_string(),
            p_t_dbm: config.link.p_t_dbm,
            l_e_db: config.path_loss.direct_extra_attenuation_db,
            n,
            seed,
            episode,
            reward_mean: rec.reward_mean(),
            reward_std: rec.reward_std(),
            modes: rec.mode_index,
        });
        timings.push(TimingRow {
            scheme: mode.label().to_string(),
            p_t_dbm: config.link.p_t_dbm,
            l_e_db: config.path_loss.direct_extra_attenuation_db,
            n,
            seed,
            episode,
            runtime_ms: elapsed_ms,
        });
    }
    Ok((rows, timings, agent))
}

/// Full run: trains, then writes the run directory layout.
pub fn run_train(
    config: &ExperimentConfig,
    mode: TrainMode,
    seed: u64,
    out_dir: &Path,
) -> Result<TrainRun> {
    let run_dir = out_dir.join(format!("{}-seed{}", mode.label(), seed));
    let ckpt_dir = run_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    config.save(&run_dir.join("config.copy"))?;

    let (rows, timings, agent) = train_episodes(config, mode, seed)?;
    emit_csv(&rows, &run_dir.join("results.csv"))?;
    emit_timing_csv(&timings, &run_dir.join("timing.csv"))?;
    save_checkpoints(&agent, &ckpt_dir)?;
    Ok(TrainRun {
        rows,
        timings,
        run_dir,
    })
}

/// Writes all six networks (plus optimizer states for the online ones).
pub fn save_checkpoints(agent: &HybridAgent, dir: &Path) -> Result<()> {
    let write = |name: &str, net: &Mlp, adam: Option<&AdamState>| -> Result<()> {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_checkpoint(&mut file, net, adam).map_err(|e| Error::io(&path, e))
    };
    write("actor.bin", &agent.actor, Some(&agent.adam_actor))?;
    write("actor_target.bin", &agent.actor_target, None)?;
    write("critic.bin", &agent.critic, Some(&agent.adam_critic))?;
    write("critic_target.bin", &agent.critic_target, None)?;
    write("qnet.bin", &agent.q_net, Some(&agent.adam_q))?;
    write("qnet_target.bin", &agent.q_target, None)?;
    Ok(())
}
