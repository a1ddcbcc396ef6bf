//! Command-line front end: topology/config generation, one-shot lower-bound
//! solves, baseline evaluation, training runs, and experiment sweeps.
//!
//! Exit codes: 0 on success, 2 for configuration/usage errors, 1 for
//! runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use wpbr_core::agent::TrainMode;
use wpbr_core::channel::{cophase_passive, enhance_channels, RelayConfig};
use wpbr_core::env::Env;
use wpbr_core::error::Error;
use wpbr_core::harness::{
    self, emit_csv, emit_timing_csv, ExperimentConfig, ResultRow, Scheme, TimingRow,
};
use wpbr_core::polyblock::realize_action;

#[derive(Parser)]
#[command(
    name = "wpbr",
    version,
    about = "Wireless-powered backscatter relay network: simulator, optimizer, and learning harness"
)]
struct Cli {
    /// Experiment configuration file (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config's seed list with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Learning variant for `train` (model_free | simplified | full_opt).
    #[arg(long, global = true)]
    mode: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default topology and experiment configuration to
    /// `<out>/config.toml`.
    GenTopology,
    /// Solve the throughput lower bound on one seeded channel instance and
    /// write `<out>/lower_bound.toml`.
    LowerBound,
    /// Evaluate the reference schemes on seeded states and write
    /// `<out>/results.csv`.
    Baseline,
    /// Train one learning variant per seed under `<out>/<mode>-seed<seed>/`.
    Train,
    /// Run the configured experiment sweep into `<out>/`.
    Sweep,
}

/// Lower-bound result record written as TOML.
#[derive(Serialize)]
struct LowerBoundRecord {
    value: f64,
    t_opt: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    /// Little-endian relay mode bitstring (1 = passive).
    modes: String,
    /// Realized throughput of the solution action on the generated state.
    reward: f64,
    seed: u64,
    w0: Vec<[f64; 2]>,
    w1: Vec<[f64; 2]>,
    relay_powers: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    // Configuration phase: failures here are usage errors (exit 2).
    let config = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {}", e);
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };

    match run(&cli, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn seeds_for(cli: &Cli, config: &ExperimentConfig) -> Vec<u64> {
    match cli.seed {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    }
}

fn run(cli: &Cli, config: &ExperimentConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match cli.command {
        Command::GenTopology => {
            let path = cli.out.join("config.toml");
            config.save(&path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::LowerBound => lower_bound(cli, config),
        Command::Baseline => baseline(cli, config),
        Command::Train => train(cli, config),
        Command::Sweep => {
            let rows = harness::run_sweep_to(config, &cli.out)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                cli.out.join("results.csv").display()
            );
            Ok(())
        }
    }
}

fn lower_bound(cli: &Cli, config: &ExperimentConfig) -> Result<(), Error> {
    let seed = cli.seed.unwrap_or(config.seeds[0]);
    let mut env = Env::new(config.default_env_config())?;
    env.reset(seed);
    let modes = config.instance_modes()?;
    let cfg = env.config().clone();
    let ch = &env.state().channels;
    let phases = if modes.iter().any(|&m| m) {
        cophase_passive(ch, &modes, cfg.gamma_max)?
    } else {
        vec![0.0; modes.len()]
    };
    let relay_cfg = RelayConfig {
        modes: modes.clone(),
        phases: phases.clone(),
        gamma_max: cfg.gamma_max,
    };
    let enh = enhance_channels(ch, &relay_cfg)?;
    let solver = config.lb_solver();
    let res = solver.solve(&enh, &cfg.budget)?;
    let mut action = realize_action(
        &enh,
        &cfg.budget,
        &modes,
        &phases,
        res.t_opt,
        &res.w0_opt,
        &res.w1_opt,
    );
    action.relay_powers.clear();
    let reward = env.peek_reward(&action)?;

    let record = LowerBoundRecord {
        value: res.value,
        t_opt: res.t_opt,
        gap: res.gap,
        iterations: res.iterations,
        converged: res.converged,
        modes: harness::csv::modes_bitstring(
            wpbr_core::agent::modes_to_index(&modes),
            modes.len(),
        ),
        reward,
        seed,
        w0: res.w0_opt.iter().map(|z| [z.re, z.im]).collect(),
        w1: res.w1_opt.iter().map(|z| [z.re, z.im]).collect(),
        relay_powers: res.relay_powers.clone(),
    };
    let path = cli.out.join("lower_bound.toml");
    let text = toml::to_string_pretty(&record)
        .map_err(|e| Error::Config(format!("serialize record: {}", e)))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    println!(
        "lower bound {:.6} at t = {:.4} (gap {:.2e}, {} iterations, realized reward {:.6})",
        res.value, res.t_opt, res.gap, res.iterations, reward
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn baseline(cli: &Cli, config: &ExperimentConfig) -> Result<(), Error> {
    let seeds = seeds_for(cli, config);
    let solver = config.lb_solver();
    let mut env = Env::new(config.default_env_config())?;
    let n = env.num_relays();
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut timings: Vec<TimingRow> = Vec::new();
    for &seed in &seeds {
        env.reset(seed);
        for name in &config.sweep.schemes {
            let scheme: Scheme = name.parse()?;
            let t0 = std::time::Instant::now();
            let out = harness::run_baseline(scheme, &env, &solver, seed)?;
            let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
            rows.push(ResultRow {
                scheme: scheme.label().to_string(),
                p_t_dbm: config.link.p_t_dbm,
                l_e_db: config.path_loss.direct_extra_attenuation_db,
                n,
                seed,
                episode: 0,
                reward_mean: out.reward,
                reward_std: 0.0,
                modes: out.mode_index,
            });
            timings.push(TimingRow {
                scheme: scheme.label().to_string(),
                p_t_dbm: config.link.p_t_dbm,
                l_e_db: config.path_loss.direct_extra_attenuation_db,
                n,
                seed,
                episode: 0,
                runtime_ms: elapsed_ms,
            });
            println!(
                "seed {} {}: reward {:.6}",
                seed,
                scheme.label(),
                rows.last().unwrap().reward_mean
            );
        }
    }
    emit_csv(&rows, &cli.out.join("results.csv"))?;
    emit_timing_csv(&timings, &cli.out.join("timing.csv"))?;
    println!("wrote {}", cli.out.join("results.csv").display());
    Ok(())
}

fn train(cli: &Cli, config: &ExperimentConfig) -> Result<(), Error> {
    let mode: TrainMode = cli
        .mode
        .as_deref()
        .unwrap_or(&config.train.mode)
        .parse()?;
    let seeds = seeds_for(cli, config);
    for &seed in &seeds {
        let run = harness::run_train(config, mode, seed, &cli.out)?;
        let last = run.rows.last();
        println!(
            "{} seed {}: {} episodes, final reward {:.6} -> {}",
            mode.label(),
            seed,
            run.rows.len(),
            last.map(|r| r.reward_mean).unwrap_or(0.0),
            run.run_dir.display()
        );
    }
    Ok(())
}
