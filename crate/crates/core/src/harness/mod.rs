//! Configuration, baselines, sweeps, training runs, and CSV output.

pub mod baseline;
pub mod config;
pub mod csv;
pub mod sweep;
pub mod train;

pub use baseline::{run_baseline, BaselineOutcome, Scheme};
pub use config::{derive_seed, ExperimentConfig};
pub use csv::{emit_csv, emit_timing_csv, parse_csv, ResultRow, TimingRow};
pub use sweep::{run_sweep, run_sweep_to};
pub use train::{run_train, save_checkpoints, train_episodes, TrainRun};
