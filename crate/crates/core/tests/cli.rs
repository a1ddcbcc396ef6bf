//! End-to-end checks of the `wpbr` binary: exit codes, file layout, and
//! byte-level determinism of seeded runs.

use std::path::Path;
use std::process::Command;

fn wpbr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wpbr"))
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
seeds = [7]

[topology]
hap = [0.0, 0.0]
receiver = [10.0, 0.0]
relays = [[4.0, 1.0], [4.0, -1.0]]
antennas = 2

[agent]
hidden = 16
batch_size = 8

[train]
episodes = 3
epochs_per_episode = 4
mode = "simplified"

[solver]
train_epsilon = 5e-2
train_max_iterations = 30

[sweep]
schemes = ["dl_only", "max_dl"]
p_t_dbm = [0.0]
l_e_db = [35.0]
relay_counts = [1, 2]
draws_per_cell = 2
"#,
    )
    .unwrap();
    path
}

#[test]
fn help_exits_zero() {
    let out = wpbr().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--seed", "--out", "--mode"] {
        assert!(text.contains(flag), "--help missing {}", flag);
    }
    for sub in ["gen-topology", "lower-bound", "train", "baseline", "sweep"] {
        assert!(text.contains(sub), "--help missing {}", sub);
    }
}

#[test]
fn unknown_flag_exits_two() {
    let out = wpbr().args(["train", "--bogus-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn missing_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = wpbr()
        .args(["baseline", "--config", "/nonexistent/nope.toml"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seeds = \"oops\"").unwrap();
    let out = wpbr()
        .args(["baseline", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_topology_writes_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = wpbr()
        .arg("gen-topology")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let config = dir.path().join("config.toml");
    assert!(config.exists());
    // The generated file round-trips through the loader.
    let out2 = wpbr()
        .args(["gen-topology", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out2.status.code(), Some(0));
}

#[test]
fn lower_bound_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = wpbr()
        .args(["lower-bound", "--seed", "3", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("lower_bound.toml")).unwrap();
    let record: toml::Value = toml::from_str(&text).unwrap();
    assert!(record["value"].as_float().unwrap() > 0.0);
    assert!(record["converged"].as_bool().unwrap());
    assert_eq!(record["seed"].as_integer().unwrap(), 3);
    assert_eq!(record["modes"].as_str().unwrap(), "00");
}

#[test]
fn seeded_train_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let run = |out_dir: &Path| {
        let out = wpbr()
            .args(["train", "--seed", "7", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(out_dir.join("simplified-seed7").join("results.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a, b, "train --seed 7 must be byte-identical across reruns");
}

#[test]
fn baseline_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = wpbr()
        .args(["baseline", "--seed", "5", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let rows = wpbr_core::harness::parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 2); // two schemes, one seed
    assert!(rows.iter().any(|r| r.scheme == "dl_only"));
    assert!(dir.path().join("timing.csv").exists());
}

#[test]
fn sweep_emits_rows_for_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = wpbr()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let rows = wpbr_core::harness::parse_csv(&text).unwrap();
    // schemes(2) x p_t(1) x l_e(1) x relay_counts(2) x seeds(1)
    assert_eq!(rows.len(), 4);
}
