//! End-to-end checks of the command-line interface: subcommands, exit
//! codes, and output files.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alloc-arena"))
}

#[test]
fn allocate_greedy_matches_reference_example() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("p.txt");
    fs::write(&probs, "0.5\n0.1\n").unwrap();
    let out = bin()
        .args(["allocate", "--probs"])
        .arg(&probs)
        .args(["--budget", "3", "--tau", "1", "--method", "greedy"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2 1");
}

#[test]
fn allocate_lagrangian_returns_feasible_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("p.txt");
    fs::write(&probs, "0.3\n0.1\n0.05\n").unwrap();
    let out = bin()
        .args(["allocate", "--probs"])
        .arg(&probs)
        .args(["--budget", "30", "--tau", "1", "--method", "lagrangian"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let counts: Vec<u32> = String::from_utf8_lossy(&out.stdout)
        .trim()
        .split(' ')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(counts.len(), 3);
    assert_eq!(counts.iter().sum::<u32>(), 30);
    assert!(counts.iter().all(|&n| n >= 1));
}

#[test]
fn missing_config_file_exits_one_with_path() {
    let out = bin()
        .args(["run", "--config", "/nonexistent/missing.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/nonexistent/missing.cfg"),
        "stderr should name the path: {stderr}"
    );
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "does_not_exist = 1\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does_not_exist"));
}

#[test]
fn bad_usage_exits_one() {
    let out = bin().args(["allocate", "--budget", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn version_and_help_exit_zero() {
    let out = bin().arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("alloc-arena"));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["run", "allocate", "compare"] {
        assert!(text.contains(sub), "help should mention '{sub}'");
    }
}

fn small_config(dir: &Path, seed: u64) -> std::path::PathBuf {
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "n_types = 4\nn_units = 40\nhorizon = 24\nburn_in = 5\nn_sims = 3\n\
             shifts = 0:12:0.7\nseed = {seed}\nrl_offline_episodes = 10\n"
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn run_writes_metrics_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 9);
    let out_dir = dir.path().join("results");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("metrics.csv").exists());
    assert!(out_dir.join("run_metadata.txt").exists());
    assert!(out_dir.join("coverage_vs_time.svg").exists());
    assert!(out_dir.join("mse_vs_time.svg").exists());
    assert!(out_dir.join("probabilities.svg").exists());

    let csv = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("sim_id,t,strategy,coverage,mse\n"));
    // 3 sims x 24 steps x 4 strategies records plus the header.
    assert_eq!(csv.lines().count(), 3 * 24 * 4 + 1);

    // The metadata echo resolves every parameter, including the seed.
    let meta = fs::read_to_string(out_dir.join("run_metadata.txt")).unwrap();
    assert!(meta.contains("seed = 9"));
    assert!(meta.contains("rl_gamma ="));
}

#[test]
fn seed_precedence_cli_over_env_over_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 100);

    // Env var overrides the config seed.
    let out_env = dir.path().join("env_out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_env)
        .env("ALLOC_ARENA_SEED", "555")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let meta = fs::read_to_string(out_env.join("run_metadata.txt")).unwrap();
    assert!(meta.contains("seed = 555"));

    // Explicit --seed beats the env var.
    let out_cli = dir.path().join("cli_out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_cli)
        .args(["--seed", "777"])
        .env("ALLOC_ARENA_SEED", "555")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let meta = fs::read_to_string(out_cli.join("run_metadata.txt")).unwrap();
    assert!(meta.contains("seed = 777"));
}

#[test]
fn identical_seeds_give_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 11);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(0));
    }
    let a = fs::read(out_a.join("metrics.csv")).unwrap();
    let b = fs::read(out_b.join("metrics.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn compare_reads_back_written_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 13);
    let out_dir = dir.path().join("results");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));

    let out = bin()
        .args(["compare", "--csv"])
        .arg(out_dir.join("metrics.csv"))
        .args(["--a", "rolling_lagrangian", "--b", "rl", "--burn-in", "5"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("W = "));
    assert!(text.contains("p_value = "));

    // Unknown strategy name is a usage error.
    let out = bin()
        .args(["compare", "--csv"])
        .arg(out_dir.join("metrics.csv"))
        .args(["--a", "ucb", "--b", "rl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
