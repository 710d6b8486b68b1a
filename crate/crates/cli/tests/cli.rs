//! End-to-end checks of the `crossdiff` binary: exit codes, artifact layout,
//! and byte-stable reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crossdiff::harness::config::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crossdiff"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small but valid experiment: same shape as the default, shrunk until a
/// converge-reg run takes seconds.
fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_experiment();
    cfg.master_seed = 99;
    cfg.grid.m = 1024;
    cfg.time.t_end = 0.02;
    cfg.time.snapshots = 3;
    cfg.particles.n_list = vec![40, 160];
    cfg.particles.seeds = 2;
    cfg.sweeps.reg_n_list = vec![16, 256];
    cfg.sweeps.variance_n_list = vec![64, 256];
    cfg.sweeps.variance_seeds = 8;
    cfg.validate().unwrap();
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("converge-n"), "help should list subcommands:\n{text}");
}

#[test]
fn print_config_emits_the_default_experiment() {
    let out = bin().arg("print-config").output().unwrap();
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_toml_str(&stdout_of(&out)).unwrap();
    assert_eq!(cfg.master_seed, ExperimentConfig::default_experiment().master_seed);
}

#[test]
fn converge_reg_writes_results_and_passing_verdict() {
    let dir = tmp("reg_run");
    let cfg_path = write_config(&dir, &tiny_config());
    let out_dir = dir.join("out");
    let out = bin()
        .args(["--config", cfg_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .arg("converge-reg")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        stdout_of(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.lines().count() > 1, "results.csv should have data rows:\n{csv}");
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("verdict.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["experiment"], "converge-reg");
    assert_eq!(verdict["passed"], true);
    assert!(out_dir.join("rate.dat").exists());
}

#[test]
fn invalid_config_is_refused_before_running() {
    let dir = tmp("bad_config");
    let mut cfg = tiny_config();
    // violates the well-posedness order relation between drift and diffusion
    cfg.model.beta = 0.8;
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let out = bin()
        .args(["--config", path.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .arg("converge-reg")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn reruns_and_thread_counts_leave_results_byte_identical() {
    let dir = tmp("rerun");
    let cfg_path = write_config(&dir, &tiny_config());
    let mut outputs = Vec::new();
    for (sub, threads) in [("a", "1"), ("b", "2"), ("c", "1")] {
        let out_dir = dir.join(sub);
        let out = bin()
            .args([
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .arg("converge-reg")
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr:\n{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(out_dir.join("results.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "thread count changed results.csv");
    assert_eq!(outputs[0], outputs[2], "rerun changed results.csv");
}
