use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sam-balance"));
    c.env_remove("SAM_BALANCE_OUT");
    c
}

fn preset_file(preset: &str, member: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(preset).join(format!("{member}.json"))
}

/// Copy of a preset member with a short horizon.
fn short_config(dir: &Path, preset: &str, member: &str, steps: u64) -> PathBuf {
    let text = std::fs::read_to_string(preset_file(preset, member)).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["T"] = steps.into();
    let path = dir.join(format!("{preset}_{member}.json"));
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), "fig1a", "sam", 1000);
    let out_file = dir.path().join("a.csv");
    let out = bin().args(["run", "--config"]).arg(&config).arg("--out").arg(&out_file).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_file).unwrap();
    assert!(csv.starts_with("step,loss,B,C,"));
    assert_eq!(csv.lines().count(), 1 + 10);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), "fig1b", "sam", 300);
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let out = bin().args(["run", "--seed", seed, "--config"]).arg(&config).arg("--out").arg(&path).output().unwrap();
        assert_eq!(code(&out), 0);
        std::fs::read_to_string(path).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("1", "b.csv"));
    assert_ne!(run("1", "a.csv"), run("2", "c.csv"));
}

#[test]
fn default_output_dir_comes_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), "fig1a", "sgd", 100);
    let out = bin().env("SAM_BALANCE_OUT", dir.path().join("o")).args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("o/run.csv").exists());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"problem": {"kind": "op", "target": 0.5, "snr_alpha": -1}}"#).unwrap();
    let out_file = dir.path().join("x.csv");
    let out = bin().args(["run", "--config"]).arg(&config).arg("--out").arg(&out_file).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(!out_file.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

    let missing = bin().args(["run", "--config"]).arg(dir.path().join("nope.json")).output().unwrap();
    assert_eq!(code(&missing), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&bin().arg("train").output().unwrap()), 2);
    assert_eq!(code(&bin().args(["preset", "fig9"]).output().unwrap()), 2);
    assert_eq!(code(&bin().args(["verify", "--suite", "nothing"]).output().unwrap()), 2);
}

#[test]
fn sweep_writes_summary_and_rejects_bad_axis() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), "fig1a", "sam", 200);
    let out_dir = dir.path().join("sw");
    let out = bin()
        .args(["sweep", "--axis", "snr_alpha", "--values", "0.5,1", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "snr_alpha_0.5.csv", "snr_alpha_1.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let bad = bin().args(["sweep", "--axis", "lr", "--values", "1", "--config"]).arg(&config).output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn preset_file_run_matches_preset_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["preset", "saddle", "--out"]).arg(dir.path().join("p")).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let single = dir.path().join("sgd.csv");
    let out = bin().args(["run", "--config"]).arg(preset_file("saddle", "sgd")).arg("--out").arg(&single).output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(&single).unwrap(), std::fs::read(dir.path().join("p/sgd.csv")).unwrap());
    assert!(dir.path().join("p/obar.csv").exists());
}

#[test]
fn verify_exit_codes_follow_results() {
    let ok = bin().args(["verify", "--suite", "gradients"]).output().unwrap();
    assert_eq!(code(&ok), 0);
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.lines().count() >= 2 && stdout.lines().all(|l| l.starts_with("PASS ")));

    let saddle = bin().args(["verify", "--suite", "saddle"]).output().unwrap();
    assert_eq!(code(&saddle), 1);
    assert!(String::from_utf8_lossy(&saddle.stdout).starts_with("FAIL "));
}
