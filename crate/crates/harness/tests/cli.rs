use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use safelimit::records::{self, RECORDS_FILE, RUNS_DIR};
use safelimit::ExperimentConfig;
use tempfile::tempdir;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn safelimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safelimit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_configs_load() {
    let expected_runs = [
        ("ablation.json", 20),
        ("ablation_large_batch.json", 20),
        ("adaptive_vs_fixed.json", 10),
        ("defaults.json", 5),
        ("dsafe_sweep.json", 20),
        ("pointmass.json", 5),
    ];
    for (name, runs) in expected_runs {
        let cfg = ExperimentConfig::load(&configs_dir().join(name)).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.jobs().len() * cfg.seeds.len(), runs, "{name}");
    }
    let defaults = ExperimentConfig::load(&configs_dir().join("defaults.json")).unwrap();
    assert_eq!(defaults, ExperimentConfig::default());
}

#[test]
fn bad_field_is_reported_with_its_path() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"env": {"horizon": -3}}"#).unwrap();
    let out = safelimit(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("env.horizon"), "{}", stderr(&out));

    fs::write(&cfg, r#"{"safety": {"d_safe": 0.05}}"#).unwrap();
    let out = safelimit(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("safety"), "{}", stderr(&out));

    let out = safelimit(&["run", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("absent.json"), "{}", stderr(&out));
}

#[test]
fn unknown_preset_lists_the_choices() {
    let out = safelimit(&["run", "--config", "x.json", "--preset", "bogus"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("adaptive_vs_fixed"), "{}", stderr(&out));
}

#[test]
fn run_emit_verify_round_trip() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(
        &cfg,
        r#"{"env": {"horizon": 30},
            "learner": {"pretrain_iterations": 1, "episodes_per_batch_pretrain": 3,
                        "episodes_per_batch_finetune": 2, "finetune_iterations": 4}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = safelimit(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--preset",
        "ablation",
        "--seeds",
        "3,7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dirs = records::run_dirs(&out_dir).unwrap();
    assert_eq!(dirs.len(), 8);
    assert!(dirs.iter().any(|d| d.ends_with("v3_no_dpu2-d0.5-s7")));

    fs::remove_file(dirs[0].join(records::ITERATIONS_CSV)).unwrap();
    let out = safelimit(&["emit-csv", "--run", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 9);
    assert!(dirs[0].join(records::ITERATIONS_CSV).is_file());

    let out = safelimit(&["verify", "--run", out_dir.to_str().unwrap(), "--d-safe", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 run(s) audited, 0 failed"));

    // Break the bound in one full-variant record: verify must fail.
    let path = out_dir.join(RUNS_DIR).join("full-d0.5-s3").join(RECORDS_FILE);
    let mut recs = records::read_records(&path).unwrap();
    recs[0].t_lim_next = 1e3;
    let text: String = recs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(&path, text).unwrap();
    let out = safelimit(&["verify", "--run", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn missing_run_directory_fails() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("missing");
    for cmd in ["emit-csv", "verify"] {
        let out = safelimit(&[cmd, "--run", missing.to_str().unwrap()]);
        assert!(!out.status.success());
        assert!(stderr(&out).contains("does not exist"), "{}", stderr(&out));
    }
}
