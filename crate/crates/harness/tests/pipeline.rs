use std::path::Path;
use std::process::Command;

use metaplan::config::TaskDirs;
use metaplan::metrics::parse_csv;
use metaplan::{run_pipeline, ExperimentConfig, HarnessError, METRICS_HEADER};

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn smoke_run_resume_and_rerun() {
    let cfg = ExperimentConfig::smoke();
    let a = tempfile::tempdir().unwrap();
    let out = run_pipeline(&cfg, a.path()).unwrap();
    let metrics = read(&a.path().join("metrics.csv"));
    assert_eq!(metrics.lines().next(), Some(METRICS_HEADER));
    // 3 test tasks x (4 classical + 3 learned x 2 seeds)
    assert_eq!(out.rows.len(), 30);
    assert_eq!(out.table[0].heuristic, "blind");
    assert_eq!(out.table[0].normalized_expansions, 1.0);
    assert!(!out.selected.is_empty());
    for f in ["manifest.json", "config.toml", "table.csv", "selection.json", "models/mrl_s1.ckpt", "models/super_s0.ckpt", "plots/gripper-strips_expansions.svg", "plots/gripper-strips_plan_length.csv"] {
        assert!(a.path().join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(&a.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["disjoint"], true);

    let again = run_pipeline(&cfg, a.path()).unwrap();
    assert_eq!(again.skipped.len(), 6);
    assert_eq!(read(&a.path().join("metrics.csv")), metrics);

    let b = tempfile::tempdir().unwrap();
    run_pipeline(&cfg, b.path()).unwrap();
    assert_eq!(read(&b.path().join("metrics.csv")), metrics);
    assert_eq!(std::fs::read(a.path().join("models/mrl_s0.ckpt")).unwrap(), std::fs::read(b.path().join("models/mrl_s0.ckpt")).unwrap());

    let c = tempfile::tempdir().unwrap();
    run_pipeline(&ExperimentConfig { parallel: true, ..cfg.clone() }, c.path()).unwrap();
    assert_eq!(read(&c.path().join("metrics.csv")), metrics);
}

#[test]
fn changed_config_refuses_to_resume() {
    let mut cfg = ExperimentConfig::smoke();
    cfg.heuristics = vec!["blind".into(), "hmax".into()];
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&cfg, dir.path()).unwrap();
    cfg.seeds = vec![5];
    assert!(matches!(run_pipeline(&cfg, dir.path()), Err(HarnessError::Config(_))));
}

#[test]
fn overlapping_task_dirs_are_rejected() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::smoke();
    cfg.heuristics = vec!["blind".into(), "hmax".into()];
    let gen = tempfile::tempdir().unwrap();
    run_pipeline(&cfg, gen.path()).unwrap();
    let tasks = gen.path().join("tasks");
    cfg.task_dirs = Some(TaskDirs { candidates: tasks.join("candidates"), validation: tasks.join("validation"), test: tasks.join("candidates") });
    let err = run_pipeline(&cfg, &root.path().join("run")).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");

    cfg.task_dirs = Some(TaskDirs { candidates: tasks.join("candidates"), validation: tasks.join("validation"), test: tasks.join("test") });
    let rows = parse_csv(&read(&run_pipeline(&cfg, &root.path().join("ok")).unwrap().outdir.join("metrics.csv"))).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn failed_stage_leaves_resumable_state() {
    let mut cfg = ExperimentConfig::smoke();
    // no single-task policy can beat the optimum, so nothing is eligible
    cfg.itts.convergence_ratio = 2.0;
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&cfg, dir.path()).unwrap_err();
    assert!(matches!(&err, HarnessError::Stage { stage, .. } if stage == "select"), "{err}");
    assert_eq!(err.exit_code(), 3);
    let state: serde_json::Value = serde_json::from_str(&read(&dir.path().join("state.json"))).unwrap();
    assert_eq!(state["completed"], serde_json::json!(["tasks"]));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_metaplan")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn cli_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p).to_string_lossy().into_owned();

    let dump = cli(&["config", "--dump", "--smoke"]);
    assert!(dump.status.success());
    let text = String::from_utf8(dump.stdout).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), ExperimentConfig::smoke());

    assert_eq!(cli(&["--config", &d("missing.toml"), "pipeline", "--out", &d("run")]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "seeds = []\n").unwrap();
    assert_eq!(cli(&["--config", &d("bad.toml"), "config"]).status.code(), Some(2));
    assert_eq!(cli(&["gen", "--domain", "nurikabe", "--n", "2", "--out", &d("x")]).status.code(), Some(2));

    assert!(cli(&["gen", "--domain", "gripper", "--n", "2", "--seed", "7", "--out", &d("gen")]).status.success());
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("gen/manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 7);
    let plan = cli(&["plan", &d("gen/domain.pddl"), &d("gen/gripper-s7-000.pddl"), "--heuristic", "hmax"]);
    assert!(plan.status.success());
    let steps = String::from_utf8(plan.stdout).unwrap().lines().count() as f64;
    assert_eq!(steps, manifest["tasks"][0]["optimal_cost"].as_f64().unwrap());
    assert!(String::from_utf8(plan.stderr).unwrap().starts_with("solved"));

    assert_eq!(cli(&["plan", &d("gen/domain.pddl"), &d("gen/gripper-s7-000.pddl"), "--heuristic", "mrl"]).status.code(), Some(2));
}
