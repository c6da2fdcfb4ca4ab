//! The resumable end-to-end run. Every stage reads its inputs from the run
//! directory, so a rerun skips finished stages and continues where a failed
//! one stopped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use metaplan_core::generators::generate_tasks;
use metaplan_core::search::validate_plan;
use metaplan_learn::itts::select_tasks;
use metaplan_learn::meta::PROGRESS_HEADER;
use metaplan_learn::supervised::{build_dataset, train_regressor, Regressor, SuperConfig};
use metaplan_learn::{meta_train, AgentParams, MetaConfig, TaskRef, ValueToCost};
use metaplan_nn::Checkpoint;

use crate::config::{ExperimentConfig, ABLATION};
use crate::metrics::{self, aggregate_table, evaluate, render_table, table_csv, EvalHeuristic, MetricsRow, TableEntry};
use crate::plots::{grouped_bar_chart, grouped_bar_csv, line_chart, line_csv, mean_std, BarGroup, Series};
use crate::taskio::{check_disjoint, TaskDir};
use crate::{read_file, write_file, HarnessError, Result};

pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Default, Serialize, Deserialize)]
struct RunState {
    fingerprint: String,
    completed: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub outdir: PathBuf,
    /// Rows as read back from metrics.csv (without plans).
    pub rows: Vec<MetricsRow>,
    pub table: Vec<TableEntry>,
    pub selected: Vec<String>,
    /// Stages found complete and skipped.
    pub skipped: Vec<String>,
}

pub struct TaskSets {
    pub candidates: TaskDir,
    pub validation: TaskDir,
    pub test: TaskDir,
}

pub fn load_task_sets(outdir: &Path, state_cap: usize) -> Result<TaskSets> {
    let load = |name: &str| TaskDir::load(&outdir.join("tasks").join(name), state_cap);
    Ok(TaskSets { candidates: load("candidates")?, validation: load("validation")?, test: load("test")? })
}

#[derive(Debug, Clone, Deserialize)]
struct SelectionIds {
    selected: Vec<String>,
}

/// Ids of the tasks chosen by selection, in selection order.
pub fn load_selection(outdir: &Path) -> Result<Vec<String>> {
    let path = outdir.join("selection.json");
    let ids: SelectionIds = serde_json::from_str(&read_file(&path)?).map_err(|e| HarnessError::Failed(format!("{}: {e}", path.display())))?;
    Ok(ids.selected)
}

/// Candidates listed in `ids`, in that order.
pub fn pick<'a>(set: &'a TaskDir, ids: &[String]) -> Result<Vec<TaskRef<'a>>> {
    ids.iter()
        .map(|id| {
            set.tasks
                .iter()
                .find(|t| &t.id == id)
                .map(|t| TaskRef { task: &t.task, optimal_cost: t.optimal_cost })
                .ok_or_else(|| HarnessError::Failed(format!("selected task {id} is not a candidate")))
        })
        .collect()
}

pub fn model_path(outdir: &Path, heuristic: &str, seed: u64) -> PathBuf {
    outdir.join("models").join(format!("{heuristic}_s{seed}.ckpt"))
}

struct Run<'a> {
    cfg: ExperimentConfig,
    outdir: &'a Path,
    state: RunState,
    skipped: Vec<String>,
}

impl<'a> Run<'a> {
    fn open(cfg: &ExperimentConfig, outdir: &'a Path) -> Result<Self> {
        cfg.validate()?;
        let fingerprint = format!("{:016x}", cfg.fingerprint());
        let path = outdir.join(STATE_FILE);
        let state = if path.exists() {
            let state: RunState = serde_json::from_str(&read_file(&path)?).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            if state.fingerprint != fingerprint {
                return Err(HarnessError::Config(format!("{} belongs to a run with a different config; use a fresh directory", outdir.display())));
            }
            state
        } else {
            RunState { fingerprint, completed: Vec::new() }
        };
        let run = Run { cfg: cfg.resolved(), outdir, state, skipped: Vec::new() };
        write_file(&outdir.join("config.toml"), cfg.to_toml())?;
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> Result<()> {
        write_file(&self.outdir.join(STATE_FILE), serde_json::to_string_pretty(&self.state).expect("state serializes") + "\n")
    }

    /// Runs `f` unless `name` already completed. Failures other than
    /// configuration errors become stage errors pointing at the state file.
    fn stage(&mut self, name: &str, f: impl FnOnce(&ExperimentConfig, &Path) -> Result<()>) -> Result<()> {
        if self.state.completed.iter().any(|s| s == name) {
            log::info!("stage {name}: already complete");
            self.skipped.push(name.to_string());
            return Ok(());
        }
        log::info!("stage {name}: running");
        match f(&self.cfg, self.outdir) {
            Ok(()) => {
                self.state.completed.push(name.to_string());
                self.save()
            }
            Err(e @ HarnessError::Config(_)) => Err(e),
            Err(e) => Err(HarnessError::Stage { stage: name.to_string(), message: e.to_string(), state: self.outdir.join(STATE_FILE) }),
        }
    }
}

pub fn run_pipeline(cfg: &ExperimentConfig, outdir: &Path) -> Result<PipelineOutcome> {
    let mut run = Run::open(cfg, outdir)?;
    run_prefix(&mut run)?;
    for &seed in &cfg.seeds {
        run.stage(&format!("train-s{seed}"), |cfg, dir| train_seed(cfg, dir, seed))?;
    }
    run.stage("evaluate", stage_evaluate)?;
    run.stage("report", stage_report)?;
    let rows = metrics::parse_csv(&read_file(&outdir.join("metrics.csv"))?)?;
    let table = aggregate_table(&rows)?;
    let selected = if needs_selection(cfg) { load_selection(outdir)? } else { Vec::new() };
    Ok(PipelineOutcome { outdir: outdir.to_path_buf(), rows, table, selected, skipped: run.skipped })
}

/// Runs (or resumes) only the task and selection stages.
pub fn prepare_tasks(cfg: &ExperimentConfig, outdir: &Path) -> Result<()> {
    let mut run = Run::open(cfg, outdir)?;
    run_prefix(&mut run)
}

fn run_prefix(run: &mut Run<'_>) -> Result<()> {
    run.stage("tasks", stage_tasks)?;
    if needs_selection(&run.cfg) {
        run.stage("select", stage_select)?;
    }
    Ok(())
}

fn needs_selection(cfg: &ExperimentConfig) -> bool {
    cfg.wants("mrl") || cfg.wants("super")
}

fn stage_tasks(cfg: &ExperimentConfig, outdir: &Path) -> Result<()> {
    let sets = match &cfg.task_dirs {
        Some(d) => {
            let load = |p: &Path| TaskDir::load(p, cfg.oracle_state_cap);
            TaskSets { candidates: load(&d.candidates)?, validation: load(&d.validation)?, test: load(&d.test)? }
        }
        None => {
            let n = cfg.candidates + cfg.validation + cfg.test;
            let mut all = generate_tasks(&cfg.template, n, cfg.task_seed).map_err(|e| HarnessError::Failed(e.to_string()))?;
            let test = all.split_off(cfg.candidates + cfg.validation);
            let validation = all.split_off(cfg.candidates);
            let dir = |tasks| TaskDir::from_generated(cfg.template, cfg.task_seed, tasks);
            TaskSets { candidates: dir(all), validation: dir(validation), test: dir(test) }
        }
    };
    let named = [("candidates", &sets.candidates), ("validation", &sets.validation), ("test", &sets.test)];
    for (name, set) in named {
        if let Some(t) = set.tasks.iter().find(|t| !t.optimal_cost.is_finite()) {
            return Err(HarnessError::Config(format!("{name} task {} has no plan within the limits", t.id)));
        }
    }
    check_disjoint(&named.map(|(n, s)| (n, s.tasks.as_slice())))?;
    for (name, set) in named {
        set.write(&outdir.join("tasks").join(name))?;
    }
    Ok(())
}

fn stage_select(cfg: &ExperimentConfig, outdir: &Path) -> Result<()> {
    let sets = load_task_sets(outdir, cfg.oracle_state_cap)?;
    let outcome = select_tasks(&sets.candidates.refs(), &sets.validation.refs(), &cfg.itts)?;
    let ids: Vec<&str> = sets.candidates.tasks.iter().map(|t| t.id.as_str()).collect();
    let doc = json!({
        "epsilon_diff": outcome.log.epsilon_diff,
        "selected": outcome.log.selected.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
        "candidates": ids,
        "eligible": outcome.eligible,
        "audit": outcome.log.audit,
        "delta": outcome.delta,
        "rho": outcome.rho,
    });
    log::info!("selected {} of {} candidates", outcome.log.selected.len(), ids.len());
    write_file(&outdir.join("selection.json"), serde_json::to_string_pretty(&doc).expect("selection serializes") + "\n")
}

fn save_progress(path: &Path, report: &metaplan_learn::TrainReport) -> Result<()> {
    let mut text = String::from(PROGRESS_HEADER);
    text.push('\n');
    for row in &report.progress {
        text.push_str(&row.csv());
        text.push('\n');
    }
    write_file(path, text)
}

fn train_meta_model(cfg: &ExperimentConfig, outdir: &Path, name: &str, seed: u64, tasks: &[TaskRef<'_>], validation: &[TaskRef<'_>], ids: &[String]) -> Result<()> {
    let meta = MetaConfig { seed, ..cfg.meta.clone() };
    let report = meta_train(tasks, validation, &meta)?;
    let extra = json!({
        "heuristic": name,
        "seed": seed,
        "best_iteration": report.best_iteration,
        "validation_ratio": report.best_validation.as_ref().map(|v| v.return_ratio()),
        "training_tasks": ids,
    });
    let path = model_path(outdir, name, seed);
    ensure_models_dir(outdir)?;
    report.params.to_checkpoint(extra).save(&path)?;
    save_progress(&path.with_extension("progress.csv"), &report)
}

fn train_super_model(cfg: &SuperConfig, goal_features: bool, limits: &metaplan_core::SearchLimits, tasks: &[TaskRef<'_>], seed: u64) -> Result<(Regressor, String)> {
    let grounded: Vec<&metaplan_core::GroundTask> = tasks.iter().map(|t| t.task).collect();
    let data = build_dataset(&grounded, goal_features, limits, cfg.exec);
    let reg = train_regressor(&data, &SuperConfig { seed, ..cfg.clone() })?;
    Ok((reg, data.to_csv()))
}

fn ensure_models_dir(outdir: &Path) -> Result<()> {
    let dir = outdir.join("models");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))
}

fn train_seed(cfg: &ExperimentConfig, outdir: &Path, seed: u64) -> Result<()> {
    let sets = load_task_sets(outdir, cfg.oracle_state_cap)?;
    let validation = sets.validation.refs();
    if needs_selection(cfg) {
        let ids = load_selection(outdir)?;
        let selected = pick(&sets.candidates, &ids)?;
        if cfg.wants("mrl") {
            train_meta_model(cfg, outdir, "mrl", seed, &selected, &validation, &ids)?;
        }
        if cfg.wants("super") {
            let (reg, data) = train_super_model(&cfg.supervised, cfg.env.goal_features, &cfg.limits, &selected, seed)?;
            let path = model_path(outdir, "super", seed);
            write_file(&path.with_extension("data.csv"), data)?;
            ensure_models_dir(outdir)?;
            reg.to_checkpoint().save(&path)?;
        }
    }
    if cfg.wants(ABLATION) {
        let ids: Vec<String> = sets.candidates.tasks.iter().map(|t| t.id.clone()).collect();
        train_meta_model(cfg, outdir, ABLATION, seed, &sets.candidates.refs(), &validation, &ids)?;
    }
    Ok(())
}

/// Loaded models for every learned heuristic of the roster, per seed.
pub struct Models {
    pub agents: Vec<(String, u64, AgentParams)>,
    pub regressors: Vec<(String, u64, Regressor)>,
}

impl Models {
    pub fn load(cfg: &ExperimentConfig, outdir: &Path) -> Result<Self> {
        let mut models = Models { agents: Vec::new(), regressors: Vec::new() };
        for h in &cfg.heuristics {
            for &seed in &cfg.seeds {
                let ck = || Checkpoint::load(&model_path(outdir, h, seed));
                match h.as_str() {
                    "mrl" | ABLATION => models.agents.push((h.clone(), seed, AgentParams::from_checkpoint(&ck()?)?)),
                    "super" => models.regressors.push((h.clone(), seed, Regressor::from_checkpoint(&ck()?)?)),
                    _ => {}
                }
            }
        }
        Ok(models)
    }

    /// Roster order; learned heuristics once per seed.
    pub fn roster<'m>(&'m self, cfg: &ExperimentConfig) -> Vec<EvalHeuristic<'m>> {
        let mut out = Vec::new();
        for h in &cfg.heuristics {
            match h.as_str() {
                "mrl" | ABLATION => out.extend(self.agents.iter().filter(|a| &a.0 == h).map(|(label, seed, params)| EvalHeuristic::Mrl {
                    label: label.clone(),
                    seed: *seed,
                    params,
                    env: cfg.env.clone(),
                    mapping: ValueToCost::default(),
                })),
                "super" => out.extend(self.regressors.iter().filter(|r| &r.0 == h).map(|(label, seed, regressor)| EvalHeuristic::Super { label: label.clone(), seed: *seed, regressor })),
                _ => out.push(EvalHeuristic::Classic(h.clone())),
            }
        }
        out
    }
}

fn stage_evaluate(cfg: &ExperimentConfig, outdir: &Path) -> Result<()> {
    let test = TaskDir::load(&outdir.join("tasks").join("test"), cfg.oracle_state_cap)?;
    let models = Models::load(cfg, outdir)?;
    let domain = test.tasks[0].task.domain_name().to_string();
    let rows = evaluate(&domain, &models.roster(cfg), &test.tasks, &cfg.limits, cfg.record_timing, cfg.exec())?;
    for r in rows.iter().filter(|r| r.is_solved()) {
        let task = &test.tasks.iter().find(|t| t.id == r.instance).expect("row of a test task").task;
        let v = validate_plan(task, &r.plan);
        if !v.valid || r.plan_cost != Some(v.cost) {
            return Err(HarnessError::Failed(format!("{} on {} returned an invalid plan", r.heuristic, r.instance)));
        }
    }
    write_file(&outdir.join("metrics.csv"), metrics::to_csv(&rows))
}

/// Per-domain expansion bars (mean and standard deviation over seeds) and
/// normalized plan lengths, each with a CSV twin.
pub fn emit_plots(rows: &[MetricsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut domains: Vec<&str> = rows.iter().map(|r| r.domain.as_str()).collect();
    domains.dedup();
    for domain in domains {
        let drows: Vec<&MetricsRow> = rows.iter().filter(|r| r.domain == domain).collect();
        let mut instances: Vec<&str> = drows.iter().map(|r| r.instance.as_str()).collect();
        instances.dedup();
        let mut heuristics: Vec<String> = Vec::new();
        for r in &drows {
            if !heuristics.contains(&r.heuristic) {
                heuristics.push(r.heuristic.clone());
            }
        }
        let cell = |inst: &str, h: &str| -> Vec<&MetricsRow> { drows.iter().copied().filter(|r| r.instance == inst && r.heuristic == h).collect() };
        let groups: Vec<BarGroup> = instances
            .iter()
            .map(|&inst| BarGroup {
                label: inst.to_string(),
                values: heuristics
                    .iter()
                    .map(|h| {
                        let v: Vec<f64> = cell(inst, h).iter().map(|r| r.expanded as f64).collect();
                        if v.is_empty() { (f64::NAN, 0.0) } else { mean_std(&v) }
                    })
                    .collect(),
            })
            .collect();
        let series: Vec<Series> = heuristics
            .iter()
            .map(|h| Series {
                name: h.clone(),
                points: instances
                    .iter()
                    .enumerate()
                    .map(|(i, &inst)| {
                        let v: Vec<f64> = cell(inst, h).iter().filter_map(|r| r.norm_plan_len).collect();
                        (i as f64, if v.is_empty() { f64::NAN } else { mean_std(&v).0 }, 0.0)
                    })
                    .collect(),
            })
            .collect();
        let labels: Vec<String> = instances.iter().map(|s| s.to_string()).collect();
        let files = [
            (format!("{domain}_expansions.svg"), grouped_bar_chart(&format!("{domain}: nodes expanded"), "expanded", &heuristics, &groups, true)),
            (format!("{domain}_expansions.csv"), grouped_bar_csv(&heuristics, &groups)),
            (format!("{domain}_plan_length.svg"), line_chart(&format!("{domain}: normalized plan length"), "instance", "plan length / optimal", Some(&labels), &series)),
            (format!("{domain}_plan_length.csv"), line_csv(&series)),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            write_file(&path, text)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn stage_report(cfg: &ExperimentConfig, outdir: &Path) -> Result<()> {
    let rows = metrics::parse_csv(&read_file(&outdir.join("metrics.csv"))?)?;
    let table = aggregate_table(&rows)?;
    let text = render_table(&table);
    log::info!("normalized expansions\n{text}");
    write_file(&outdir.join("table.csv"), table_csv(&table))?;
    write_file(&outdir.join("table.txt"), &text)?;
    let plots = emit_plots(&rows, &outdir.join("plots"))?;
    let sets = load_task_sets(outdir, cfg.oracle_state_cap)?;
    let ids = |d: &TaskDir| d.tasks.iter().map(|t| t.id.clone()).collect::<Vec<_>>();
    let mut models: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for h in cfg.heuristics.iter().filter(|h| ["mrl", "super", ABLATION].contains(&h.as_str())) {
        models.insert(h.clone(), cfg.seeds.iter().map(|&s| rel(outdir, &model_path(outdir, h, s))).collect());
    }
    let outputs: Vec<String> = ["metrics.csv", "table.csv", "table.txt"].iter().map(|s| s.to_string()).chain(plots.iter().map(|p| rel(outdir, p))).collect();
    let manifest = json!({
        "name": cfg.name,
        "version": env!("CARGO_PKG_VERSION"),
        "fingerprint": format!("{:016x}", cfg.fingerprint()),
        "template": cfg.template,
        "task_seed": cfg.task_seed,
        "seeds": cfg.seeds,
        "heuristics": cfg.heuristics,
        "tasks": { "candidates": ids(&sets.candidates), "validation": ids(&sets.validation), "test": ids(&sets.test) },
        "disjoint": true,
        "selected": if needs_selection(cfg) { load_selection(outdir)? } else { Vec::new() },
        "models": models,
        "outputs": outputs,
    });
    write_file(&outdir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned()
}
