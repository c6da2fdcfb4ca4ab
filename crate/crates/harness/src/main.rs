use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metaplan::config::ABLATION;
use metaplan::metrics::{render_table, to_csv};
use metaplan::pipeline::pick;
use metaplan::taskio::check_disjoint;
use metaplan::{aggregate_table, evaluate, run_pipeline, task_addition_study, EvalHeuristic, ExperimentConfig, HarnessError, Result, TaskDir};
use metaplan_core::generators::{generate_tasks, TaskTemplate};
use metaplan_core::heuristics::{classic_heuristic, Heuristic};
use metaplan_core::pddl::{ground, parse_domain, parse_problem};
use metaplan_core::search::astar;
use metaplan_learn::itts::{select_from_matrices, select_tasks};
use metaplan_learn::supervised::{build_dataset, make_h_super, train_regressor, Regressor, SuperConfig};
use metaplan_learn::meta::PROGRESS_HEADER;
use metaplan_learn::{meta_train, AgentParams, HMrl, MetaConfig, ValueToCost};
use metaplan_nn::Checkpoint;

#[derive(Parser)]
#[command(name = "metaplan", version, about = "Learned heuristics for classical planning via meta-reinforcement learning")]
struct Cli {
    /// Experiment config (TOML). Defaults to the desk-scale Gripper setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate random problems for a bundled domain.
    Gen {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one problem with A*. The plan goes to stdout, the summary to stderr.
    Plan {
        domain: PathBuf,
        problem: PathBuf,
        #[arg(long, default_value = "hmax")]
        heuristic: String,
        /// Checkpoint for `mrl` or `super`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Meta-train the recurrent agent on a task directory.
    TrainMeta {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the supervised cost-to-go regressor on a task directory.
    TrainSuper {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select training tasks from candidates against validation tasks.
    Select {
        #[arg(long, alias = "tasks")]
        candidates: PathBuf,
        #[arg(long)]
        validation: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also report the selected-set size for each of these thresholds.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<f64>,
    },
    /// Run the configured classical heuristics and the given models on a task directory.
    Evaluate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long = "mrl")]
        mrl: Vec<PathBuf>,
        #[arg(long = "super")]
        sup: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full resumable run into a directory.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain the supervised heuristic with extra random tasks.
    StudyAdditions {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective config.
    Config {
        #[arg(long)]
        dump: bool,
        /// Desk-scale defaults for this domain instead of the loaded config.
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        smoke: bool,
    },
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn seed_of(ck: &Checkpoint, fallback: usize) -> u64 {
    ck.meta["extra"]["seed"].as_u64().or_else(|| ck.meta["seed"].as_u64()).unwrap_or(fallback as u64)
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::Io { path: path.into(), source: e })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?.resolved();
    match cli.cmd {
        Cmd::Gen { domain, n, seed, out } => {
            let template = if cli.config.is_some() && cfg.template.domain_key() == domain {
                cfg.template
            } else {
                TaskTemplate::standard(&domain).ok_or_else(|| config_err(format!("unknown domain `{domain}`")))?
            };
            let tasks = generate_tasks(&template, n, seed).map_err(config_err)?;
            TaskDir::from_generated(template, seed, tasks).write(&out)?;
            eprintln!("wrote {n} {domain} problems to {}", out.display());
        }
        Cmd::Plan { domain, problem, heuristic, model } => {
            let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())));
            let d = parse_domain(&read(&domain)?).map_err(config_err)?;
            let p = parse_problem(&read(&problem)?, &d).map_err(config_err)?;
            let task = ground(&d, &p).map_err(config_err)?;
            let ck = || -> Result<Checkpoint> {
                let path = model.as_ref().ok_or_else(|| config_err(format!("`{heuristic}` needs --model")))?;
                Ok(Checkpoint::load(path)?)
            };
            let mut h: Box<dyn Heuristic> = match heuristic.as_str() {
                "mrl" | ABLATION => Box::new(HMrl::new(&AgentParams::from_checkpoint(&ck()?)?, &task, cfg.env.clone(), ValueToCost::default())?),
                "super" => Box::new(make_h_super(&Regressor::from_checkpoint(&ck()?)?, &task)?),
                name => classic_heuristic(name).ok_or_else(|| config_err(format!("unknown heuristic `{name}`")))?,
            };
            let r = astar(&task, h.as_mut(), &cfg.limits);
            for &a in &r.plan {
                println!("{}", task.action(a).name);
            }
            eprintln!("{}", r.summary_line());
            if r.status != metaplan_core::SearchStatus::Solved {
                return Err(HarnessError::Failed(format!("no plan found ({})", r.status)));
            }
        }
        Cmd::TrainMeta { tasks, validation, seed, out } => {
            let train = TaskDir::load(&tasks, cfg.oracle_state_cap)?;
            let val = validation.map(|v| TaskDir::load(&v, cfg.oracle_state_cap)).transpose()?;
            if let Some(v) = &val {
                check_disjoint(&[("training", &train.tasks), ("validation", &v.tasks)])?;
            }
            let val_refs = val.as_ref().map(|v| v.refs()).unwrap_or_default();
            let report = meta_train(&train.refs(), &val_refs, &MetaConfig { seed, ..cfg.meta.clone() })?;
            let ids: Vec<&str> = train.tasks.iter().map(|t| t.id.as_str()).collect();
            report.params.to_checkpoint(serde_json::json!({ "heuristic": "mrl", "seed": seed, "best_iteration": report.best_iteration, "training_tasks": ids })).save(&out)?;
            let progress: String = std::iter::once(PROGRESS_HEADER.to_string()).chain(report.progress.iter().map(|r| r.csv())).map(|l| l + "\n").collect();
            write(&out.with_extension("progress.csv"), progress)?;
            if let Some(v) = report.best_validation {
                eprintln!("best iteration {}: goal rate {:.3}, return ratio {:.3}", report.best_iteration, v.goal_rate, v.return_ratio());
            }
        }
        Cmd::TrainSuper { tasks, seed, out } => {
            let train = TaskDir::load(&tasks, cfg.oracle_state_cap)?;
            let grounded: Vec<_> = train.tasks.iter().map(|t| &t.task).collect();
            let data = build_dataset(&grounded, cfg.env.goal_features, &cfg.limits, cfg.exec());
            let reg = train_regressor(&data, &SuperConfig { seed, ..cfg.supervised.clone() })?;
            reg.to_checkpoint().save(&out)?;
            eprintln!("{} rows; depth {}, width {}, lr {}: train mse {:.4}", data.rows.len(), reg.chosen.depth, reg.chosen.width, reg.chosen.lr, reg.chosen.train_mse);
        }
        Cmd::Select { candidates, validation, out, sweep } => {
            let cand = TaskDir::load(&candidates, cfg.oracle_state_cap)?;
            let val = TaskDir::load(&validation, cfg.oracle_state_cap)?;
            check_disjoint(&[("candidates", &cand.tasks), ("validation", &val.tasks)])?;
            let outcome = select_tasks(&cand.refs(), &val.refs(), &cfg.itts)?;
            let ids: Vec<String> = outcome.log.selected.iter().map(|&i| cand.tasks[i].id.clone()).collect();
            pick(&cand, &ids)?;
            let doc = serde_json::json!({ "epsilon_diff": outcome.log.epsilon_diff, "selected": ids, "audit": outcome.log.audit, "delta": outcome.delta, "rho": outcome.rho });
            write(&out, serde_json::to_string_pretty(&doc).expect("selection serializes") + "\n")?;
            println!("{}", ids.join("\n"));
            for eps in sweep {
                let size = select_from_matrices(&outcome.delta, &outcome.rho, &outcome.eligible, eps).map_or(0, |l| l.selected.len());
                eprintln!("epsilon {eps}: {size} selected");
            }
        }
        Cmd::Evaluate { tasks, mrl, sup, out } => {
            let test = TaskDir::load(&tasks, cfg.oracle_state_cap)?;
            let agents = mrl.iter().enumerate().map(|(i, p)| Checkpoint::load(p).map_err(HarnessError::from).and_then(|ck| Ok((seed_of(&ck, i), AgentParams::from_checkpoint(&ck)?)))).collect::<Result<Vec<_>>>()?;
            let regs = sup.iter().enumerate().map(|(i, p)| Checkpoint::load(p).map_err(HarnessError::from).and_then(|ck| Ok((seed_of(&ck, i), Regressor::from_checkpoint(&ck)?)))).collect::<Result<Vec<_>>>()?;
            let mut roster: Vec<EvalHeuristic<'_>> = cfg.heuristics.iter().filter(|h| classic_heuristic(h).is_some()).map(|h| EvalHeuristic::Classic(h.clone())).collect();
            roster.extend(regs.iter().map(|(seed, regressor)| EvalHeuristic::Super { label: "super".into(), seed: *seed, regressor }));
            roster.extend(agents.iter().map(|(seed, params)| EvalHeuristic::Mrl { label: "mrl".into(), seed: *seed, params, env: cfg.env.clone(), mapping: ValueToCost::default() }));
            let domain = test.tasks[0].task.domain_name().to_string();
            let rows = evaluate(&domain, &roster, &test.tasks, &cfg.limits, cfg.record_timing, cfg.exec())?;
            write(&out, to_csv(&rows))?;
            print!("{}", render_table(&aggregate_table(&rows)?));
        }
        Cmd::Pipeline { out } => {
            let outcome = run_pipeline(&cfg, &out)?;
            print!("{}", render_table(&outcome.table));
            eprintln!("artifacts in {}", out.display());
        }
        Cmd::StudyAdditions { out } => {
            let study = task_addition_study(&cfg, &out)?;
            println!("added,seed,mean_nen,ci95");
            for p in &study.points {
                println!("{},{},{:.4},{:.4}", p.added, p.seed.map_or_else(|| "all".into(), |s| s.to_string()), p.mean_nen, p.ci_half_width);
            }
        }
        Cmd::Config { dump, domain, smoke } => {
            let shown = match (domain, smoke) {
                (_, true) => ExperimentConfig::smoke(),
                (Some(d), false) => ExperimentConfig::desk(&d).ok_or_else(|| config_err(format!("unknown domain `{d}`")))?,
                (None, false) => load_config(&cli.config)?,
            };
            if dump {
                print!("{}", shown.to_toml());
            } else {
                shown.validate()?;
                eprintln!("config is valid; pass --dump to print it");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
