//! Supervised task-addition study: retrain the regressor on the selected tasks
//! plus `k` random extra tasks and measure NEN on the test set.

use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use metaplan_core::generators::generate_tasks_excluding;
use metaplan_core::GroundTask;
use metaplan_learn::derive_seed;
use metaplan_learn::supervised::{build_dataset, train_regressor, SuperConfig};
use metaplan_learn::TaskRef;

use crate::config::ExperimentConfig;
use crate::metrics::{evaluate, EvalHeuristic};
use crate::pipeline::{load_selection, load_task_sets, pick, prepare_tasks};
use crate::plots::{line_chart, line_csv, Series};
use crate::{write_file, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditionPoint {
    pub added: usize,
    /// `None` for the pooled row over all seeds.
    pub seed: Option<u64>,
    pub mean_nen: f64,
    /// Half-width of the 95% t-interval over instances.
    pub ci_half_width: f64,
    pub instances: usize,
    pub censored: usize,
}

#[derive(Debug, Clone)]
pub struct AdditionStudy {
    /// Per (k, seed), then one pooled row per k.
    pub points: Vec<AdditionPoint>,
    /// Pooled mean NEN never increased as tasks were added.
    pub non_increasing: bool,
}

/// Mean and 95% t-interval half-width; the width is 0 below two values.
pub fn t_interval(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
    (mean, t * sd / (n as f64).sqrt())
}

fn point(added: usize, seed: Option<u64>, nen: &[f64], censored: usize) -> AdditionPoint {
    let (mean_nen, ci_half_width) = if nen.is_empty() { (f64::NAN, 0.0) } else { t_interval(nen) };
    AdditionPoint { added, seed, mean_nen, ci_half_width, instances: nen.len(), censored }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn task_addition_study(cfg: &ExperimentConfig, outdir: &Path) -> Result<AdditionStudy> {
    if !cfg.wants("super") {
        return Err(HarnessError::Config("the task-addition study needs `super` in the roster".into()));
    }
    prepare_tasks(cfg, outdir)?;
    let cfg = cfg.resolved();
    let sets = load_task_sets(outdir, cfg.oracle_state_cap)?;
    let selected = pick(&sets.candidates, &load_selection(outdir)?)?;
    let existing: Vec<&GroundTask> = [&sets.candidates, &sets.validation, &sets.test].iter().flat_map(|d| d.tasks.iter().map(|t| &t.task)).collect();
    let most = cfg.additions.iter().copied().max().unwrap_or(0);
    let extra = generate_tasks_excluding(&cfg.template, most, derive_seed(cfg.task_seed, 0xadd, 0), &existing).map_err(|e| HarnessError::Failed(e.to_string()))?;
    let domain = sets.test.tasks[0].task.domain_name().to_string();
    let mut points = Vec::new();
    let mut pooled = Vec::new();
    for &k in &cfg.additions {
        let mut train: Vec<TaskRef<'_>> = selected.clone();
        train.extend(extra[..k].iter().map(|g| TaskRef { task: &g.task, optimal_cost: g.optimal_cost }));
        let grounded: Vec<&GroundTask> = train.iter().map(|t| t.task).collect();
        let data = build_dataset(&grounded, cfg.env.goal_features, &cfg.limits, cfg.exec());
        let mut all_nen = Vec::new();
        let mut all_censored = 0;
        for &seed in &cfg.seeds {
            let reg = train_regressor(&data, &SuperConfig { seed, ..cfg.supervised.clone() })?;
            let h = [EvalHeuristic::Super { label: "super".into(), seed, regressor: &reg }];
            let rows = evaluate(&domain, &h, &sets.test.tasks, &cfg.limits, false, cfg.exec())?;
            let nen: Vec<f64> = rows.iter().filter_map(|r| r.nen).collect();
            let censored = rows.len() - nen.len();
            log::info!("+{k} tasks, seed {seed}: mean NEN {:.3} ({censored} censored)", nen.iter().sum::<f64>() / nen.len().max(1) as f64);
            points.push(point(k, Some(seed), &nen, censored));
            all_nen.extend(nen);
            all_censored += censored;
        }
        pooled.push(point(k, None, &all_nen, all_censored));
    }
    let non_increasing = pooled.windows(2).all(|w| !(w[1].mean_nen > w[0].mean_nen));
    if non_increasing {
        log::info!("mean NEN is non-increasing in the number of added tasks");
    } else {
        log::warn!("mean NEN increased for some added-task counts; expected a non-increasing trend on average");
    }
    points.extend(pooled);
    write_outputs(outdir, &domain, &points)?;
    Ok(AdditionStudy { points, non_increasing })
}

fn write_outputs(outdir: &Path, domain: &str, points: &[AdditionPoint]) -> Result<()> {
    let mut csv = String::from("added,seed,mean_nen,ci_half_width,instances,censored\n");
    for p in points {
        let seed = p.seed.map_or_else(|| "all".to_string(), |s| s.to_string());
        csv.push_str(&format!("{},{seed},{},{},{},{}\n", p.added, p.mean_nen, p.ci_half_width, p.instances, p.censored));
    }
    write_file(&outdir.join("additions.csv"), csv)?;
    let series = [Series {
        name: "super".into(),
        points: points.iter().filter(|p| p.seed.is_none()).map(|p| (p.added as f64, p.mean_nen, p.ci_half_width)).collect(),
    }];
    let plots = outdir.join("plots");
    write_file(&plots.join(format!("{domain}_additions.svg")), line_chart(&format!("{domain}: supervised heuristic with added tasks"), "+N training tasks", "mean NEN", None, &series))?;
    write_file(&plots.join(format!("{domain}_additions.csv")), line_csv(&series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_interval_known_value() {
        // n = 4, sd = 1.2909944, t(0.975, 3) = 3.1824463
        let (m, h) = t_interval(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((h - 3.182_446_305 * 1.290_994_449 / 2.0).abs() < 1e-6, "{h}");
        assert_eq!(t_interval(&[7.0]), (7.0, 0.0));
    }
}
