//! A* evaluation rows, the metrics.csv format and blind-normalized tables.

use std::collections::BTreeMap;

use metaplan_core::heuristics::{classic_heuristic, Heuristic};
use metaplan_core::par::Exec;
use metaplan_core::search::{astar, SearchLimits, SearchResult, SearchStatus};
use metaplan_core::{ActionId, EnvConfig};
use metaplan_learn::supervised::{make_h_super, Regressor};
use metaplan_learn::{AgentParams, HMrl, ValueToCost};

use crate::taskio::LoadedTask;
use crate::{HarnessError, Result};

pub const METRICS_HEADER: &str = "domain,instance,heuristic,seed,status,expanded,generated,plan_cost,optimal_cost,nen,norm_plan_len,seconds";

/// Full-scale normalized expansions of the original study, shown beside
/// desk-scale results for orientation only.
pub const REFERENCE_NORMALIZED: &[(&str, f64)] = &[
    ("blind", 1.0),
    ("mrl", 0.0749112),
    ("mrl_noitts", 0.0894698),
    ("hadd", 0.1341158),
    ("super", 0.1991076),
    ("hmax", 0.3566618),
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub domain: String,
    pub instance: String,
    pub heuristic: String,
    /// Learning seed; `None` for model-free heuristics.
    pub seed: Option<u64>,
    pub status: SearchStatus,
    pub expanded: u64,
    pub generated: u64,
    pub plan_cost: Option<f64>,
    pub optimal_cost: f64,
    pub nen: Option<f64>,
    pub norm_plan_len: Option<f64>,
    pub seconds: Option<f64>,
    /// Not written to CSV.
    pub plan: Vec<ActionId>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

impl MetricsRow {
    pub fn from_result(domain: &str, instance: &str, heuristic: &str, seed: Option<u64>, optimal_cost: f64, r: &SearchResult, record_timing: bool) -> Self {
        let solved = r.status == SearchStatus::Solved;
        MetricsRow {
            domain: domain.to_string(),
            instance: instance.to_string(),
            heuristic: heuristic.to_string(),
            seed,
            status: r.status,
            expanded: r.expanded,
            generated: r.generated,
            plan_cost: solved.then_some(r.cost),
            optimal_cost,
            nen: solved.then(|| r.expanded as f64 / optimal_cost),
            norm_plan_len: solved.then(|| r.cost / optimal_cost),
            seconds: record_timing.then_some(r.wall_time),
            plan: r.plan.clone(),
        }
    }

    pub fn is_solved(&self) -> bool {
        self.status == SearchStatus::Solved
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.domain,
            self.instance,
            self.heuristic,
            opt(&self.seed),
            self.status,
            self.expanded,
            self.generated,
            opt(&self.plan_cost),
            self.optimal_cost,
            opt(&self.nen),
            opt(&self.norm_plan_len),
            opt(&self.seconds),
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let bad = || HarnessError::Config(format!("malformed metrics row: {line}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let status = match f[4] {
            "solved" => SearchStatus::Solved,
            "unsolvable" => SearchStatus::Unsolvable,
            "limit" => SearchStatus::LimitReached,
            _ => return Err(bad()),
        };
        Ok(MetricsRow {
            domain: f[0].into(),
            instance: f[1].into(),
            heuristic: f[2].into(),
            seed: if f[3].is_empty() { None } else { Some(f[3].parse().map_err(|_| bad())?) },
            status,
            expanded: f[5].parse().map_err(|_| bad())?,
            generated: f[6].parse().map_err(|_| bad())?,
            plan_cost: maybe(f[7])?,
            optimal_cost: num(f[8])?,
            nen: maybe(f[9])?,
            norm_plan_len: maybe(f[10])?,
            seconds: maybe(f[11])?,
            plan: Vec::new(),
        })
    }
}

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(HarnessError::Config("metrics file has an unexpected header".into()));
    }
    lines.filter(|l| !l.is_empty()).map(MetricsRow::parse_csv_line).collect()
}

/// A heuristic to run on every test task.
pub enum EvalHeuristic<'a> {
    Classic(String),
    Mrl { label: String, seed: u64, params: &'a AgentParams, env: EnvConfig, mapping: ValueToCost },
    Super { label: String, seed: u64, regressor: &'a Regressor },
}

impl EvalHeuristic<'_> {
    pub fn label(&self) -> &str {
        match self {
            EvalHeuristic::Classic(n) => n,
            EvalHeuristic::Mrl { label, .. } | EvalHeuristic::Super { label, .. } => label,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            EvalHeuristic::Classic(_) => None,
            EvalHeuristic::Mrl { seed, .. } | EvalHeuristic::Super { seed, .. } => Some(*seed),
        }
    }

    fn build(&self, task: &LoadedTask) -> Result<Box<dyn Heuristic>> {
        Ok(match self {
            EvalHeuristic::Classic(name) => classic_heuristic(name).ok_or_else(|| HarnessError::Config(format!("`{name}` needs a trained model")))?,
            EvalHeuristic::Mrl { params, env, mapping, .. } => Box::new(HMrl::new(params, &task.task, env.clone(), *mapping)?),
            EvalHeuristic::Super { regressor, .. } => Box::new(make_h_super(regressor, &task.task)?),
        })
    }
}

/// Runs A* for every (task, heuristic) pair. Rows are grouped by instance,
/// instances ordered by blind expansions (then id), heuristics in the given order.
pub fn evaluate(domain: &str, heuristics: &[EvalHeuristic<'_>], tasks: &[LoadedTask], limits: &SearchLimits, record_timing: bool, exec: Exec) -> Result<Vec<MetricsRow>> {
    let jobs: Vec<(usize, usize)> = (0..tasks.len()).flat_map(|t| (0..heuristics.len()).map(move |h| (t, h))).collect();
    let rows = exec
        .map(&jobs, |&(t, h)| {
            let task = &tasks[t];
            let mut heuristic = heuristics[h].build(task)?;
            let r = astar(&task.task, heuristic.as_mut(), limits);
            Ok(MetricsRow::from_result(domain, &task.id, heuristics[h].label(), heuristics[h].seed(), task.optimal_cost, &r, record_timing))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut by_task: Vec<Vec<MetricsRow>> = rows.chunks(heuristics.len().max(1)).map(|c| c.to_vec()).collect();
    let blind = |group: &[MetricsRow]| group.iter().find(|r| r.heuristic == "blind").map(|r| r.expanded);
    by_task.sort_by(|a, b| blind(a).cmp(&blind(b)).then_with(|| a[0].instance.cmp(&b[0].instance)));
    Ok(by_task.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub heuristic: String,
    /// Mean over domains of the mean over instances of expanded / blind expanded.
    pub normalized_expansions: f64,
    pub mean_nen: f64,
    pub domains: usize,
    pub instances: usize,
    /// Rows left out because the search did not solve the task.
    pub censored: usize,
    pub reference: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

type Acc = (Vec<f64>, usize, usize, Vec<f64>);

/// Blind-normalized expansions per heuristic. Rows of unsolved searches are
/// censored; instances where blind itself failed are left out for everyone.
pub fn aggregate_table(rows: &[MetricsRow]) -> Result<Vec<TableEntry>> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.heuristic.as_str()) {
            order.push(&r.heuristic);
        }
    }
    let mut domains: BTreeMap<&str, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        domains.entry(&r.domain).or_default().push(r);
    }
    // heuristic -> per-domain means, instance count, censored count, NEN values
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for (domain, drows) in &domains {
        let mut baseline: BTreeMap<&str, Option<u64>> = BTreeMap::new();
        for r in drows.iter().filter(|r| r.heuristic == "blind") {
            baseline.insert(&r.instance, r.is_solved().then_some(r.expanded));
        }
        let mut per: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
        for r in drows {
            let Some(base) = baseline.get(r.instance.as_str()) else {
                return Err(HarnessError::MissingBaseline { domain: domain.to_string(), instance: r.instance.clone() });
            };
            let e = acc.entry(&r.heuristic).or_default();
            match (base, r.is_solved()) {
                (Some(b), true) if *b > 0 => {
                    per.entry((&r.heuristic, &r.instance)).or_default().push(r.expanded as f64 / *b as f64);
                    e.3.push(r.nen.expect("solved rows carry NEN"));
                }
                _ => e.2 += 1,
            }
        }
        let mut per_h: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for ((h, _), ratios) in per {
            per_h.entry(h).or_default().push(mean(&ratios));
        }
        for (h, inst) in per_h {
            let e = acc.get_mut(h).expect("entry created above");
            e.0.push(mean(&inst));
            e.1 += inst.len();
        }
    }
    Ok(order
        .into_iter()
        .map(|h| {
            let (dom, instances, censored, nen) = acc.remove(h).unwrap_or_default();
            TableEntry {
                heuristic: h.to_string(),
                normalized_expansions: if dom.is_empty() { f64::NAN } else { mean(&dom) },
                mean_nen: if nen.is_empty() { f64::NAN } else { mean(&nen) },
                domains: dom.len(),
                instances,
                censored,
                reference: REFERENCE_NORMALIZED.iter().find(|(n, _)| *n == h).map(|r| r.1),
            }
        })
        .collect())
}

pub fn table_csv(entries: &[TableEntry]) -> String {
    let mut out = String::from("heuristic,normalized_expansions,mean_nen,domains,instances,censored,reference\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.heuristic,
            e.normalized_expansions,
            e.mean_nen,
            e.domains,
            e.instances,
            e.censored,
            opt(&e.reference)
        ));
    }
    out
}

/// Plain-text table with a censoring footer.
pub fn render_table(entries: &[TableEntry]) -> String {
    let mut out = format!("{:<12} {:>12} {:>10} {:>10}\n", "heuristic", "vs blind", "mean NEN", "reference");
    for e in entries {
        let reference = e.reference.map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
        out.push_str(&format!("{:<12} {:>12.4} {:>10.3} {:>10}\n", e.heuristic, e.normalized_expansions, e.mean_nen, reference));
    }
    let censored: Vec<String> = entries.iter().filter(|e| e.censored > 0).map(|e| format!("{} {}", e.heuristic, e.censored)).collect();
    if censored.is_empty() {
        out.push_str("censored rows: none\n");
    } else {
        out.push_str(&format!("censored rows: {}\n", censored.join(", ")));
    }
    out
}
