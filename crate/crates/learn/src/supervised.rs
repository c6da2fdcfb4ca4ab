//! The supervised baseline: regress exact cost-to-go along optimal plans.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use metaplan_core::env::{encode_state, encoding_width};
use metaplan_core::heuristics::{HMax, Heuristic, NodeContext};
use metaplan_core::par::Exec;
use metaplan_core::search::{astar, SearchLimits, SearchStatus};
use metaplan_core::{ActionId, GroundTask, State};
use metaplan_nn::{Adam, AdamConfig, Checkpoint, Mlp, NnError, Params};

use crate::{derive_seed, LearnError};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub encoding: Vec<f64>,
    pub target: f64,
    pub task: String,
}

#[derive(Debug, Clone, Default)]
pub struct RegressionDataset {
    pub rows: Vec<Row>,
    pub goal_features: bool,
    pub duplicates_removed: usize,
    /// Tasks whose optimal plan was not found within the search limits.
    pub skipped_tasks: Vec<String>,
}

impl RegressionDataset {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.encoding.len())
    }

    pub fn to_csv(&self) -> String {
        let w = self.width();
        let mut out: Vec<String> = (0..w).map(|i| format!("x{i}")).collect();
        out.push("target".into());
        out.push("task_id".into());
        let mut text = out.join(",") + "\n";
        for r in &self.rows {
            let cells: Vec<String> = r.encoding.iter().map(|v| v.to_string()).collect();
            text.push_str(&format!("{},{},{}\n", cells.join(","), r.target, r.task));
        }
        text
    }
}

/// Rows `(encode(s_i), cost of the plan suffix from s_i)` along one optimal
/// plan per task, found by A* with h^max. Exact duplicates are dropped.
pub fn build_dataset(tasks: &[&GroundTask], goal_features: bool, limits: &SearchLimits, exec: Exec) -> RegressionDataset {
    let per_task = exec.map(tasks, |t| {
        let r = astar(t, &mut HMax::default(), limits);
        if r.status != SearchStatus::Solved {
            return Err(t.name().to_string());
        }
        let mut states = vec![t.init().clone()];
        let mut costs = vec![0.0];
        for &a in &r.plan {
            let (next, c) = t.apply(states.last().unwrap(), a).expect("valid plan");
            costs.push(costs.last().unwrap() + c);
            states.push(next);
        }
        let total = *costs.last().unwrap();
        Ok(states
            .iter()
            .zip(&costs)
            .map(|(s, g)| Row { encoding: encode_state(t, s, goal_features).0, target: total - g, task: t.name().to_string() })
            .collect::<Vec<_>>())
    });
    let mut data = RegressionDataset { goal_features, ..RegressionDataset::default() };
    let mut seen = HashSet::new();
    for rows in per_task {
        match rows {
            Ok(rows) => {
                for row in rows {
                    let key: (Vec<u64>, u64) = (row.encoding.iter().map(|v| v.to_bits()).collect(), row.target.to_bits());
                    if seen.insert(key) {
                        data.rows.push(row);
                    } else {
                        data.duplicates_removed += 1;
                    }
                }
            }
            Err(name) => {
                log::warn!("no optimal plan for {name} within limits; task skipped");
                data.skipped_tasks.push(name);
            }
        }
    }
    if data.duplicates_removed > 0 {
        log::info!("dropped {} duplicate rows", data.duplicates_removed);
    }
    data
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperConfig {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SuperConfig {
    fn default() -> Self {
        SuperConfig {
            depths: vec![1, 2],
            widths: vec![32, 64, 128],
            learning_rates: vec![1e-3, 3e-4],
            epochs: 300,
            batch_size: 32,
            holdout_fraction: 0.2,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub holdout_mse: f64,
}

#[derive(Debug, Clone)]
pub struct Regressor {
    pub mlp: Mlp,
    pub goal_features: bool,
    pub chosen: GridPoint,
    pub grid: Vec<GridPoint>,
}

fn mse(mlp: &Mlp, rows: &[&Row]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter().map(|r| (mlp.predict(&r.encoding)[0] - r.target).powi(2)).sum::<f64>() / rows.len() as f64
}

fn fit(train: &[&Row], width_in: usize, depth: usize, width: usize, lr: f64, cfg: &SuperConfig, seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![width_in];
    sizes.extend(std::iter::repeat_n(width, depth));
    sizes.push(1);
    let mut mlp = Mlp::new(&sizes, &mut rng);
    let mut opt = Adam::new(&mlp, AdamConfig { lr, ..AdamConfig::default() });
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let mut g = mlp.zeros_like();
            for &i in chunk {
                let (y, cache) = mlp.forward(&train[i].encoding);
                let d = 2.0 * (y[0] - train[i].target) / chunk.len() as f64;
                mlp.backward(&cache, &[d], &mut g);
            }
            if opt.step(&mut mlp, &g).is_err() {
                log::warn!("non-finite gradient in regressor training; batch skipped");
            }
        }
    }
    mlp
}

/// Grid search over depth, width and learning rate; the point with the lowest
/// holdout error wins (training error when the dataset is too small to split).
pub fn train_regressor(data: &RegressionDataset, cfg: &SuperConfig) -> Result<Regressor, LearnError> {
    if data.rows.is_empty() {
        return Err(LearnError::Invalid("empty regression dataset".into()));
    }
    let mut idx: Vec<usize> = (0..data.rows.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0, 0)));
    let n_hold = if data.rows.len() >= 5 { ((data.rows.len() as f64) * cfg.holdout_fraction).round() as usize } else { 0 };
    let holdout: Vec<&Row> = idx[..n_hold].iter().map(|&i| &data.rows[i]).collect();
    let train: Vec<&Row> = idx[n_hold..].iter().map(|&i| &data.rows[i]).collect();
    let mut points = Vec::new();
    for &depth in &cfg.depths {
        for &width in &cfg.widths {
            for &lr in &cfg.learning_rates {
                points.push((depth, width, lr));
            }
        }
    }
    let w = data.width();
    let fitted = cfg.exec.map(&points, |&(depth, width, lr)| {
        let mlp = fit(&train, w, depth, width, lr, cfg, derive_seed(cfg.seed, depth as u64, width as u64));
        let point = GridPoint { depth, width, lr, train_mse: mse(&mlp, &train), holdout_mse: mse(&mlp, &holdout) };
        (mlp, point)
    });
    let score = |p: &GridPoint| if p.holdout_mse.is_nan() { p.train_mse } else { p.holdout_mse };
    let best = fitted
        .iter()
        .enumerate()
        .min_by(|a, b| score(&a.1 .1).total_cmp(&score(&b.1 .1)).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    let grid = fitted.iter().map(|f| f.1.clone()).collect();
    let (mlp, chosen) = fitted.into_iter().nth(best).unwrap();
    Ok(Regressor { mlp: quantize(mlp), goal_features: data.goal_features, chosen, grid })
}

fn quantize(mut m: Mlp) -> Mlp {
    for t in m.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
    m
}

impl Regressor {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut sizes = vec![self.mlp.input_size()];
        for (name, t) in self.mlp.tensors() {
            if name.starts_with('w') {
                sizes.push(t.shape()[0]);
            }
        }
        let mut ck = Checkpoint::from_params(&self.mlp, json!({}));
        ck.tensors.iter_mut().for_each(|(n, _)| *n = format!("mlp.{n}"));
        ck.meta = json!({ "kind": "super", "sizes": sizes, "goal_features": self.goal_features, "chosen": self.chosen, "grid": self.grid });
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, LearnError> {
        if ck.meta["kind"] != "super" {
            return Err(NnError::BadCheckpoint("not a supervised-regressor checkpoint".into()).into());
        }
        let sizes: Vec<usize> = serde_json::from_value(ck.meta["sizes"].clone()).map_err(NnError::from)?;
        let goal_features = ck.meta["goal_features"].as_bool().unwrap_or(true);
        let mut mlp = Mlp::new(&sizes, &mut ChaCha8Rng::seed_from_u64(0));
        ck.restore_into("mlp", &mut mlp)?;
        let chosen = GridPoint {
            depth: sizes.len() - 2,
            width: sizes.get(1).copied().unwrap_or(0),
            lr: ck.meta["chosen"]["lr"].as_f64().unwrap_or(f64::NAN),
            train_mse: ck.meta["chosen"]["train_mse"].as_f64().unwrap_or(f64::NAN),
            holdout_mse: ck.meta["chosen"]["holdout_mse"].as_f64().unwrap_or(f64::NAN),
        };
        Ok(Regressor { mlp, goal_features, chosen, grid: Vec::new() })
    }
}

/// `h(s) = max(0, prediction)`; stateless.
#[derive(Debug, Clone)]
pub struct HSuper {
    mlp: Mlp,
    goal_features: bool,
}

pub fn make_h_super(reg: &Regressor, task: &GroundTask) -> Result<HSuper, LearnError> {
    let w = encoding_width(task, reg.goal_features);
    if w != reg.mlp.input_size() {
        return Err(LearnError::DimensionMismatch(format!("task {} encodes to {w} values, regressor expects {}", task.name(), reg.mlp.input_size())));
    }
    Ok(HSuper { mlp: reg.mlp.clone(), goal_features: reg.goal_features })
}

impl HSuper {
    pub fn predict(&self, task: &GroundTask, s: &State) -> f64 {
        self.mlp.predict(&encode_state(task, s, self.goal_features))[0]
    }
}

/// Clamp applied to raw predictions.
pub fn clamp_prediction(p: f64) -> f64 {
    if p.is_nan() {
        0.0
    } else {
        p.max(0.0)
    }
}

impl Heuristic for HSuper {
    fn name(&self) -> &str {
        "super"
    }

    fn is_admissible(&self) -> bool {
        false
    }

    fn evaluate(&mut self, task: &GroundTask, s: &State, _: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext) {
        if task.is_goal(s) {
            return (0.0, NodeContext::default());
        }
        (clamp_prediction(self.predict(task, s)), NodeContext::default())
    }
}
