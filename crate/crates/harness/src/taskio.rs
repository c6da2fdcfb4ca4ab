//! Task directories on disk: `domain.pddl`, one problem file per task and a
//! `manifest.json` with optimal costs.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use metaplan_core::generators::{identity_key, GeneratedTask, TaskTemplate};
use metaplan_core::heuristics::HMax;
use metaplan_core::pddl::{ground, parse_domain, parse_problem};
use metaplan_core::search::{astar, bfs_oracle, SearchLimits, SearchStatus};
use metaplan_core::GroundTask;
use metaplan_learn::TaskRef;

use crate::{read_file, write_file, HarnessError, Result};

#[derive(Debug, Clone)]
pub struct LoadedTask {
    pub id: String,
    pub problem_pddl: String,
    pub task: GroundTask,
    pub optimal_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub optimal_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub domain: String,
    #[serde(default)]
    pub template: Option<TaskTemplate>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub tasks: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct TaskDir {
    pub domain_pddl: String,
    pub template: Option<TaskTemplate>,
    pub seed: Option<u64>,
    pub tasks: Vec<LoadedTask>,
}

/// Optimal plan cost: exhaustive search when the state space fits under
/// `state_cap`, otherwise A* with h^max. Infinite when neither finds a plan.
pub fn optimal_cost(task: &GroundTask, state_cap: usize) -> f64 {
    match bfs_oracle(task, state_cap) {
        Ok(o) => o.optimal_cost,
        Err(_) => {
            let r = astar(task, &mut HMax::default(), &SearchLimits::default());
            if r.status == SearchStatus::Solved {
                r.cost
            } else {
                f64::INFINITY
            }
        }
    }
}

impl TaskDir {
    pub fn from_generated(template: TaskTemplate, seed: u64, tasks: Vec<GeneratedTask>) -> Self {
        let tasks = tasks
            .into_iter()
            .map(|g| LoadedTask { problem_pddl: g.problem_pddl(), id: g.id, task: g.task, optimal_cost: g.optimal_cost })
            .collect();
        TaskDir { domain_pddl: template.domain_pddl().to_string(), template: Some(template), seed: Some(seed), tasks }
    }

    pub fn refs(&self) -> Vec<TaskRef<'_>> {
        self.tasks.iter().map(|t| TaskRef { task: &t.task, optimal_cost: t.optimal_cost }).collect()
    }

    pub fn manifest(&self) -> TaskManifest {
        let domain = self.tasks.first().map_or_else(String::new, |t| t.task.domain_name().to_string());
        TaskManifest {
            domain,
            template: self.template,
            seed: self.seed,
            tasks: self
                .tasks
                .iter()
                .map(|t| ManifestEntry { id: t.id.clone(), file: format!("{}.pddl", t.id), optimal_cost: t.optimal_cost, draw_seed: None })
                .collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("domain.pddl"), &self.domain_pddl)?;
        for t in &self.tasks {
            write_file(&dir.join(format!("{}.pddl", t.id)), &t.problem_pddl)?;
        }
        let json = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        write_file(&dir.join("manifest.json"), json + "\n")
    }

    /// Reads `dir`. Problems are taken from the manifest when present, else
    /// every `*.pddl` other than `domain.pddl` in name order; missing optimal
    /// costs are computed.
    pub fn load(dir: &Path, state_cap: usize) -> Result<Self> {
        let config_err = |m: String| HarnessError::Config(format!("{}: {m}", dir.display()));
        let domain_pddl = read_file(&dir.join("domain.pddl")).map_err(|e| config_err(e.to_string()))?;
        let domain = parse_domain(&domain_pddl).map_err(|e| config_err(e.to_string()))?;
        let manifest_path = dir.join("manifest.json");
        let manifest: Option<TaskManifest> = if manifest_path.exists() {
            Some(serde_json::from_str(&read_file(&manifest_path)?).map_err(|e| config_err(format!("manifest.json: {e}")))?)
        } else {
            None
        };
        let files: Vec<(String, String, Option<f64>)> = match &manifest {
            Some(m) => m.tasks.iter().map(|e| (e.id.clone(), e.file.clone(), Some(e.optimal_cost))).collect(),
            None => {
                let mut names: Vec<String> = std::fs::read_dir(dir)
                    .map_err(|e| HarnessError::io(dir, e))?
                    .filter_map(|e| e.ok())
                    .map(|e| e.file_name().to_string_lossy().into_owned())
                    .filter(|n| n.ends_with(".pddl") && n != "domain.pddl")
                    .collect();
                names.sort();
                names.into_iter().map(|n| (n.trim_end_matches(".pddl").to_string(), n, None)).collect()
            }
        };
        if files.is_empty() {
            return Err(config_err("no problem files".into()));
        }
        let mut tasks = Vec::with_capacity(files.len());
        for (id, file, cost) in files {
            let problem_pddl = read_file(&dir.join(&file)).map_err(|e| config_err(e.to_string()))?;
            let problem = parse_problem(&problem_pddl, &domain).map_err(|e| config_err(format!("{file}: {e}")))?;
            let task = ground(&domain, &problem).map_err(|e| config_err(format!("{file}: {e}")))?;
            let optimal_cost = cost.unwrap_or_else(|| optimal_cost(&task, state_cap));
            tasks.push(LoadedTask { id, problem_pddl, task, optimal_cost });
        }
        Ok(TaskDir {
            domain_pddl,
            template: manifest.as_ref().and_then(|m| m.template),
            seed: manifest.as_ref().and_then(|m| m.seed),
            tasks,
        })
    }
}

/// Rejects task sets that share a task (same initial state and goal) or an id.
pub fn check_disjoint(sets: &[(&str, &[LoadedTask])]) -> Result<()> {
    let mut keys: HashMap<String, &str> = HashMap::new();
    let mut ids: HashMap<&str, &str> = HashMap::new();
    for (name, tasks) in sets {
        for t in tasks.iter() {
            if let Some(other) = ids.insert(&t.id, name) {
                return Err(HarnessError::Config(format!("task id {} appears in both {other} and {name}", t.id)));
            }
            if let Some(other) = keys.insert(identity_key(&t.task), name) {
                if other != *name {
                    return Err(HarnessError::Config(format!("task {} of {name} duplicates a task of {other}", t.id)));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use metaplan_core::generators::generate_tasks;

    fn tiny(seed: u64, n: usize) -> TaskDir {
        let t = TaskTemplate::Gripper { rooms: 2, balls: 2 };
        TaskDir::from_generated(t, seed, generate_tasks(&t, n, seed).unwrap())
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let set = tiny(3, 4);
        set.write(dir.path()).unwrap();
        let back = TaskDir::load(dir.path(), 10_000).unwrap();
        assert_eq!(back.tasks.len(), 4);
        for (a, b) in set.tasks.iter().zip(&back.tasks) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.optimal_cost, b.optimal_cost);
            assert_eq!(a.task.to_json(), b.task.to_json());
        }
        // without a manifest the costs are recomputed
        std::fs::remove_file(dir.path().join("manifest.json")).unwrap();
        let again = TaskDir::load(dir.path(), 10_000).unwrap();
        assert_eq!(again.tasks.iter().map(|t| t.optimal_cost).collect::<Vec<_>>(), set.tasks.iter().map(|t| t.optimal_cost).collect::<Vec<_>>());
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let a = tiny(3, 4);
        let b = tiny(3, 2);
        assert!(check_disjoint(&[("train", &a.tasks[..2]), ("test", &a.tasks[2..])]).is_ok());
        let err = check_disjoint(&[("train", &a.tasks), ("test", &b.tasks)]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
