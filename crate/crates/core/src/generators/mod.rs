//! Seeded random task distributions for Gripper, Blocksworld, Ferry and Sokoban.

mod blocksworld;
mod ferry;
mod gripper;
mod sokoban;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{ground, parse_domain, problem_to_pddl, DomainDef, GroundAtom, GroundLiteral, PddlError, ProblemDef, TypedName};
use crate::search::{bfs_oracle, SearchError};
use crate::task::GroundTask;

pub use blocksworld::{blocksworld_problem, BlockConfig};
pub use ferry::ferry_problem;
pub use gripper::gripper_problem;
pub use sokoban::{sokoban_problem, Cell};

/// Reachable-state cap used to certify solvability of drawn tasks.
pub const SOLVABILITY_STATE_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("gave up after {attempts} draws with {accepted} of {requested} tasks accepted")]
    GenerationExhausted { attempts: usize, accepted: usize, requested: usize },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum TaskTemplate {
    Gripper { rooms: usize, balls: usize },
    Blocksworld { blocks: usize },
    Ferry { cars: usize, locations: usize },
    Sokoban { size: usize, boxes: usize, obstacles: usize },
}

impl TaskTemplate {
    /// Default instance sizes: Gripper 2 rooms/4 balls, Blocksworld 4 blocks,
    /// Ferry 4 cars/4 locations, Sokoban 5x5 with 2 boxes and 3 obstacles.
    pub fn standard(domain: &str) -> Option<Self> {
        Some(match domain {
            "gripper" => TaskTemplate::Gripper { rooms: 2, balls: 4 },
            "blocksworld" => TaskTemplate::Blocksworld { blocks: 4 },
            "ferry" => TaskTemplate::Ferry { cars: 4, locations: 4 },
            "sokoban" => TaskTemplate::Sokoban { size: 5, boxes: 2, obstacles: 3 },
            _ => return None,
        })
    }

    pub fn domain_key(&self) -> &'static str {
        match self {
            TaskTemplate::Gripper { .. } => "gripper",
            TaskTemplate::Blocksworld { .. } => "blocksworld",
            TaskTemplate::Ferry { .. } => "ferry",
            TaskTemplate::Sokoban { .. } => "sokoban",
        }
    }

    pub fn domain_pddl(&self) -> &'static str {
        domain_pddl(self.domain_key()).expect("every template has a domain file")
    }

    pub fn domain(&self) -> DomainDef {
        parse_domain(self.domain_pddl()).expect("bundled domain files parse")
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidTemplate(m));
        match *self {
            TaskTemplate::Gripper { rooms, balls } if rooms < 2 || balls == 0 || rooms > 26 => {
                bad(format!("gripper needs 2..=26 rooms and at least one ball, got {rooms}/{balls}"))
            }
            TaskTemplate::Blocksworld { blocks } if blocks < 2 => bad(format!("blocksworld needs 2+ blocks, got {blocks}")),
            TaskTemplate::Ferry { cars, locations } if cars == 0 || locations < 2 => {
                bad(format!("ferry needs 1+ cars and 2+ locations, got {cars}/{locations}"))
            }
            TaskTemplate::Sokoban { size, boxes, obstacles }
                if size < 3 || boxes == 0 || boxes * 2 + obstacles + 1 > size * size =>
            {
                bad(format!("sokoban {size}x{size} cannot hold {boxes} boxes and {obstacles} obstacles"))
            }
            _ => Ok(()),
        }
    }

    /// One random problem. Not checked for solvability.
    pub fn draw(&self, name: &str, rng: &mut impl Rng) -> ProblemDef {
        match *self {
            TaskTemplate::Gripper { rooms, balls } => gripper::draw(name, rooms, balls, rng),
            TaskTemplate::Blocksworld { blocks } => blocksworld::draw(name, blocks, rng),
            TaskTemplate::Ferry { cars, locations } => ferry::draw(name, cars, locations, rng),
            TaskTemplate::Sokoban { size, boxes, obstacles } => sokoban::draw(name, size, boxes, obstacles, rng),
        }
    }
}

pub fn domain_pddl(domain: &str) -> Option<&'static str> {
    Some(match domain {
        "gripper" => include_str!("../../data/gripper/domain.pddl"),
        "blocksworld" => include_str!("../../data/blocksworld/domain.pddl"),
        "ferry" => include_str!("../../data/ferry/domain.pddl"),
        "sokoban" => include_str!("../../data/sokoban/domain.pddl"),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub template: TaskTemplate,
    /// Seed of the draw that produced this task.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct GeneratedTask {
    pub id: String,
    pub spec: TaskSpec,
    pub problem: ProblemDef,
    pub task: GroundTask,
    pub optimal_cost: f64,
}

impl GeneratedTask {
    pub fn problem_pddl(&self) -> String {
        problem_to_pddl(&self.problem)
    }
}

/// Draws `n` distinct, solvable tasks whose initial state is not a goal.
/// The same `(template, n, seed)` always yields the same list.
pub fn generate_tasks(template: &TaskTemplate, n: usize, seed: u64) -> Result<Vec<GeneratedTask>, GenError> {
    generate_tasks_excluding(template, n, seed, &[])
}

/// Like [`generate_tasks`], also rejecting tasks identical to any in `exclude`.
pub fn generate_tasks_excluding(
    template: &TaskTemplate,
    n: usize,
    seed: u64,
    exclude: &[&GroundTask],
) -> Result<Vec<GeneratedTask>, GenError> {
    template.validate()?;
    let domain = template.domain();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<String> = exclude.iter().map(|t| identity_key(t)).collect();
    let mut out = Vec::with_capacity(n);
    let max_attempts = 200 * n + 1_000;
    let mut attempts = 0;
    while out.len() < n {
        if attempts >= max_attempts {
            return Err(GenError::GenerationExhausted { attempts, accepted: out.len(), requested: n });
        }
        attempts += 1;
        let draw_seed: u64 = master.gen();
        let id = format!("{}-s{}-{:03}", template.domain_key(), seed, out.len());
        let problem = template.draw(&id, &mut ChaCha8Rng::seed_from_u64(draw_seed));
        let task = ground(&domain, &problem)?;
        if task.is_goal(task.init()) {
            continue;
        }
        if !seen.insert(identity_key(&task)) {
            continue;
        }
        let optimal = bfs_oracle(&task, SOLVABILITY_STATE_CAP)?.optimal_cost;
        if optimal.is_infinite() {
            continue;
        }
        out.push(GeneratedTask { id, spec: TaskSpec { template: *template, seed: draw_seed }, problem, task, optimal_cost: optimal });
    }
    Ok(out)
}

/// Key identifying a task by its initial state and goal.
pub fn identity_key(task: &GroundTask) -> String {
    let name = |&a: &usize| task.atoms()[a].to_string();
    let init: Vec<String> = task.init().true_atoms().map(|a| name(&a)).collect();
    let pos: Vec<String> = task.goal_pos().iter().map(name).collect();
    let neg: Vec<String> = task.goal_neg().iter().map(name).collect();
    format!("{}|{}|{}", init.join(","), pos.join(","), neg.join(","))
}

fn typed(names: impl IntoIterator<Item = String>, ty: &str) -> Vec<TypedName> {
    names.into_iter().map(|name| TypedName { name, ty: ty.to_string() }).collect()
}

fn atom(pred: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::new(pred, args)
}

fn goal(atoms: Vec<GroundAtom>) -> Vec<GroundLiteral> {
    atoms.into_iter().map(|atom| GroundLiteral { atom, positive: true }).collect()
}

fn problem(name: &str, domain: &str, objects: Vec<TypedName>, init: Vec<GroundAtom>, goal_atoms: Vec<GroundAtom>) -> ProblemDef {
    ProblemDef {
        name: name.to_string(),
        domain_name: domain.to_string(),
        objects,
        init,
        numeric_init: Vec::new(),
        goal: goal(goal_atoms),
        metric: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_aligned() {
        for domain in ["gripper", "blocksworld", "ferry", "sokoban"] {
            let template = TaskTemplate::standard(domain).unwrap();
            let a = generate_tasks(&template, 4, 7).unwrap();
            let b = generate_tasks(&template, 4, 7).unwrap();
            assert_eq!(a.len(), 4);
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.task.to_json(), y.task.to_json());
                assert_eq!(x.task.num_atoms(), a[0].task.num_atoms());
                assert_eq!(x.task.num_actions(), a[0].task.num_actions());
                assert!(x.optimal_cost >= 1.0);
            }
            let keys: HashSet<_> = a.iter().map(|t| identity_key(&t.task)).collect();
            assert_eq!(keys.len(), 4, "{domain} tasks are distinct");
        }
    }

    #[test]
    fn exhausted_when_too_few_distinct_tasks_exist() {
        // 2 rooms, 1 ball: robot(2) x ball(2) x target(2) minus goal-at-init draws = 4 distinct tasks
        let t = TaskTemplate::Gripper { rooms: 2, balls: 1 };
        assert_eq!(generate_tasks(&t, 4, 1).unwrap().len(), 4);
        assert!(matches!(generate_tasks(&t, 5, 1), Err(GenError::GenerationExhausted { accepted: 4, .. })));
    }

    #[test]
    fn excluded_tasks_are_never_redrawn() {
        let t = TaskTemplate::Gripper { rooms: 2, balls: 1 };
        let first = generate_tasks(&t, 2, 3).unwrap();
        let refs: Vec<&GroundTask> = first.iter().map(|g| &g.task).collect();
        let rest = generate_tasks_excluding(&t, 2, 3, &refs).unwrap();
        for r in &rest {
            assert!(first.iter().all(|f| identity_key(&f.task) != identity_key(&r.task)));
        }
    }

    #[test]
    fn invalid_templates() {
        assert!(TaskTemplate::Sokoban { size: 3, boxes: 4, obstacles: 1 }.validate().is_err());
        assert!(TaskTemplate::Gripper { rooms: 1, balls: 2 }.validate().is_err());
    }
}
