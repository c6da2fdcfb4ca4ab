//! Planning core: PDDL parsing and grounding, classical heuristics, A* search,
//! the RL environment view of a task and the benchmark task generators.

pub mod corpus;
pub mod env;
pub mod generators;
pub mod heuristics;
pub mod par;
pub mod pddl;
pub mod search;
pub mod task;

pub use env::{EnvConfig, EnvError, HorizonRule, PlanningEnv, StepOutcome};
pub use generators::{generate_tasks, GeneratedTask, TaskTemplate};
pub use heuristics::{classic_heuristic, Heuristic, NodeContext};
pub use search::{astar, SearchLimits, SearchResult, SearchStatus};
pub use task::{ActionId, AtomId, GroundTask, State};
