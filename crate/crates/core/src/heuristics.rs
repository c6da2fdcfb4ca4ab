//! Baseline heuristics: blind, goal count, and the delete-relaxation
//! heuristics h^max and h^add.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::task::{ActionId, GroundTask, State};

/// Opaque per-node data a heuristic may thread from parent to child, such as
/// a recurrent hidden state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeContext(pub Option<Arc<[f64]>>);

/// A heuristic estimate of cost-to-goal. `f64::INFINITY` marks a detected dead end.
pub trait Heuristic: Send {
    fn name(&self) -> &str;

    fn is_admissible(&self) -> bool;

    /// Evaluates `state`. `parent` carries the generating node's context and the
    /// action that produced `state`; it is `None` at the search root.
    fn evaluate(&mut self, task: &GroundTask, state: &State, parent: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext);

    /// Context-free evaluation, as at a search root.
    fn value(&mut self, task: &GroundTask, state: &State) -> f64 {
        self.evaluate(task, state, None).0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Blind;

impl Heuristic for Blind {
    fn name(&self) -> &str {
        "blind"
    }

    fn is_admissible(&self) -> bool {
        true
    }

    fn evaluate(&mut self, _: &GroundTask, _: &State, _: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext) {
        (0.0, NodeContext::default())
    }
}

/// Number of unsatisfied goal literals. Not admissible under non-unit costs
/// or when one action achieves several goals.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoalCount;

impl Heuristic for GoalCount {
    fn name(&self) -> &str {
        "goalcount"
    }

    fn is_admissible(&self) -> bool {
        false
    }

    fn evaluate(&mut self, task: &GroundTask, s: &State, _: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext) {
        (task.unsatisfied_goals(s) as f64, NodeContext::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Aggregate {
    Max,
    Sum,
}

/// Delete-relaxation cost fixpoint computed by generalized Dijkstra over atoms.
/// Negative preconditions and negative goals are ignored.
#[derive(Debug, Clone)]
pub struct Relaxation {
    aggregate: Aggregate,
    atom_cost: Vec<f64>,
    unsatisfied: Vec<usize>,
    action_cost: Vec<f64>,
    // atom -> actions having it as a positive precondition
    consumers: Vec<Vec<ActionId>>,
    prepared_for: Option<(usize, usize)>,
}

impl Relaxation {
    fn new(aggregate: Aggregate) -> Self {
        Relaxation {
            aggregate,
            atom_cost: Vec::new(),
            unsatisfied: Vec::new(),
            action_cost: Vec::new(),
            consumers: Vec::new(),
            prepared_for: None,
        }
    }

    pub fn hmax() -> Self {
        Self::new(Aggregate::Max)
    }

    pub fn hadd() -> Self {
        Self::new(Aggregate::Sum)
    }

    fn prepare(&mut self, task: &GroundTask) {
        let key = (task.num_atoms(), task.num_actions());
        if self.prepared_for == Some(key) && self.consumers.len() == task.num_atoms() {
            return;
        }
        self.consumers = vec![Vec::new(); task.num_atoms()];
        for (a, act) in task.actions().iter().enumerate() {
            for &p in &act.pre_pos {
                self.consumers[p].push(a);
            }
        }
        self.atom_cost = vec![f64::INFINITY; task.num_atoms()];
        self.unsatisfied = vec![0; task.num_actions()];
        self.action_cost = vec![0.0; task.num_actions()];
        self.prepared_for = Some(key);
    }

    fn combine(&self, acc: f64, x: f64) -> f64 {
        match self.aggregate {
            Aggregate::Max => acc.max(x),
            Aggregate::Sum => acc + x,
        }
    }

    /// Relaxed cost of reaching the goal from `s`.
    pub fn compute(&mut self, task: &GroundTask, s: &State) -> f64 {
        if task.goal_pos().iter().all(|&g| s.get(g)) {
            return 0.0;
        }
        self.prepare(task);
        self.atom_cost.fill(f64::INFINITY);
        let mut heap: BinaryHeap<Reverse<(OrdF64, usize)>> = BinaryHeap::new();
        for atom in s.true_atoms() {
            self.atom_cost[atom] = 0.0;
            heap.push(Reverse((OrdF64(0.0), atom)));
        }
        for (a, act) in task.actions().iter().enumerate() {
            self.unsatisfied[a] = act.pre_pos.len();
            self.action_cost[a] = 0.0;
            if act.pre_pos.is_empty() {
                for &e in &act.add {
                    if act.cost < self.atom_cost[e] {
                        self.atom_cost[e] = act.cost;
                        heap.push(Reverse((OrdF64(act.cost), e)));
                    }
                }
            }
        }
        let mut goals_left = task.goal_pos().iter().filter(|&&g| !s.get(g)).count();
        while let Some(Reverse((OrdF64(cost), atom))) = heap.pop() {
            if cost > self.atom_cost[atom] {
                continue;
            }
            if !s.get(atom) && task.goal_pos().binary_search(&atom).is_ok() {
                goals_left -= 1;
                if goals_left == 0 {
                    // popped costs are final in Dijkstra order
                    break;
                }
            }
            for i in 0..self.consumers[atom].len() {
                let a = self.consumers[atom][i];
                self.action_cost[a] = self.combine(self.action_cost[a], cost);
                self.unsatisfied[a] -= 1;
                if self.unsatisfied[a] == 0 {
                    let act = task.action(a);
                    let reach = self.action_cost[a] + act.cost;
                    for &e in &act.add {
                        if reach < self.atom_cost[e] {
                            self.atom_cost[e] = reach;
                            heap.push(Reverse((OrdF64(reach), e)));
                        }
                    }
                }
            }
        }
        task.goal_pos().iter().fold(0.0, |acc, &g| self.combine(acc, self.atom_cost[g]))
    }
}

/// Totally ordered float for priority queues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
pub struct HMax(Relaxation);

impl Default for HMax {
    fn default() -> Self {
        HMax(Relaxation::hmax())
    }
}

impl Heuristic for HMax {
    fn name(&self) -> &str {
        "hmax"
    }

    fn is_admissible(&self) -> bool {
        true
    }

    fn evaluate(&mut self, task: &GroundTask, s: &State, _: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext) {
        (self.0.compute(task, s), NodeContext::default())
    }
}

#[derive(Debug, Clone)]
pub struct HAdd(Relaxation);

impl Default for HAdd {
    fn default() -> Self {
        HAdd(Relaxation::hadd())
    }
}

impl Heuristic for HAdd {
    fn name(&self) -> &str {
        "hadd"
    }

    fn is_admissible(&self) -> bool {
        false
    }

    fn evaluate(&mut self, task: &GroundTask, s: &State, _: Option<(&NodeContext, ActionId)>) -> (f64, NodeContext) {
        (self.0.compute(task, s), NodeContext::default())
    }
}

/// Names accepted for heuristic selection. `super` and `mrl` need trained
/// models and are built elsewhere.
pub const HEURISTIC_NAMES: &[&str] = &["blind", "goalcount", "hmax", "hadd", "super", "mrl"];

/// Builds a model-free heuristic by name.
pub fn classic_heuristic(name: &str) -> Option<Box<dyn Heuristic>> {
    match name {
        "blind" => Some(Box::new(Blind)),
        "goalcount" => Some(Box::new(GoalCount)),
        "hmax" => Some(Box::new(HMax::default())),
        "hadd" => Some(Box::new(HAdd::default())),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::GroundAtom;
    use crate::task::ActionSpec;

    fn atoms(names: &[&str]) -> Vec<GroundAtom> {
        names.iter().map(|n| GroundAtom::new(n, &[])).collect()
    }

    fn act(name: &str, pre: &[usize], add: &[usize]) -> ActionSpec {
        ActionSpec { name: name.into(), pre_pos: pre.to_vec(), pre_neg: vec![], add: add.to_vec(), del: vec![], cost: 1.0 }
    }

    /// p -> q -> g
    fn chain() -> GroundTask {
        GroundTask::from_parts(
            "chain",
            "t",
            atoms(&["p", "q", "g"]),
            vec![act("pq", &[0], &[1]), act("qg", &[1], &[2])],
            [0],
            vec![2],
            vec![],
            vec![],
        )
        .unwrap()
    }

    /// two goals, each one step from init
    fn two_goals() -> GroundTask {
        GroundTask::from_parts(
            "two",
            "t",
            atoms(&["s", "a", "b"]),
            vec![act("sa", &[0], &[1]), act("sb", &[0], &[2])],
            [0],
            vec![1, 2],
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn chain_values() {
        let t = chain();
        assert_eq!(HMax::default().value(&t, t.init()), 2.0);
        assert_eq!(HAdd::default().value(&t, t.init()), 2.0);
        let goal = State::from_atoms(3, [2]);
        assert_eq!(HMax::default().value(&t, &goal), 0.0);
        assert_eq!(HAdd::default().value(&t, &goal), 0.0);
    }

    #[test]
    fn independent_goals_max_vs_sum() {
        let t = two_goals();
        assert_eq!(HMax::default().value(&t, t.init()), 1.0);
        assert_eq!(HAdd::default().value(&t, t.init()), 2.0);
        assert_eq!(GoalCount.value(&t, t.init()), 2.0);
    }

    #[test]
    fn relaxed_dead_end_is_infinite() {
        let t = chain();
        let stuck = State::empty(3);
        assert_eq!(HMax::default().value(&t, &stuck), f64::INFINITY);
        assert_eq!(HAdd::default().value(&t, &stuck), f64::INFINITY);
        assert_eq!(Blind.value(&t, &stuck), 0.0);
    }

    #[test]
    fn goal_count_counts_unsatisfied_literals() {
        let t = GroundTask::from_parts("g", "t", atoms(&["a", "b", "c", "d"]), vec![], [0], vec![0, 1, 2, 3], vec![], vec![])
            .unwrap();
        assert_eq!(GoalCount.value(&t, t.init()), 3.0);
        let empty = GroundTask::from_parts("e", "t", atoms(&["a"]), vec![], [], vec![], vec![], vec![]).unwrap();
        assert_eq!(GoalCount.value(&empty, empty.init()), 0.0);
    }

    #[test]
    fn heuristics_by_name() {
        for n in ["blind", "goalcount", "hmax", "hadd"] {
            assert_eq!(classic_heuristic(n).unwrap().name(), n);
        }
        assert!(classic_heuristic("lmcut").is_none());
    }
}
