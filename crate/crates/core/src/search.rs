//! A* search with node reopening, plan validation, and exhaustive oracles used
//! to certify optimal costs in tests.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{Heuristic, NodeContext, OrdF64};
use crate::task::{ActionId, GroundTask, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("reachable state space exceeds the cap of {cap} states")]
    CapacityExceeded { cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchLimits {
    pub max_expansions: u64,
    pub max_seconds: f64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_expansions: 1_000_000, max_seconds: 300.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Solved,
    Unsolvable,
    LimitReached,
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchStatus::Solved => "solved",
            SearchStatus::Unsolvable => "unsolvable",
            SearchStatus::LimitReached => "limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub status: SearchStatus,
    pub plan: Vec<ActionId>,
    pub cost: f64,
    pub expanded: u64,
    pub generated: u64,
    pub wall_time: f64,
}

impl SearchResult {
    /// `status,cost,expanded,generated,seconds`
    pub fn summary_line(&self) -> String {
        format!("{},{},{},{},{:.6}", self.status, self.cost, self.expanded, self.generated, self.wall_time)
    }
}

struct Node {
    state: State,
    g: f64,
    parent: Option<usize>,
    action: Option<ActionId>,
    context: NodeContext,
}

/// Best-first search on `f = g + h`. Ties prefer smaller `h`, then earlier
/// insertion. A closed state is reopened when reached again with strictly
/// smaller `g`. Successors with infinite `h` are never enqueued.
pub fn astar(task: &GroundTask, heuristic: &mut dyn Heuristic, limits: &SearchLimits) -> SearchResult {
    let start = Instant::now();
    let mut result = SearchResult {
        status: SearchStatus::Unsolvable,
        plan: Vec::new(),
        cost: f64::INFINITY,
        expanded: 0,
        generated: 0,
        wall_time: 0.0,
    };
    let (h0, ctx0) = heuristic.evaluate(task, task.init(), None);
    result.generated = 1;
    if h0.is_infinite() {
        result.wall_time = start.elapsed().as_secs_f64();
        return result;
    }

    let mut nodes = vec![Node { state: task.init().clone(), g: 0.0, parent: None, action: None, context: ctx0 }];
    let mut best: HashMap<State, (f64, usize)> = HashMap::new();
    best.insert(task.init().clone(), (0.0, 0));
    // (f, h, insertion order, node)
    let mut open: BinaryHeap<Reverse<(OrdF64, OrdF64, u64, usize)>> = BinaryHeap::new();
    open.push(Reverse((OrdF64(h0), OrdF64(h0), 0, 0)));
    let mut seq = 1u64;
    let mut applicable = Vec::new();

    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        if best.get(&nodes[idx].state).map(|&(_, n)| n) != Some(idx) {
            continue;
        }
        if result.expanded >= limits.max_expansions
            || (result.expanded.is_multiple_of(64) && start.elapsed().as_secs_f64() > limits.max_seconds)
        {
            result.status = SearchStatus::LimitReached;
            break;
        }
        result.expanded += 1;
        if task.is_goal(&nodes[idx].state) {
            result.status = SearchStatus::Solved;
            result.cost = nodes[idx].g;
            let mut cur = idx;
            while let (Some(a), Some(p)) = (nodes[cur].action, nodes[cur].parent) {
                result.plan.push(a);
                cur = p;
            }
            result.plan.reverse();
            break;
        }
        let (g, context) = (nodes[idx].g, nodes[idx].context.clone());
        task.applicable_into(&nodes[idx].state, &mut applicable);
        for &a in &applicable {
            let child = task.successor(&nodes[idx].state, a);
            let g2 = g + task.action(a).cost;
            if matches!(best.get(&child), Some(&(bg, _)) if bg <= g2) {
                continue;
            }
            let (h, ctx) = heuristic.evaluate(task, &child, Some((&context, a)));
            if h.is_infinite() {
                continue;
            }
            result.generated += 1;
            let child_idx = nodes.len();
            best.insert(child.clone(), (g2, child_idx));
            nodes.push(Node { state: child, g: g2, parent: Some(idx), action: Some(a), context: ctx });
            open.push(Reverse((OrdF64(g2 + h), OrdF64(h), seq, child_idx)));
            seq += 1;
        }
    }
    result.wall_time = start.elapsed().as_secs_f64();
    result
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Cost of a cheapest plan; infinite when no goal state is reachable.
    pub optimal_cost: f64,
    /// Exact cheapest cost from the initial state to every reachable state.
    pub distances: HashMap<State, f64>,
}

/// Exhaustive shortest-path distances from the initial state (breadth-first
/// for unit costs, uniform-cost otherwise).
pub fn bfs_oracle(task: &GroundTask, state_cap: usize) -> Result<OracleResult, SearchError> {
    let mut distances: HashMap<State, f64> = HashMap::new();
    let mut optimal = f64::INFINITY;
    let mut applicable = Vec::new();
    if task.is_unit_cost() {
        let mut queue = VecDeque::new();
        distances.insert(task.init().clone(), 0.0);
        queue.push_back(task.init().clone());
        while let Some(s) = queue.pop_front() {
            let d = distances[&s];
            if optimal.is_infinite() && task.is_goal(&s) {
                optimal = d;
            }
            task.applicable_into(&s, &mut applicable);
            for &a in &applicable {
                let next = task.successor(&s, a);
                if !distances.contains_key(&next) {
                    if distances.len() >= state_cap {
                        return Err(SearchError::CapacityExceeded { cap: state_cap });
                    }
                    distances.insert(next.clone(), d + 1.0);
                    queue.push_back(next);
                }
            }
        }
    } else {
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        let mut states = vec![task.init().clone()];
        heap.push(Reverse((OrdF64(0.0), seq, 0usize)));
        let mut tentative: HashMap<State, f64> = HashMap::from([(task.init().clone(), 0.0)]);
        while let Some(Reverse((OrdF64(d), _, i))) = heap.pop() {
            let s = states[i].clone();
            if distances.contains_key(&s) {
                continue;
            }
            distances.insert(s.clone(), d);
            if optimal.is_infinite() && task.is_goal(&s) {
                optimal = d;
            }
            task.applicable_into(&s, &mut applicable);
            for &a in &applicable {
                let next = task.successor(&s, a);
                let nd = d + task.action(a).cost;
                if distances.contains_key(&next) || tentative.get(&next).is_some_and(|&t| t <= nd) {
                    continue;
                }
                if tentative.len() >= state_cap {
                    return Err(SearchError::CapacityExceeded { cap: state_cap });
                }
                tentative.insert(next.clone(), nd);
                seq += 1;
                states.push(next);
                heap.push(Reverse((OrdF64(nd), seq, states.len() - 1)));
            }
        }
    }
    Ok(OracleResult { optimal_cost: optimal, distances })
}

/// Every reachable state with its exact cost-to-goal `h*` (infinite for
/// states from which no goal is reachable). States are in discovery order.
#[derive(Debug, Clone)]
pub struct CostToGo {
    pub states: Vec<State>,
    pub h_star: Vec<f64>,
}

pub fn exact_cost_to_go(task: &GroundTask, state_cap: usize) -> Result<CostToGo, SearchError> {
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states = vec![task.init().clone()];
    index.insert(task.init().clone(), 0);
    // reverse edges: (predecessor, cost)
    let mut preds: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut applicable = Vec::new();
    let mut i = 0;
    while i < states.len() {
        task.applicable_into(&states[i], &mut applicable);
        for &a in &applicable {
            let next = task.successor(&states[i], a);
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if states.len() >= state_cap {
                        return Err(SearchError::CapacityExceeded { cap: state_cap });
                    }
                    index.insert(next.clone(), states.len());
                    states.push(next);
                    preds.push(Vec::new());
                    states.len() - 1
                }
            };
            preds[j].push((i, task.action(a).cost));
        }
        i += 1;
    }
    let mut h_star = vec![f64::INFINITY; states.len()];
    let mut heap = BinaryHeap::new();
    for (k, s) in states.iter().enumerate() {
        if task.is_goal(s) {
            h_star[k] = 0.0;
            heap.push(Reverse((OrdF64(0.0), k)));
        }
    }
    while let Some(Reverse((OrdF64(d), k))) = heap.pop() {
        if d > h_star[k] {
            continue;
        }
        for &(p, c) in &preds[k] {
            if d + c < h_star[p] {
                h_star[p] = d + c;
                heap.push(Reverse((OrdF64(d + c), p)));
            }
        }
    }
    Ok(CostToGo { states, h_star })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanValidation {
    pub valid: bool,
    pub cost: f64,
    /// Index of the first inapplicable action, or `plan.len()` when every step
    /// applies but the final state is not a goal.
    pub failure_index: Option<usize>,
}

/// Replays `plan` from the initial state.
pub fn validate_plan(task: &GroundTask, plan: &[ActionId]) -> PlanValidation {
    let mut s = task.init().clone();
    let mut cost = 0.0;
    for (i, &a) in plan.iter().enumerate() {
        match task.apply(&s, a) {
            Ok((next, c)) => {
                s = next;
                cost += c;
            }
            Err(_) => return PlanValidation { valid: false, cost, failure_index: Some(i) },
        }
    }
    if task.is_goal(&s) {
        PlanValidation { valid: true, cost, failure_index: None }
    } else {
        PlanValidation { valid: false, cost, failure_index: Some(plan.len()) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{Blind, HMax};
    use crate::pddl::GroundAtom;
    use crate::task::ActionSpec;

    fn line(n: usize, goal: Option<usize>) -> GroundTask {
        let atoms = (0..n).map(|i| GroundAtom::new("at", &[&format!("c{i}")])).collect();
        let mut actions = Vec::new();
        for i in 0..n - 1 {
            actions.push(ActionSpec {
                name: format!("right{i}"),
                pre_pos: vec![i],
                pre_neg: vec![],
                add: vec![i + 1],
                del: vec![i],
                cost: 1.0,
            });
            actions.push(ActionSpec {
                name: format!("left{i}"),
                pre_pos: vec![i + 1],
                pre_neg: vec![],
                add: vec![i],
                del: vec![i + 1],
                cost: 1.0,
            });
        }
        GroundTask::from_parts("line", "t", atoms, actions, [0], goal.into_iter().collect(), vec![], vec![]).unwrap()
    }

    #[test]
    fn goal_at_init() {
        let t = line(3, Some(0));
        let r = astar(&t, &mut Blind, &SearchLimits::default());
        assert_eq!(r.status, SearchStatus::Solved);
        assert!(r.plan.is_empty());
        assert_eq!((r.cost, r.expanded), (0.0, 1));
        assert_eq!(bfs_oracle(&t, 100).unwrap().optimal_cost, 0.0);
        let v = validate_plan(&t, &[]);
        assert!(v.valid && v.cost == 0.0);
    }

    #[test]
    fn line_is_solved_optimally() {
        let t = line(5, Some(4));
        for h in [&mut Blind as &mut dyn Heuristic, &mut HMax::default()] {
            let r = astar(&t, h, &SearchLimits::default());
            assert_eq!(r.status, SearchStatus::Solved);
            assert_eq!(r.cost, 4.0);
            assert!(r.expanded <= r.generated);
            let v = validate_plan(&t, &r.plan);
            assert!(v.valid);
            assert_eq!(v.cost, r.cost);
        }
        assert_eq!(bfs_oracle(&t, 100).unwrap().optimal_cost, 4.0);
    }

    #[test]
    fn unreachable_goal() {
        let atoms = vec![GroundAtom::new("a", &[]), GroundAtom::new("g", &[])];
        let t = GroundTask::from_parts("u", "t", atoms, vec![], [0], vec![1], vec![], vec![]).unwrap();
        assert_eq!(astar(&t, &mut Blind, &SearchLimits::default()).status, SearchStatus::Unsolvable);
        assert_eq!(bfs_oracle(&t, 10).unwrap().optimal_cost, f64::INFINITY);
    }

    #[test]
    fn expansion_limit() {
        let t = line(8, Some(7));
        let r = astar(&t, &mut Blind, &SearchLimits { max_expansions: 3, max_seconds: 10.0 });
        assert_eq!(r.status, SearchStatus::LimitReached);
        assert_eq!(r.expanded, 3);
    }

    #[test]
    fn invalid_plans_report_failure_index() {
        let t = line(4, Some(3));
        let right0 = t.action_id("right0").unwrap();
        let right2 = t.action_id("right2").unwrap();
        let v = validate_plan(&t, &[right0, right2]);
        assert_eq!((v.valid, v.failure_index), (false, Some(1)));
        let v = validate_plan(&t, &[right0]);
        assert_eq!((v.valid, v.failure_index), (false, Some(1)));
    }

    #[test]
    fn cost_to_go_matches_line_distance() {
        let t = line(5, Some(4));
        let ctg = exact_cost_to_go(&t, 100).unwrap();
        for (s, h) in ctg.states.iter().zip(&ctg.h_star) {
            let pos = s.true_atoms().next().unwrap();
            assert_eq!(*h, (4 - pos) as f64);
        }
        assert!(matches!(exact_cost_to_go(&t, 2), Err(SearchError::CapacityExceeded { .. })));
    }
}
