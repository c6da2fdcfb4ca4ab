//! Tiny hand-built tasks for sanity checks.

use metaplan_core::pddl::GroundAtom;
use metaplan_core::task::ActionSpec;
use metaplan_core::GroundTask;

/// Deterministic chain of `n` positions with "left" and "right" moves from
/// every position, start at 0, goal at `n - 1`. Optimal cost `n - 1`.
pub fn chain_task(n: usize) -> GroundTask {
    assert!(n >= 2);
    let pos = |i: usize| format!("c{i}");
    let atoms = (0..n).map(|i| GroundAtom::new("at", &[&pos(i)])).collect();
    let mut actions = Vec::new();
    for i in 0..n {
        let right = (i + 1).min(n - 1);
        let left = i.saturating_sub(1);
        for (dir, j) in [("right", right), ("left", left)] {
            actions.push(ActionSpec {
                name: format!("({dir} {} {})", pos(i), pos(j)),
                pre_pos: vec![i],
                pre_neg: vec![],
                add: vec![j],
                del: if i == j { vec![] } else { vec![i] },
                cost: 1.0,
            });
        }
    }
    GroundTask::from_parts(format!("chain{n}"), "chain", atoms, actions, [0], vec![n - 1], vec![], vec![]).expect("valid chain")
}
