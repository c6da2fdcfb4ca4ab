use metaplan_core::corpus::CORPUS;
use metaplan_core::generators::{domain_pddl, gripper_problem};
use metaplan_core::pddl::{domain_to_pddl, ground, parse_domain, parse_problem, problem_to_pddl};
use metaplan_core::search::bfs_oracle;
use proptest::prelude::*;

fn gripper_p01() -> (metaplan_core::pddl::ProblemDef, metaplan_core::GroundTask) {
    let domain = parse_domain(domain_pddl("gripper").unwrap()).unwrap();
    let entry = CORPUS.iter().find(|e| e.domain == "gripper" && e.name == "p01").unwrap();
    let problem = parse_problem(entry.problem_pddl, &domain).unwrap();
    let task = ground(&domain, &problem).unwrap();
    (problem, task)
}

#[test]
fn gripper_counts() {
    let domain = parse_domain(domain_pddl("gripper").unwrap()).unwrap();
    assert_eq!(domain.actions.len(), 3);
    let (problem, task) = gripper_p01();
    assert_eq!(problem.objects.len(), 8);
    // at-robby 2 + at 4x2 + free 2 + carry 4x2
    assert_eq!(task.num_atoms(), 20);
    // move 2x2 + pick 4x2x2 + drop 4x2x2
    assert_eq!(task.num_actions(), 36);
}

#[test]
fn blocksworld_atom_count() {
    let task = CORPUS.iter().find(|e| e.domain == "blocksworld").unwrap().ground().unwrap();
    assert_eq!(task.num_atoms(), 4 * 4 + 4 + 4 + 4 + 1);
}

#[test]
fn gripper_init_applicable_set() {
    // robot in roomb with ball3 and ball4
    let (_, task) = gripper_p01();
    let names: Vec<&str> = task.applicable(task.init()).iter().map(|&a| task.action(a).name.as_str()).collect();
    let mut expected = vec![
        "(move roomb rooma)",
        "(move roomb roomb)",
        "(pick ball3 roomb left)",
        "(pick ball3 roomb right)",
        "(pick ball4 roomb left)",
        "(pick ball4 roomb right)",
    ];
    let mut got = names.clone();
    got.sort();
    expected.sort();
    assert_eq!(got, expected);
}

#[test]
fn corpus_grounding_is_deterministic() {
    for entry in CORPUS {
        let a = entry.ground().unwrap().to_json();
        let b = entry.ground().unwrap().to_json();
        assert_eq!(a, b, "{}/{}", entry.domain, entry.name);
    }
}

#[test]
fn corpus_is_solvable_and_nontrivial() {
    for entry in CORPUS {
        let task = entry.ground().unwrap();
        let cost = bfs_oracle(&task, 200_000).unwrap().optimal_cost;
        assert!(cost.is_finite() && cost >= 1.0, "{}/{}", entry.domain, entry.name);
    }
}

#[test]
fn domain_and_problem_round_trip() {
    for d in ["gripper", "blocksworld", "ferry", "sokoban"] {
        let domain = parse_domain(domain_pddl(d).unwrap()).unwrap();
        let again = parse_domain(&domain_to_pddl(&domain)).unwrap();
        assert_eq!(domain, again, "{d}");
    }
    for entry in CORPUS {
        let domain = parse_domain(entry.domain_pddl()).unwrap();
        let p = parse_problem(entry.problem_pddl, &domain).unwrap();
        assert_eq!(p, parse_problem(&problem_to_pddl(&p), &domain).unwrap());
    }
}

#[test]
fn micro_gripper_three_steps() {
    let domain = parse_domain(domain_pddl("gripper").unwrap()).unwrap();
    let task = ground(&domain, &gripper_problem("micro", 2, 0, &[0], 1)).unwrap();
    assert_eq!(bfs_oracle(&task, 1000).unwrap().optimal_cost, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_property(entry_idx in 0..CORPUS.len(), walk in prop::collection::vec(any::<prop::sample::Index>(), 1..25)) {
        let task = CORPUS[entry_idx].ground().unwrap();
        let mut s = task.init().clone();
        for pick in walk {
            let app = task.applicable(&s);
            if app.is_empty() {
                break;
            }
            let a = app[pick.index(app.len())];
            let (next, cost) = task.apply(&s, a).unwrap();
            let act = task.action(a);
            prop_assert_eq!(next.width(), task.num_atoms());
            prop_assert_eq!(cost, act.cost);
            for atom in 0..task.num_atoms() {
                if act.add.contains(&atom) {
                    prop_assert!(next.get(atom));
                } else if act.del.contains(&atom) {
                    prop_assert!(!next.get(atom));
                } else {
                    prop_assert_eq!(next.get(atom), s.get(atom));
                }
            }
            s = next;
        }
    }
}
