use metaplan_core::generators::{generate_tasks, TaskTemplate};
use metaplan_core::heuristics::{Blind, HAdd, HMax};
use metaplan_core::search::{astar, bfs_oracle, exact_cost_to_go, validate_plan, SearchLimits, SearchStatus};
use metaplan_core::{GroundTask, Heuristic};
use proptest::prelude::*;

fn small_template() -> impl Strategy<Value = TaskTemplate> {
    prop_oneof![
        Just(TaskTemplate::Gripper { rooms: 2, balls: 2 }),
        Just(TaskTemplate::Blocksworld { blocks: 3 }),
        Just(TaskTemplate::Ferry { cars: 2, locations: 3 }),
        Just(TaskTemplate::Sokoban { size: 4, boxes: 1, obstacles: 2 }),
    ]
}

fn draw(template: TaskTemplate, seed: u64) -> GroundTask {
    generate_tasks(&template, 1, seed).unwrap().remove(0).task
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn admissible_astar_is_optimal(template in small_template(), seed in 0u64..1000) {
        let task = draw(template, seed);
        let optimal = bfs_oracle(&task, 50_000).unwrap().optimal_cost;
        let limits = SearchLimits::default();
        let blind = astar(&task, &mut Blind, &limits);
        let hmax = astar(&task, &mut HMax::default(), &limits);
        for r in [&blind, &hmax] {
            prop_assert_eq!(r.status, SearchStatus::Solved);
            prop_assert_eq!(r.cost, optimal);
            let v = validate_plan(&task, &r.plan);
            prop_assert!(v.valid);
            prop_assert_eq!(v.cost, r.cost);
            prop_assert!(r.expanded <= r.generated + 1);
        }
        prop_assert!(hmax.expanded <= blind.expanded);
    }

    #[test]
    fn relaxation_bounds_hold_on_every_state(template in small_template(), seed in 0u64..1000) {
        let task = draw(template, seed);
        let exact = exact_cost_to_go(&task, 50_000).unwrap();
        let (mut hmax, mut hadd) = (HMax::default(), HAdd::default());
        for (s, &h_star) in exact.states.iter().zip(&exact.h_star) {
            let (m, a) = (hmax.value(&task, s), hadd.value(&task, s));
            prop_assert!(m >= 0.0);
            prop_assert!(m <= h_star, "h_max {} > h* {}", m, h_star);
            prop_assert!(m <= a);
            if task.is_goal(s) {
                prop_assert_eq!(m, 0.0);
                prop_assert_eq!(a, 0.0);
            }
            if m.is_infinite() {
                prop_assert!(h_star.is_infinite());
            }
        }
    }

    #[test]
    fn repeated_search_is_identical(template in small_template(), seed in 0u64..1000) {
        let task = draw(template, seed);
        let a = astar(&task, &mut HAdd::default(), &SearchLimits::default());
        let b = astar(&task, &mut HAdd::default(), &SearchLimits::default());
        prop_assert_eq!(a.plan, b.plan);
        prop_assert_eq!(a.expanded, b.expanded);
        prop_assert_eq!(a.generated, b.generated);
    }
}
