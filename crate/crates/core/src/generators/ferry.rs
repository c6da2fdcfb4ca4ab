use rand::Rng;

use super::{atom, problem, typed};
use crate::pddl::ProblemDef;

/// Ferry instance with the ferry at `ferry`, car `i` at `car_locs[i]` and
/// required at `goal_locs[i]`.
pub fn ferry_problem(name: &str, locations: usize, ferry: usize, car_locs: &[usize], goal_locs: &[usize]) -> ProblemDef {
    let locs: Vec<String> = (1..=locations).map(|i| format!("l{i}")).collect();
    let cars: Vec<String> = (1..=car_locs.len()).map(|i| format!("c{i}")).collect();
    let mut objects = typed(cars.clone(), "car");
    objects.extend(typed(locs.clone(), "location"));
    let mut init = vec![atom("at-ferry", &[&locs[ferry]]), atom("empty-ferry", &[])];
    init.extend(car_locs.iter().zip(&cars).map(|(&l, c)| atom("at", &[c, &locs[l]])));
    let goal = goal_locs.iter().zip(&cars).map(|(&l, c)| atom("at", &[c, &locs[l]])).collect();
    problem(name, "ferry", objects, init, goal)
}

pub(super) fn draw(name: &str, cars: usize, locations: usize, rng: &mut impl Rng) -> ProblemDef {
    let ferry = rng.gen_range(0..locations);
    let car_locs: Vec<usize> = (0..cars).map(|_| rng.gen_range(0..locations)).collect();
    let goal_locs: Vec<usize> = (0..cars).map(|_| rng.gen_range(0..locations)).collect();
    ferry_problem(name, locations, ferry, &car_locs, &goal_locs)
}
