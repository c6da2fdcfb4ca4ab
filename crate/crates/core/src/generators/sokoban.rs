use rand::seq::index::sample;
use rand::Rng;

use super::{atom, problem, typed};
use crate::pddl::ProblemDef;

/// `(column, row)`.
pub type Cell = (usize, usize);

fn coord(i: usize) -> String {
    format!("p{i}")
}

/// Sokoban instance on a `size` x `size` grid.
pub fn sokoban_problem(name: &str, size: usize, robot: Cell, boxes: &[Cell], walls: &[Cell], goals: &[Cell]) -> ProblemDef {
    let objects = typed((0..size).map(coord), "coord");
    let c = |(x, y): Cell| [coord(x), coord(y)];
    let mut init = Vec::new();
    let [rx, ry] = c(robot);
    init.push(atom("robot", &[&rx, &ry]));
    for &b in boxes {
        let [x, y] = c(b);
        init.push(atom("box", &[&x, &y]));
    }
    for &w in walls {
        let [x, y] = c(w);
        init.push(atom("wall", &[&x, &y]));
    }
    for i in 0..size - 1 {
        init.push(atom("inc", &[&coord(i), &coord(i + 1)]));
    }
    let goal = goals
        .iter()
        .map(|&g| {
            let [x, y] = c(g);
            atom("box", &[&x, &y])
        })
        .collect();
    problem(name, "sokoban-grid", objects, init, goal)
}

pub(super) fn draw(name: &str, size: usize, boxes: usize, obstacles: usize, rng: &mut impl Rng) -> ProblemDef {
    let cell = |i: usize| (i % size, i / size);
    let picked = sample(rng, size * size, 1 + boxes + obstacles).into_vec();
    let robot = cell(picked[0]);
    let box_cells: Vec<Cell> = picked[1..=boxes].iter().map(|&i| cell(i)).collect();
    let walls: Vec<Cell> = picked[1 + boxes..].iter().map(|&i| cell(i)).collect();
    let free: Vec<usize> = (0..size * size).filter(|i| !picked[1 + boxes..].contains(i)).collect();
    let goals: Vec<Cell> = sample(rng, free.len(), boxes).into_iter().map(|k| cell(free[k])).collect();
    sokoban_problem(name, size, robot, &box_cells, &walls, &goals)
}
