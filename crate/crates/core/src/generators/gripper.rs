use rand::Rng;

use super::{atom, problem, typed};
use crate::pddl::ProblemDef;

fn room_name(i: usize) -> String {
    format!("room{}", (b'a' + i as u8) as char)
}

/// Gripper instance: `ball_rooms[i]` is the room of ball `i`; goal is every
/// ball in `target`.
pub fn gripper_problem(name: &str, rooms: usize, robot: usize, ball_rooms: &[usize], target: usize) -> ProblemDef {
    let room_names: Vec<String> = (0..rooms).map(room_name).collect();
    let ball_names: Vec<String> = (1..=ball_rooms.len()).map(|i| format!("ball{i}")).collect();
    let mut objects = typed(room_names.clone(), "room");
    objects.extend(typed(ball_names.clone(), "ball"));
    objects.extend(typed(["left".to_string(), "right".to_string()], "gripper"));
    let mut init = vec![atom("at-robby", &[&room_names[robot]]), atom("free", &["left"]), atom("free", &["right"])];
    init.extend(ball_rooms.iter().zip(&ball_names).map(|(&r, b)| atom("at", &[b, &room_names[r]])));
    let goal = ball_names.iter().map(|b| atom("at", &[b, &room_names[target]])).collect();
    problem(name, "gripper-strips", objects, init, goal)
}

pub(super) fn draw(name: &str, rooms: usize, balls: usize, rng: &mut impl Rng) -> ProblemDef {
    let robot = rng.gen_range(0..rooms);
    let ball_rooms: Vec<usize> = (0..balls).map(|_| rng.gen_range(0..rooms)).collect();
    let target = rng.gen_range(0..rooms);
    gripper_problem(name, rooms, robot, &ball_rooms, target)
}
