use rand::seq::SliceRandom;
use rand::Rng;

use super::{atom, problem, typed};
use crate::pddl::{GroundAtom, ProblemDef};

/// `below[i]` is the block under block `i`, or `None` when it is on the table.
pub type BlockConfig = Vec<Option<usize>>;

fn name(i: usize) -> String {
    format!("b{}", i + 1)
}

fn config_atoms(config: &BlockConfig, with_clear: bool) -> Vec<GroundAtom> {
    let mut atoms = Vec::new();
    for (i, below) in config.iter().enumerate() {
        match below {
            Some(j) => atoms.push(atom("on", &[&name(i), &name(*j)])),
            None => atoms.push(atom("ontable", &[&name(i)])),
        }
    }
    if with_clear {
        for i in 0..config.len() {
            if !config.contains(&Some(i)) {
                atoms.push(atom("clear", &[&name(i)]));
            }
        }
    }
    atoms
}

/// Blocksworld instance going from `init` to the full tower layout `goal`.
pub fn blocksworld_problem(name_: &str, init: &BlockConfig, goal: &BlockConfig) -> ProblemDef {
    let objects = typed((0..init.len()).map(name), "block");
    let mut init_atoms = config_atoms(init, true);
    init_atoms.push(atom("handempty", &[]));
    problem(name_, "blocksworld", objects, init_atoms, config_atoms(goal, false))
}

fn random_config(blocks: usize, rng: &mut impl Rng) -> BlockConfig {
    let mut order: Vec<usize> = (0..blocks).collect();
    order.shuffle(rng);
    let mut config = vec![None; blocks];
    let mut top: Option<usize> = None;
    for b in order {
        if top.is_some() && rng.gen_bool(0.5) {
            config[b] = top;
        }
        top = Some(b);
    }
    config
}

pub(super) fn draw(name: &str, blocks: usize, rng: &mut impl Rng) -> ProblemDef {
    let init = random_config(blocks, rng);
    let goal = random_config(blocks, rng);
    blocksworld_problem(name, &init, &goal)
}
