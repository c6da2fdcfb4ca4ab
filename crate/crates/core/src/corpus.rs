//! Bundled benchmark problems: five per domain, drawn from the standard templates.

use crate::generators::domain_pddl;
use crate::pddl::{ground, parse_domain, parse_problem, PddlError};
use crate::task::GroundTask;

pub struct CorpusEntry {
    pub domain: &'static str,
    pub name: &'static str,
    pub problem_pddl: &'static str,
}

impl CorpusEntry {
    pub fn domain_pddl(&self) -> &'static str {
        domain_pddl(self.domain).expect("corpus domains are bundled")
    }

    pub fn ground(&self) -> Result<GroundTask, PddlError> {
        let domain = parse_domain(self.domain_pddl())?;
        let problem = parse_problem(self.problem_pddl, &domain)?;
        ground(&domain, &problem)
    }
}

macro_rules! entries {
    ($($d:literal / $p:literal),* $(,)?) => {
        &[$(CorpusEntry {
            domain: $d,
            name: $p,
            problem_pddl: include_str!(concat!("../data/", $d, "/", $p, ".pddl")),
        }),*]
    };
}

pub const CORPUS: &[CorpusEntry] = entries![
    "gripper" / "p01", "gripper" / "p02", "gripper" / "p03", "gripper" / "p04", "gripper" / "p05",
    "blocksworld" / "p01", "blocksworld" / "p02", "blocksworld" / "p03", "blocksworld" / "p04", "blocksworld" / "p05",
    "ferry" / "p01", "ferry" / "p02", "ferry" / "p03", "ferry" / "p04", "ferry" / "p05",
    "sokoban" / "p01", "sokoban" / "p02", "sokoban" / "p03", "sokoban" / "p04", "sokoban" / "p05",
];
