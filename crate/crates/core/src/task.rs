//! Grounded propositional tasks and their transition semantics.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::GroundAtom;

pub type AtomId = usize;
pub type ActionId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("action {action} ({name}) is not applicable")]
    InapplicableAction { action: ActionId, name: String },
    #[error("invalid task: {0}")]
    Invalid(String),
}

/// Truth assignment over the atoms of one task, stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    words: Vec<u64>,
    width: usize,
}

impl State {
    pub fn empty(width: usize) -> Self {
        State { words: vec![0; width.div_ceil(64)], width }
    }

    pub fn from_atoms(width: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = State::empty(width);
        for a in atoms {
            s.set(a, true);
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, atom: AtomId) -> bool {
        self.words[atom / 64] >> (atom % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, atom: AtomId, value: bool) {
        assert!(atom < self.width, "atom {atom} out of range for width {}", self.width);
        let bit = 1u64 << (atom % 64);
        if value {
            self.words[atom / 64] |= bit;
        } else {
            self.words[atom / 64] &= !bit;
        }
    }

    /// Ids of true atoms in ascending order.
    pub fn true_atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }

    pub fn count_true(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    fn covers(&self, mask: &State) -> bool {
        self.words.iter().zip(&mask.words).all(|(s, m)| s & m == *m)
    }

    #[inline]
    fn disjoint(&self, mask: &State) -> bool {
        self.words.iter().zip(&mask.words).all(|(s, m)| s & m == 0)
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.true_atoms()).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundAction {
    pub name: String,
    pub pre_pos: Vec<AtomId>,
    pub pre_neg: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
    pub cost: f64,
    pre_pos_mask: State,
    pre_neg_mask: State,
    add_mask: State,
    del_mask: State,
}

/// Action description used to assemble a [`GroundTask`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub name: String,
    pub pre_pos: Vec<AtomId>,
    pub pre_neg: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
    pub cost: f64,
}

/// A numeric fluent read into the state encoding; never changed by actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fluent {
    pub atom: GroundAtom,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct GroundTask {
    name: String,
    domain_name: String,
    atoms: Vec<GroundAtom>,
    atom_index: HashMap<GroundAtom, AtomId>,
    actions: Vec<GroundAction>,
    init: State,
    goal_pos: Vec<AtomId>,
    goal_neg: Vec<AtomId>,
    goal_pos_mask: State,
    goal_neg_mask: State,
    fluents: Vec<Fluent>,
}

impl PartialEq for GroundTask {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.domain_name == other.domain_name
            && self.atoms == other.atoms
            && self.actions == other.actions
            && self.init == other.init
            && self.goal_pos == other.goal_pos
            && self.goal_neg == other.goal_neg
            && self.fluents == other.fluents
    }
}

fn normalize(ids: &mut Vec<AtomId>) {
    ids.sort_unstable();
    ids.dedup();
}

impl GroundTask {
    /// Assembles a task, checking id ranges. Atoms both added and deleted by an
    /// action are dropped from its delete list (add wins).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: impl Into<String>,
        domain_name: impl Into<String>,
        atoms: Vec<GroundAtom>,
        actions: Vec<ActionSpec>,
        init: impl IntoIterator<Item = AtomId>,
        goal_pos: Vec<AtomId>,
        goal_neg: Vec<AtomId>,
        fluents: Vec<Fluent>,
    ) -> Result<Self, TaskError> {
        let width = atoms.len();
        let check = |ids: &[AtomId], what: &str| -> Result<(), TaskError> {
            match ids.iter().find(|&&i| i >= width) {
                Some(i) => Err(TaskError::Invalid(format!("{what} refers to atom {i} but there are {width} atoms"))),
                None => Ok(()),
            }
        };
        let mut atom_index = HashMap::with_capacity(width);
        for (i, a) in atoms.iter().enumerate() {
            if atom_index.insert(a.clone(), i).is_some() {
                return Err(TaskError::Invalid(format!("duplicate atom {a}")));
            }
        }
        let mut ground_actions = Vec::with_capacity(actions.len());
        for mut spec in actions {
            for ids in [&mut spec.pre_pos, &mut spec.pre_neg, &mut spec.add, &mut spec.del] {
                normalize(ids);
            }
            check(&spec.pre_pos, &spec.name)?;
            check(&spec.pre_neg, &spec.name)?;
            check(&spec.add, &spec.name)?;
            check(&spec.del, &spec.name)?;
            if !(spec.cost.is_finite() && spec.cost >= 0.0) {
                return Err(TaskError::Invalid(format!("action {} has cost {}", spec.name, spec.cost)));
            }
            spec.del.retain(|d| spec.add.binary_search(d).is_err());
            ground_actions.push(GroundAction {
                pre_pos_mask: State::from_atoms(width, spec.pre_pos.iter().copied()),
                pre_neg_mask: State::from_atoms(width, spec.pre_neg.iter().copied()),
                add_mask: State::from_atoms(width, spec.add.iter().copied()),
                del_mask: State::from_atoms(width, spec.del.iter().copied()),
                name: spec.name,
                pre_pos: spec.pre_pos,
                pre_neg: spec.pre_neg,
                add: spec.add,
                del: spec.del,
                cost: spec.cost,
            });
        }
        let init: Vec<AtomId> = init.into_iter().collect();
        check(&init, "init")?;
        let (mut goal_pos, mut goal_neg) = (goal_pos, goal_neg);
        normalize(&mut goal_pos);
        normalize(&mut goal_neg);
        check(&goal_pos, "goal")?;
        check(&goal_neg, "goal")?;
        Ok(GroundTask {
            name: name.into(),
            domain_name: domain_name.into(),
            init: State::from_atoms(width, init),
            goal_pos_mask: State::from_atoms(width, goal_pos.iter().copied()),
            goal_neg_mask: State::from_atoms(width, goal_neg.iter().copied()),
            atom_index,
            atoms,
            actions: ground_actions,
            goal_pos,
            goal_neg,
            fluents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_name(&self) -> &str {
        &self.domain_name
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom_id(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, a: ActionId) -> &GroundAction {
        &self.actions[a]
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal_pos(&self) -> &[AtomId] {
        &self.goal_pos
    }

    pub fn goal_neg(&self) -> &[AtomId] {
        &self.goal_neg
    }

    pub fn fluents(&self) -> &[Fluent] {
        &self.fluents
    }

    pub fn is_unit_cost(&self) -> bool {
        self.actions.iter().all(|a| a.cost == 1.0)
    }

    #[inline]
    pub fn is_applicable(&self, s: &State, a: ActionId) -> bool {
        let act = &self.actions[a];
        s.covers(&act.pre_pos_mask) && s.disjoint(&act.pre_neg_mask)
    }

    /// Applicable action ids in ascending order.
    pub fn applicable(&self, s: &State) -> Vec<ActionId> {
        let mut out = Vec::new();
        self.applicable_into(s, &mut out);
        out
    }

    pub fn applicable_into(&self, s: &State, out: &mut Vec<ActionId>) {
        out.clear();
        out.extend((0..self.actions.len()).filter(|&a| self.is_applicable(s, a)));
    }

    /// Successor without the applicability check.
    pub fn successor(&self, s: &State, a: ActionId) -> State {
        let act = &self.actions[a];
        let mut next = s.clone();
        for ((w, d), ad) in next.words.iter_mut().zip(&act.del_mask.words).zip(&act.add_mask.words) {
            *w = (*w & !d) | ad;
        }
        next
    }

    pub fn apply(&self, s: &State, a: ActionId) -> Result<(State, f64), TaskError> {
        if a >= self.actions.len() || !self.is_applicable(s, a) {
            return Err(TaskError::InapplicableAction {
                action: a,
                name: self.actions.get(a).map(|x| x.name.clone()).unwrap_or_default(),
            });
        }
        Ok((self.successor(s, a), self.actions[a].cost))
    }

    pub fn is_goal(&self, s: &State) -> bool {
        s.covers(&self.goal_pos_mask) && s.disjoint(&self.goal_neg_mask)
    }

    /// Number of goal literals not satisfied in `s`.
    pub fn unsatisfied_goals(&self, s: &State) -> usize {
        self.goal_pos.iter().filter(|&&g| !s.get(g)).count() + self.goal_neg.iter().filter(|&&g| s.get(g)).count()
    }

    pub fn dump(&self) -> TaskDump {
        TaskDump {
            name: self.name.clone(),
            domain: self.domain_name.clone(),
            atoms: self.atoms.iter().map(ToString::to_string).collect(),
            actions: self
                .actions
                .iter()
                .map(|a| ActionDump {
                    name: a.name.clone(),
                    pre_pos: a.pre_pos.clone(),
                    pre_neg: a.pre_neg.clone(),
                    add: a.add.clone(),
                    del: a.del.clone(),
                    cost: a.cost,
                })
                .collect(),
            init: self.init.true_atoms().collect(),
            goal: self.goal_pos.clone(),
            goal_neg: self.goal_neg.clone(),
            fluents: self.fluents.clone(),
        }
    }

    /// Canonical JSON form; identical inputs yield byte-identical output.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.dump()).expect("task dump serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDump {
    pub name: String,
    pub pre_pos: Vec<AtomId>,
    pub pre_neg: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDump {
    pub name: String,
    pub domain: String,
    pub atoms: Vec<String>,
    pub actions: Vec<ActionDump>,
    pub init: Vec<AtomId>,
    pub goal: Vec<AtomId>,
    pub goal_neg: Vec<AtomId>,
    pub fluents: Vec<Fluent>,
}
