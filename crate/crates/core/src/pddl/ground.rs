use std::collections::HashMap;

use super::{CostExpr, DomainDef, GroundAtom, Literal, PddlError, ProblemDef, Term};
use crate::task::{ActionSpec, AtomId, Fluent, GroundTask};

/// Default cap on the number of ground atoms and ground actions.
pub const DEFAULT_GROUND_LIMIT: usize = 100_000;

pub fn ground(domain: &DomainDef, problem: &ProblemDef) -> Result<GroundTask, PddlError> {
    ground_with_limit(domain, problem, DEFAULT_GROUND_LIMIT)
}

struct Universe<'a> {
    domain: &'a DomainDef,
    objects: Vec<(&'a str, &'a str)>,
    by_type: HashMap<&'a str, Vec<&'a str>>,
}

impl<'a> Universe<'a> {
    fn new(domain: &'a DomainDef, problem: &'a ProblemDef) -> Self {
        let objects = domain
            .constants
            .iter()
            .chain(&problem.objects)
            .map(|o| (o.name.as_str(), o.ty.as_str()))
            .collect();
        Universe { domain, objects, by_type: HashMap::new() }
    }

    /// Objects of type `ty` (including subtypes), sorted by name.
    fn of_type(&mut self, ty: &'a str) -> &[&'a str] {
        let domain = self.domain;
        let objects = &self.objects;
        self.by_type.entry(ty).or_insert_with(|| {
            let mut v: Vec<&str> =
                objects.iter().filter(|(_, t)| domain.is_subtype(t, ty)).map(|(n, _)| *n).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
    }
}

fn checked_count(sizes: &[usize], what: &'static str, limit: usize) -> Result<u128, PddlError> {
    let count = sizes.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128));
    if count > limit as u128 {
        return Err(PddlError::CapacityExceeded { what, count, limit });
    }
    Ok(count)
}

/// Calls `f` on every assignment of the cartesian product, in lexicographic order.
fn for_each_assignment<'a>(domains: &[Vec<&'a str>], mut f: impl FnMut(&[&'a str]) -> Result<(), PddlError>) -> Result<(), PddlError> {
    if domains.iter().any(|d| d.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; domains.len()];
    let mut current: Vec<&str> = domains.iter().map(|d| d[0]).collect();
    loop {
        f(&current)?;
        let mut pos = domains.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < domains[pos].len() {
                current[pos] = domains[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            current[pos] = domains[pos][0];
        }
    }
}

/// Instantiates every type-consistent grounding of the domain's predicates and
/// action schemas. No reachability pruning is done, so all problems over the
/// same objects share atom and action layouts.
pub fn ground_with_limit(domain: &DomainDef, problem: &ProblemDef, limit: usize) -> Result<GroundTask, PddlError> {
    let mut universe = Universe::new(domain, problem);

    let mut predicates: Vec<_> = domain.predicates.iter().collect();
    predicates.sort_by(|a, b| a.name.cmp(&b.name));
    let mut total_atoms = 0u128;
    let mut atoms = Vec::new();
    for pred in predicates {
        let domains: Vec<Vec<&str>> = pred.params.iter().map(|p| universe.of_type(&p.ty).to_vec()).collect();
        let sizes: Vec<usize> = domains.iter().map(Vec::len).collect();
        total_atoms += checked_count(&sizes, "ground atoms", limit)?;
        if total_atoms > limit as u128 {
            return Err(PddlError::CapacityExceeded { what: "ground atoms", count: total_atoms, limit });
        }
        for_each_assignment(&domains, |args| {
            atoms.push(GroundAtom { predicate: pred.name.clone(), args: args.iter().map(|s| s.to_string()).collect() });
            Ok(())
        })?;
    }
    atoms.sort();
    let index: HashMap<&GroundAtom, AtomId> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let numeric: HashMap<&GroundAtom, f64> = problem.numeric_init.iter().map(|(a, v)| (a, *v)).collect();

    let mut actions = Vec::new();
    let mut total_actions = 0u128;
    for schema in &domain.actions {
        let domains: Vec<Vec<&str>> = schema.params.iter().map(|p| universe.of_type(&p.ty).to_vec()).collect();
        let sizes: Vec<usize> = domains.iter().map(Vec::len).collect();
        total_actions += checked_count(&sizes, "ground actions", limit)?;
        if total_actions > limit as u128 {
            return Err(PddlError::CapacityExceeded { what: "ground actions", count: total_actions, limit });
        }
        let var_pos: HashMap<&str, usize> =
            schema.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        for_each_assignment(&domains, |args| {
            let resolve = |t: &Term| -> String {
                match t {
                    Term::Var(v) => args[var_pos[v.as_str()]].to_string(),
                    Term::Const(c) => c.clone(),
                }
            };
            let instantiate = |a: &super::AtomExpr| GroundAtom {
                predicate: a.predicate.clone(),
                args: a.args.iter().map(resolve).collect(),
            };
            let id = |a: &super::AtomExpr| -> AtomId {
                let g = instantiate(a);
                *index.get(&g).unwrap_or_else(|| panic!("type-checked atom {g} missing from the atom table"))
            };
            let mut spec = ActionSpec {
                name: format!("({}{})", schema.name, args.iter().map(|a| format!(" {a}")).collect::<String>()),
                pre_pos: Vec::new(),
                pre_neg: Vec::new(),
                add: schema.add.iter().map(id).collect(),
                del: schema.del.iter().map(id).collect(),
                cost: 1.0,
            };
            for lit in &schema.precondition {
                match lit {
                    Literal::Pos(a) => spec.pre_pos.push(id(a)),
                    Literal::Neg(a) => spec.pre_neg.push(id(a)),
                    // equality is static: violating instantiations can never fire
                    Literal::Eq(x, y) => {
                        if resolve(x) != resolve(y) {
                            return Ok(());
                        }
                    }
                    Literal::NotEq(x, y) => {
                        if resolve(x) == resolve(y) {
                            return Ok(());
                        }
                    }
                }
            }
            spec.cost = match &schema.cost {
                None => 1.0,
                Some(CostExpr::Const(c)) => *c,
                Some(CostExpr::Fluent(f)) => {
                    let g = instantiate(f);
                    *numeric.get(&g).ok_or_else(|| PddlError::MissingFluent(g.to_string()))?
                }
            };
            actions.push(spec);
            Ok(())
        })?;
    }

    let mut fluents: Vec<(GroundAtom, f64)> = problem
        .numeric_init
        .iter()
        .filter(|(a, _)| a.predicate != "total-cost")
        .cloned()
        .collect();
    fluents.sort_by(|a, b| a.0.cmp(&b.0));
    let mut bounds: HashMap<&str, (f64, f64)> = HashMap::new();
    for (a, v) in &fluents {
        let b = bounds.entry(a.predicate.as_str()).or_insert((*v, *v));
        b.0 = b.0.min(*v);
        b.1 = b.1.max(*v);
    }
    let fluents = fluents
        .iter()
        .map(|(a, v)| {
            let (lower, upper) = bounds[a.predicate.as_str()];
            Fluent { atom: a.clone(), value: *v, lower, upper }
        })
        .collect();

    let lookup = |a: &GroundAtom| -> AtomId {
        *index.get(a).unwrap_or_else(|| panic!("validated atom {a} missing from the atom table"))
    };
    let init: Vec<AtomId> = problem.init.iter().map(lookup).collect();
    let goal_pos = problem.goal.iter().filter(|l| l.positive).map(|l| lookup(&l.atom)).collect();
    let goal_neg = problem.goal.iter().filter(|l| !l.positive).map(|l| lookup(&l.atom)).collect();

    GroundTask::from_parts(&problem.name, &domain.name, atoms, actions, init, goal_pos, goal_neg, fluents)
        .map_err(|e| PddlError::InvalidTask(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    #[test]
    fn domain_without_schemas_has_no_actions() {
        let d = parse_domain("(define (domain d) (:predicates (p ?x)))").unwrap();
        let p = parse_problem("(define (problem q) (:domain d) (:objects a b) (:init (p a)) (:goal (p b)))", &d).unwrap();
        let t = ground(&d, &p).unwrap();
        assert_eq!(t.num_actions(), 0);
        assert_eq!(t.num_atoms(), 2);
    }

    #[test]
    fn capacity_limit_is_enforced() {
        let d = parse_domain("(define (domain d) (:predicates (p ?x ?y ?z)))").unwrap();
        let p = parse_problem("(define (problem q) (:domain d) (:objects a b c d e) (:init) (:goal (and)))", &d).unwrap();
        assert!(matches!(ground_with_limit(&d, &p, 100), Err(PddlError::CapacityExceeded { count: 125, .. })));
        assert!(ground_with_limit(&d, &p, 125).is_ok());
    }

    #[test]
    fn inequality_drops_reflexive_instances_and_costs_resolve() {
        let d = parse_domain(
            "(define (domain d) (:requirements :typing :equality :action-costs) (:types loc)
              (:predicates (at ?l - loc))
              (:functions (total-cost) - number (len ?a ?b - loc) - number)
              (:action go :parameters (?a ?b - loc) :precondition (and (at ?a) (not (= ?a ?b)))
                 :effect (and (at ?b) (not (at ?a)) (increase (total-cost) (len ?a ?b)))))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem q) (:domain d) (:objects x y - loc)
              (:init (at x) (= (len x y) 3) (= (len y x) 4) (= (total-cost) 0))
              (:goal (at y)) (:metric minimize (total-cost)))",
            &d,
        )
        .unwrap();
        let t = ground(&d, &p).unwrap();
        assert_eq!(t.num_actions(), 2);
        assert_eq!(t.action(0).name, "(go x y)");
        assert_eq!(t.action(0).cost, 3.0);
        assert_eq!(t.action(1).cost, 4.0);
        assert!(t.fluents().len() == 2);
    }

    #[test]
    fn missing_cost_fluent_is_reported() {
        let d = parse_domain(
            "(define (domain d) (:requirements :action-costs) (:predicates (p))
              (:functions (total-cost) (c))
              (:action a :parameters () :precondition () :effect (and (p) (increase (total-cost) (c)))))",
        )
        .unwrap();
        let p = parse_problem("(define (problem q) (:domain d) (:init) (:goal (p)))", &d).unwrap();
        assert!(matches!(ground(&d, &p), Err(PddlError::MissingFluent(_))));
    }
}
