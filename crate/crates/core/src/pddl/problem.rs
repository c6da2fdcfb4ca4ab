use std::collections::HashMap;

use super::domain::parse_typed_list;
use super::sexpr::{read_all, Pos, Sexpr};
use super::{DomainDef, GroundAtom, GroundLiteral, Metric, PddlError, ProblemDef, TypedName};

/// Parses a problem file and cross-checks it against `domain`.
pub fn parse_problem(text: &str, domain: &DomainDef) -> Result<ProblemDef, PddlError> {
    let exprs = read_all(text)?;
    let define = match exprs.as_slice() {
        [single] => single,
        [] => return Err(PddlError::syntax(Pos { line: 1, col: 1 }, "(define (problem ...) ...)")),
        [_, extra, ..] => return Err(PddlError::syntax(extra.pos(), "end of input after problem definition")),
    };
    let items = define.expect_list("(define ...)")?;
    if items.first().and_then(Sexpr::as_atom) != Some("define") {
        return Err(PddlError::syntax(define.pos(), "`define`"));
    }
    let header = items.get(1).ok_or_else(|| PddlError::syntax(define.pos(), "(problem <name>)"))?;
    let name = match header.as_list() {
        Some([kw, name]) if kw.as_atom() == Some("problem") => name.expect_atom("problem name")?.to_string(),
        _ => return Err(PddlError::syntax(header.pos(), "(problem <name>)")),
    };

    let mut problem = ProblemDef {
        name,
        domain_name: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        numeric_init: Vec::new(),
        goal: Vec::new(),
        metric: None,
    };
    // object name -> type, including domain constants
    let mut types: HashMap<String, String> =
        domain.constants.iter().map(|c| (c.name.clone(), c.ty.clone())).collect();
    let mut init_expr = None;
    let mut goal_expr = None;

    for section in &items[2..] {
        let list = section.expect_list("a problem section")?;
        let key = list
            .first()
            .and_then(Sexpr::as_atom)
            .ok_or_else(|| PddlError::syntax(section.pos(), "section keyword"))?;
        match key {
            ":domain" => {
                let name = list.get(1).ok_or_else(|| PddlError::syntax(section.pos(), "domain name"))?;
                problem.domain_name = name.expect_atom("domain name")?.to_string();
                if problem.domain_name != domain.name {
                    return Err(PddlError::DomainMismatch {
                        expected: domain.name.clone(),
                        found: problem.domain_name.clone(),
                    });
                }
            }
            ":requirements" => {}
            ":objects" => {
                for (name, ty, pos) in parse_typed_list(&list[1..])? {
                    if !domain.has_type(&ty) {
                        return Err(PddlError::UndeclaredType { name: ty, line: pos.line, col: pos.col });
                    }
                    if types.insert(name.clone(), ty.clone()).is_some() {
                        return Err(PddlError::Duplicate { name, line: pos.line, col: pos.col });
                    }
                    problem.objects.push(TypedName { name, ty });
                }
            }
            ":init" => init_expr = Some(list),
            ":goal" => goal_expr = Some(section),
            ":metric" => {
                let ok = matches!(list, [_, dir, target]
                    if dir.as_atom() == Some("minimize")
                        && target.head() == Some("total-cost")
                        && target.as_list().map(|l| l.len()) == Some(1));
                if !ok {
                    return Err(PddlError::unsupported("metric other than (minimize (total-cost))", section.pos()));
                }
                problem.metric = Some(Metric::MinimizeTotalCost);
            }
            other => return Err(PddlError::unsupported(other, section.pos())),
        }
    }

    let checker = AtomChecker { domain, types: &types };
    if let Some(list) = init_expr {
        for fact in &list[1..] {
            if fact.head() == Some("=") {
                let [_, lhs, value] = fact.expect_list("(= (<function> ...) <number>)")? else {
                    return Err(PddlError::syntax(fact.pos(), "(= (<function> ...) <number>)"));
                };
                let atom = checker.atom(lhs, true)?;
                let v = value
                    .expect_atom("number")?
                    .parse::<f64>()
                    .map_err(|_| PddlError::syntax(value.pos(), "number"))?;
                problem.numeric_init.push((atom, v));
            } else {
                let atom = checker.atom(fact, false)?;
                if !problem.init.contains(&atom) {
                    problem.init.push(atom);
                }
            }
        }
    }
    if let Some(section) = goal_expr {
        let list = section.expect_list("(:goal <formula>)")?;
        if let Some(formula) = list.get(1) {
            checker.goal(formula, &mut problem.goal)?;
        }
    }
    Ok(problem)
}

struct AtomChecker<'a> {
    domain: &'a DomainDef,
    types: &'a HashMap<String, String>,
}

impl AtomChecker<'_> {
    fn atom(&self, expr: &Sexpr, functions: bool) -> Result<GroundAtom, PddlError> {
        let pos = expr.pos();
        let list = expr.expect_list("ground atom")?;
        let (head, rest) = list.split_first().ok_or_else(|| PddlError::syntax(pos, "predicate name"))?;
        let name = head.expect_atom("predicate name")?;
        let decl = if functions { self.domain.function(name) } else { self.domain.predicate(name) };
        let decl = decl.ok_or_else(|| PddlError::UndeclaredPredicate {
            name: name.to_string(),
            line: pos.line,
            col: pos.col,
        })?;
        if decl.params.len() != rest.len() {
            return Err(PddlError::ArityMismatch {
                name: name.to_string(),
                expected: decl.params.len(),
                found: rest.len(),
                line: pos.line,
                col: pos.col,
            });
        }
        let mut args = Vec::with_capacity(rest.len());
        for (arg, param) in rest.iter().zip(&decl.params) {
            let obj = arg.expect_atom("object name")?;
            let p = arg.pos();
            let ty = self.types.get(obj).ok_or_else(|| PddlError::UndeclaredObject {
                name: obj.to_string(),
                line: p.line,
                col: p.col,
            })?;
            if !self.domain.is_subtype(ty, &param.ty) {
                return Err(PddlError::TypeMismatch {
                    name: name.to_string(),
                    arg: obj.to_string(),
                    expected: param.ty.clone(),
                    found: ty.clone(),
                    line: p.line,
                    col: p.col,
                });
            }
            args.push(obj.to_string());
        }
        Ok(GroundAtom { predicate: name.to_string(), args })
    }

    fn goal(&self, expr: &Sexpr, out: &mut Vec<GroundLiteral>) -> Result<(), PddlError> {
        let list = expr.expect_list("goal formula")?;
        let Some(head) = list.first() else { return Ok(()) };
        match head.as_atom() {
            Some("and") => {
                for sub in &list[1..] {
                    self.goal(sub, out)?;
                }
            }
            Some("not") => {
                let [_, inner] = list else {
                    return Err(PddlError::syntax(expr.pos(), "(not <atom>)"));
                };
                if let Some(op @ ("and" | "or" | "not" | "=" | "forall" | "exists")) = inner.head() {
                    return Err(PddlError::unsupported(&format!("not over {op}"), inner.pos()));
                }
                out.push(GroundLiteral { atom: self.atom(inner, false)?, positive: false });
            }
            Some(op @ ("or" | "imply" | "forall" | "exists" | "=" | "preference")) => {
                return Err(PddlError::unsupported(op, expr.pos()));
            }
            _ => out.push(GroundLiteral { atom: self.atom(expr, false)?, positive: true }),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::parse_domain;

    const DOMAIN: &str = "(define (domain d) (:requirements :typing) (:types box room)
        (:predicates (in ?b - box ?r - room) (open ?r - room)))";

    #[test]
    fn parses_objects_init_goal() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(
            "(define (problem p1) (:domain d) (:objects b1 b2 - box r1 r2 - room)
             (:init (in b1 r1) (in b2 r1) (open r2))
             (:goal (and (in b1 r2) (not (open r1)))))",
            &d,
        )
        .unwrap();
        assert_eq!(p.objects.len(), 4);
        assert_eq!(p.init.len(), 3);
        assert_eq!(p.goal.len(), 2);
        assert!(!p.goal[1].positive);
    }

    #[test]
    fn unknown_object_in_goal() {
        let d = parse_domain(DOMAIN).unwrap();
        let err = parse_problem(
            "(define (problem p) (:domain d) (:objects b - box r - room) (:init) (:goal (in b kitchen)))",
            &d,
        )
        .unwrap_err();
        assert!(matches!(err, PddlError::UndeclaredObject { ref name, .. } if name == "kitchen"));
    }

    #[test]
    fn unknown_predicate_and_wrong_domain() {
        let d = parse_domain(DOMAIN).unwrap();
        let err = parse_problem("(define (problem p) (:domain d) (:objects r - room) (:init (lit r)))", &d);
        assert!(matches!(err, Err(PddlError::UndeclaredPredicate { .. })));
        let err = parse_problem("(define (problem p) (:domain other))", &d);
        assert!(matches!(err, Err(PddlError::DomainMismatch { .. })));
    }

    #[test]
    fn empty_goal_is_vacuous() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem("(define (problem p) (:domain d) (:objects) (:init) (:goal (and)))", &d).unwrap();
        assert!(p.goal.is_empty());
    }
}
