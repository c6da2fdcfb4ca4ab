use std::collections::{HashMap, HashSet};

use super::sexpr::{read_all, Pos, Sexpr};
use super::{
    ActionSchema, AtomExpr, CostExpr, DomainDef, Literal, PddlError, PredicateDef, Term, TypedName, ROOT_TYPE,
};

const SUPPORTED_REQUIREMENTS: &[&str] =
    &[":strips", ":typing", ":negative-preconditions", ":action-costs", ":equality"];

/// Parses a domain file.
pub fn parse_domain(text: &str) -> Result<DomainDef, PddlError> {
    let exprs = read_all(text)?;
    let define = match exprs.as_slice() {
        [single] => single,
        [] => return Err(PddlError::syntax(Pos { line: 1, col: 1 }, "(define (domain ...) ...)")),
        [_, extra, ..] => return Err(PddlError::syntax(extra.pos(), "end of input after domain definition")),
    };
    let items = define.expect_list("(define ...)")?;
    if items.first().and_then(Sexpr::as_atom) != Some("define") {
        return Err(PddlError::syntax(define.pos(), "`define`"));
    }
    let header = items.get(1).ok_or_else(|| PddlError::syntax(define.pos(), "(domain <name>)"))?;
    let name = match header.as_list() {
        Some([kw, name]) if kw.as_atom() == Some("domain") => name.expect_atom("domain name")?.to_string(),
        _ => return Err(PddlError::syntax(header.pos(), "(domain <name>)")),
    };

    let mut domain = DomainDef {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        functions: Vec::new(),
        actions: Vec::new(),
    };
    let mut pending_actions = Vec::new();

    for section in &items[2..] {
        let list = section.expect_list("a domain section")?;
        let key = list
            .first()
            .and_then(Sexpr::as_atom)
            .ok_or_else(|| PddlError::syntax(section.pos(), "section keyword"))?;
        match key {
            ":requirements" => {
                for r in &list[1..] {
                    let req = r.expect_atom("requirement flag")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&req) {
                        return Err(PddlError::unsupported(req, r.pos()));
                    }
                    domain.requirements.push(req.to_string());
                }
            }
            ":types" => {
                for (ty, parent, pos) in parse_typed_list(&list[1..])? {
                    if ty == ROOT_TYPE {
                        continue;
                    }
                    if domain.types.iter().any(|(t, _)| *t == ty) {
                        return Err(PddlError::Duplicate { name: ty, line: pos.line, col: pos.col });
                    }
                    domain.types.push((ty, parent));
                }
            }
            ":constants" => {
                for (name, ty, pos) in parse_typed_list(&list[1..])? {
                    if domain.constants.iter().any(|c| c.name == name) {
                        return Err(PddlError::Duplicate { name, line: pos.line, col: pos.col });
                    }
                    domain.constants.push(TypedName { name, ty });
                }
            }
            ":predicates" => {
                for p in &list[1..] {
                    let def = parse_signature(p)?;
                    if domain.predicates.iter().any(|q| q.name == def.name) {
                        return Err(PddlError::Duplicate { name: def.name, line: p.pos().line, col: p.pos().col });
                    }
                    domain.predicates.push(def);
                }
            }
            ":functions" => {
                let mut rest = &list[1..];
                while let Some((p, tail)) = rest.split_first() {
                    rest = tail;
                    if p.as_atom() == Some("-") {
                        match rest.split_first() {
                            Some((t, tail)) if t.as_atom() == Some("number") => rest = tail,
                            Some((t, _)) => return Err(PddlError::unsupported("non-numeric function type", t.pos())),
                            None => return Err(PddlError::syntax(p.pos(), "function type after '-'")),
                        }
                        continue;
                    }
                    let def = parse_signature(p)?;
                    if domain.functions.iter().any(|q| q.name == def.name) {
                        return Err(PddlError::Duplicate { name: def.name, line: p.pos().line, col: p.pos().col });
                    }
                    domain.functions.push(def);
                }
            }
            ":action" => pending_actions.push(section),
            other => return Err(PddlError::unsupported(other, section.pos())),
        }
    }

    validate_types(&domain, define.pos())?;
    for action in pending_actions {
        let schema = parse_action(&domain, action)?;
        if domain.actions.iter().any(|a| a.name == schema.name) {
            let pos = action.pos();
            return Err(PddlError::Duplicate { name: schema.name, line: pos.line, col: pos.col });
        }
        domain.actions.push(schema);
    }
    Ok(domain)
}

/// Parses `a b - t c - u d` into `[(a,t),(b,t),(c,u),(d,object)]`.
pub(crate) fn parse_typed_list(items: &[Sexpr]) -> Result<Vec<(String, String, Pos)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        if item.as_atom() == Some("-") {
            let ty_expr = items.get(i + 1).ok_or_else(|| PddlError::syntax(item.pos(), "type name after '-'"))?;
            if ty_expr.head() == Some("either") {
                return Err(PddlError::unsupported("either", ty_expr.pos()));
            }
            let ty = ty_expr.expect_atom("type name")?;
            out.extend(pending.drain(..).map(|(n, p)| (n, ty.to_string(), p)));
            i += 2;
        } else {
            pending.push((item.expect_atom("name")?.to_string(), item.pos()));
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|(n, p)| (n, ROOT_TYPE.to_string(), p)));
    Ok(out)
}

fn parse_signature(expr: &Sexpr) -> Result<PredicateDef, PddlError> {
    let list = expr.expect_list("(<name> <parameters>)")?;
    let (head, rest) = list.split_first().ok_or_else(|| PddlError::syntax(expr.pos(), "predicate name"))?;
    let name = head.expect_atom("predicate name")?.to_string();
    let params = parse_typed_list(rest)?
        .into_iter()
        .map(|(name, ty, _)| TypedName { name, ty })
        .collect();
    Ok(PredicateDef { name, params })
}

fn validate_types(domain: &DomainDef, pos: Pos) -> Result<(), PddlError> {
    let check = |ty: &str| {
        if domain.has_type(ty) {
            Ok(())
        } else {
            Err(PddlError::UndeclaredType { name: ty.to_string(), line: pos.line, col: pos.col })
        }
    };
    for (_, parent) in &domain.types {
        check(parent)?;
    }
    for (ty, _) in &domain.types {
        let mut seen = HashSet::new();
        let mut cur = ty.as_str();
        while let Some(p) = domain.parent_type(cur) {
            if !seen.insert(cur) {
                return Err(PddlError::unsupported("cyclic type hierarchy", pos));
            }
            cur = p;
        }
    }
    for c in &domain.constants {
        check(&c.ty)?;
    }
    for p in domain.predicates.iter().chain(&domain.functions) {
        for param in &p.params {
            check(&param.ty)?;
        }
    }
    Ok(())
}

struct SchemaScope<'a> {
    domain: &'a DomainDef,
    vars: HashMap<String, String>,
}

impl SchemaScope<'_> {
    fn term(&self, expr: &Sexpr) -> Result<(Term, String), PddlError> {
        let name = expr.expect_atom("term")?;
        let pos = expr.pos();
        if name.starts_with('?') {
            let ty = self.vars.get(name).ok_or_else(|| PddlError::UndeclaredVariable {
                name: name.to_string(),
                line: pos.line,
                col: pos.col,
            })?;
            Ok((Term::Var(name.to_string()), ty.clone()))
        } else {
            let c = self.domain.constants.iter().find(|c| c.name == name).ok_or_else(|| {
                PddlError::UndeclaredObject { name: name.to_string(), line: pos.line, col: pos.col }
            })?;
            Ok((Term::Const(name.to_string()), c.ty.clone()))
        }
    }

    fn atom(&self, expr: &Sexpr, functions: bool) -> Result<AtomExpr, PddlError> {
        let list = expr.expect_list("atomic formula")?;
        let pos = expr.pos();
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
            let (term, ty) = self.term(arg)?;
            if !self.domain.is_subtype(&ty, &param.ty) {
                let p = arg.pos();
                return Err(PddlError::TypeMismatch {
                    name: name.to_string(),
                    arg: term.name().to_string(),
                    expected: param.ty.clone(),
                    found: ty,
                    line: p.line,
                    col: p.col,
                });
            }
            args.push(term);
        }
        Ok(AtomExpr { predicate: name.to_string(), args })
    }

    fn condition(&self, expr: &Sexpr, out: &mut Vec<Literal>) -> Result<(), PddlError> {
        let list = expr.expect_list("precondition formula")?;
        let Some(head) = list.first() else { return Ok(()) };
        match head.as_atom() {
            Some("and") => {
                for sub in &list[1..] {
                    self.condition(sub, out)?;
                }
            }
            Some("not") => {
                let [_, inner] = list else {
                    return Err(PddlError::syntax(expr.pos(), "(not <atom>)"));
                };
                match inner.head() {
                    Some("=") => {
                        let (a, b) = self.equality(inner)?;
                        out.push(Literal::NotEq(a, b));
                    }
                    Some(op @ ("and" | "or" | "not" | "imply" | "forall" | "exists")) => {
                        return Err(PddlError::unsupported(&format!("not over {op}"), inner.pos()));
                    }
                    _ => out.push(Literal::Neg(self.atom(inner, false)?)),
                }
            }
            Some("=") => {
                let (a, b) = self.equality(expr)?;
                out.push(Literal::Eq(a, b));
            }
            Some(op @ ("or" | "imply" | "forall" | "exists" | "when" | "<" | ">" | "<=" | ">=")) => {
                return Err(PddlError::unsupported(op, expr.pos()));
            }
            _ => out.push(Literal::Pos(self.atom(expr, false)?)),
        }
        Ok(())
    }

    fn equality(&self, expr: &Sexpr) -> Result<(Term, Term), PddlError> {
        match expr.as_list() {
            Some([_, a, b]) => Ok((self.term(a)?.0, self.term(b)?.0)),
            _ => Err(PddlError::syntax(expr.pos(), "(= <term> <term>)")),
        }
    }

    fn effect(&self, expr: &Sexpr, schema: &mut ActionSchema) -> Result<(), PddlError> {
        let list = expr.expect_list("effect formula")?;
        let Some(head) = list.first() else { return Ok(()) };
        match head.as_atom() {
            Some("and") => {
                for sub in &list[1..] {
                    self.effect(sub, schema)?;
                }
            }
            Some("not") => {
                let [_, inner] = list else {
                    return Err(PddlError::syntax(expr.pos(), "(not <atom>)"));
                };
                schema.del.push(self.atom(inner, false)?);
            }
            Some("increase") => {
                let [_, target, amount] = list else {
                    return Err(PddlError::syntax(expr.pos(), "(increase (total-cost) <amount>)"));
                };
                if target.as_list().map(|l| l.len()) != Some(1) || target.head() != Some("total-cost") {
                    return Err(PddlError::unsupported("numeric effect on a fluent other than total-cost", target.pos()));
                }
                if schema.cost.is_some() {
                    return Err(PddlError::unsupported("multiple cost effects", expr.pos()));
                }
                schema.cost = Some(match amount {
                    Sexpr::Atom(s, pos) => CostExpr::Const(
                        s.parse::<f64>()
                            .ok()
                            .filter(|c| c.is_finite() && *c >= 0.0)
                            .ok_or_else(|| PddlError::syntax(*pos, "nonnegative number"))?,
                    ),
                    Sexpr::List(..) => CostExpr::Fluent(self.atom(amount, true)?),
                });
            }
            Some(op @ ("when" | "forall" | "decrease" | "assign" | "scale-up" | "scale-down" | "or")) => {
                return Err(PddlError::unsupported(op, expr.pos()));
            }
            _ => schema.add.push(self.atom(expr, false)?),
        }
        Ok(())
    }
}

fn parse_action(domain: &DomainDef, expr: &Sexpr) -> Result<ActionSchema, PddlError> {
    let list = expr.expect_list("(:action ...)")?;
    let name = list
        .get(1)
        .ok_or_else(|| PddlError::syntax(expr.pos(), "action name"))?
        .expect_atom("action name")?
        .to_string();
    let mut schema =
        ActionSchema { name, params: Vec::new(), precondition: Vec::new(), add: Vec::new(), del: Vec::new(), cost: None };
    let mut scope = SchemaScope { domain, vars: HashMap::new() };

    let mut i = 2;
    let mut precondition = None;
    let mut effect = None;
    while i < list.len() {
        let key = list[i].expect_atom("action keyword")?;
        let value = list.get(i + 1).ok_or_else(|| PddlError::syntax(list[i].pos(), "value after keyword"))?;
        match key {
            ":parameters" => {
                for (var, ty, pos) in parse_typed_list(value.expect_list("parameter list")?)? {
                    if !var.starts_with('?') {
                        return Err(PddlError::syntax(pos, "variable starting with '?'"));
                    }
                    if !domain.has_type(&ty) {
                        return Err(PddlError::UndeclaredType { name: ty, line: pos.line, col: pos.col });
                    }
                    if scope.vars.insert(var.clone(), ty.clone()).is_some() {
                        return Err(PddlError::Duplicate { name: var, line: pos.line, col: pos.col });
                    }
                    schema.params.push(TypedName { name: var, ty });
                }
            }
            ":precondition" => precondition = Some(value),
            ":effect" => effect = Some(value),
            other => return Err(PddlError::unsupported(other, list[i].pos())),
        }
        i += 2;
    }
    if let Some(p) = precondition {
        scope.condition(p, &mut schema.precondition)?;
    }
    if let Some(e) = effect {
        scope.effect(e, &mut schema)?;
    }
    scope.vars.clear();
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "(define (domain tiny) (:requirements :strips)
        (:predicates (p) (q ?x))
        (:action go :parameters (?x) :precondition (p) :effect (and (q ?x) (not (p)))))";

    #[test]
    fn minimal_domain_counts() {
        let d = parse_domain(MINIMAL).unwrap();
        assert_eq!(d.predicates.len(), 2);
        assert_eq!(d.actions.len(), 1);
        assert_eq!(d.actions[0].add.len(), 1);
        assert_eq!(d.actions[0].del.len(), 1);
        assert_eq!(d.actions[0].cost, None);
    }

    #[test]
    fn durative_action_is_unsupported() {
        let text = "(define (domain d) (:predicates (p))
            (:durative-action a :parameters () :duration (= ?duration 1) :condition () :effect ()))";
        assert!(matches!(
            parse_domain(text),
            Err(PddlError::UnsupportedFeature { ref construct, .. }) if construct == ":durative-action"
        ));
    }

    #[test]
    fn disjunction_and_conditional_effects_are_unsupported() {
        let or = "(define (domain d) (:predicates (p) (q))
            (:action a :parameters () :precondition (or (p) (q)) :effect (p)))";
        assert!(matches!(parse_domain(or), Err(PddlError::UnsupportedFeature { .. })));
        let when = "(define (domain d) (:predicates (p) (q))
            (:action a :parameters () :precondition (p) :effect (when (p) (q))))";
        assert!(matches!(parse_domain(when), Err(PddlError::UnsupportedFeature { .. })));
        let req = "(define (domain d) (:requirements :adl) (:predicates (p)))";
        assert!(matches!(parse_domain(req), Err(PddlError::UnsupportedFeature { .. })));
    }

    #[test]
    fn undeclared_names_are_rejected() {
        let pred = "(define (domain d) (:predicates (p))
            (:action a :parameters () :precondition (r) :effect (p)))";
        assert!(matches!(parse_domain(pred), Err(PddlError::UndeclaredPredicate { .. })));
        let var = "(define (domain d) (:predicates (p ?x))
            (:action a :parameters () :precondition (p ?y) :effect ()))";
        assert!(matches!(parse_domain(var), Err(PddlError::UndeclaredVariable { .. })));
        let ty = "(define (domain d) (:types a - b) (:predicates (p)))";
        assert!(matches!(parse_domain(ty), Err(PddlError::UndeclaredType { .. })));
        let dup = "(define (domain d) (:predicates (p) (p ?x)))";
        assert!(matches!(parse_domain(dup), Err(PddlError::Duplicate { .. })));
    }

    #[test]
    fn typed_arguments_are_checked() {
        let text = "(define (domain d) (:requirements :typing) (:types a b)
            (:predicates (p ?x - a))
            (:action act :parameters (?y - b) :precondition (p ?y) :effect ()))";
        assert!(matches!(parse_domain(text), Err(PddlError::TypeMismatch { .. })));
    }

    #[test]
    fn action_costs_and_equality() {
        let text = "(define (domain d) (:requirements :typing :action-costs :equality)
            (:types loc)
            (:predicates (at ?l - loc))
            (:functions (total-cost) - number (dist ?a ?b - loc) - number)
            (:action m :parameters (?a ?b - loc)
              :precondition (and (at ?a) (not (= ?a ?b)))
              :effect (and (at ?b) (not (at ?a)) (increase (total-cost) (dist ?a ?b)))))";
        let d = parse_domain(text).unwrap();
        assert_eq!(d.functions.len(), 2);
        let a = &d.actions[0];
        assert!(matches!(a.precondition[1], Literal::NotEq(..)));
        assert!(matches!(a.cost, Some(CostExpr::Fluent(_))));
    }
}
