use std::fmt::Write;

use super::{AtomExpr, CostExpr, DomainDef, Literal, Metric, ProblemDef, Term, TypedName, ROOT_TYPE};

fn typed_list<'a>(items: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut out = String::new();
    let items: Vec<_> = items.into_iter().collect();
    let mut i = 0;
    while i < items.len() {
        let ty = items[i].1;
        let mut j = i;
        while j < items.len() && items[j].1 == ty {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(items[j].0);
            j += 1;
        }
        if ty != ROOT_TYPE {
            let _ = write!(out, " - {ty}");
        }
        i = j;
    }
    out
}

fn names(params: &[TypedName]) -> String {
    typed_list(params.iter().map(|p| (p.name.as_str(), p.ty.as_str())))
}

fn term(t: &Term) -> &str {
    t.name()
}

fn atom(a: &AtomExpr) -> String {
    let mut s = format!("({}", a.predicate);
    for arg in &a.args {
        s.push(' ');
        s.push_str(term(arg));
    }
    s.push(')');
    s
}

/// Renders a domain back to PDDL. Parsing the output yields an equal `DomainDef`.
pub fn domain_to_pddl(d: &DomainDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let _ = writeln!(out, "  (:requirements {})", d.requirements.join(" "));
    }
    if !d.types.is_empty() {
        let _ = writeln!(out, "  (:types {})", typed_list(d.types.iter().map(|(t, p)| (t.as_str(), p.as_str()))));
    }
    if !d.constants.is_empty() {
        let _ = writeln!(out, "  (:constants {})", names(&d.constants));
    }
    out.push_str("  (:predicates");
    for p in &d.predicates {
        let params = names(&p.params);
        if params.is_empty() {
            let _ = write!(out, " ({})", p.name);
        } else {
            let _ = write!(out, " ({} {})", p.name, params);
        }
    }
    out.push_str(")\n");
    if !d.functions.is_empty() {
        out.push_str("  (:functions");
        for f in &d.functions {
            let params = names(&f.params);
            if params.is_empty() {
                let _ = write!(out, " ({}) - number", f.name);
            } else {
                let _ = write!(out, " ({} {}) - number", f.name, params);
            }
        }
        out.push_str(")\n");
    }
    for a in &d.actions {
        let _ = writeln!(out, "  (:action {}", a.name);
        let _ = writeln!(out, "    :parameters ({})", names(&a.params));
        let pre: Vec<String> = a
            .precondition
            .iter()
            .map(|l| match l {
                Literal::Pos(x) => atom(x),
                Literal::Neg(x) => format!("(not {})", atom(x)),
                Literal::Eq(x, y) => format!("(= {} {})", term(x), term(y)),
                Literal::NotEq(x, y) => format!("(not (= {} {}))", term(x), term(y)),
            })
            .collect();
        let _ = writeln!(out, "    :precondition (and {})", pre.join(" "));
        let mut eff: Vec<String> = a.add.iter().map(atom).collect();
        eff.extend(a.del.iter().map(|x| format!("(not {})", atom(x))));
        match &a.cost {
            Some(CostExpr::Const(c)) => eff.push(format!("(increase (total-cost) {c})")),
            Some(CostExpr::Fluent(f)) => eff.push(format!("(increase (total-cost) {})", atom(f))),
            None => {}
        }
        let _ = writeln!(out, "    :effect (and {}))", eff.join(" "));
    }
    out.push_str(")\n");
    out
}

pub fn problem_to_pddl(p: &ProblemDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    let _ = writeln!(out, "  (:objects {})", names(&p.objects));
    out.push_str("  (:init");
    for a in &p.init {
        let _ = write!(out, "\n    {a}");
    }
    for (a, v) in &p.numeric_init {
        let _ = write!(out, "\n    (= {a} {v})");
    }
    out.push_str(")\n  (:goal (and");
    for l in &p.goal {
        if l.positive {
            let _ = write!(out, "\n    {}", l.atom);
        } else {
            let _ = write!(out, "\n    (not {})", l.atom);
        }
    }
    out.push_str("))\n");
    if let Some(Metric::MinimizeTotalCost) = p.metric {
        out.push_str("  (:metric minimize (total-cost))\n");
    }
    out.push_str(")\n");
    out
}
