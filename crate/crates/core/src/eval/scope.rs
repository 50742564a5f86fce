//! Miniscoping: moves individual quantifiers as far inward as possible so that
//! memoized quantifier nodes depend on few free variables.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::logic::{Arg, Formula, Term};

/// Largest formula (in nodes) that distributing a conjunction over a disjunction
/// may produce.
const DISTRIBUTE_LIMIT: usize = 256;

pub(super) fn miniscope(f: &Formula) -> Formula {
    match f {
        Formula::Not(a) => Formula::not(miniscope(a)),
        Formula::And(a, b) => Formula::and(miniscope(a), miniscope(b)),
        Formula::Or(a, b) => Formula::or(miniscope(a), miniscope(b)),
        Formula::Implies(a, b) => Formula::implies(miniscope(a), miniscope(b)),
        Formula::Iff(a, b) => Formula::iff(miniscope(a), miniscope(b)),
        Formula::ExistsInd(v, a) => push_exists(v, miniscope(a)),
        Formula::ForallInd(v, a) => push_forall(v, miniscope(a)),
        Formula::ExistsUnique(v, a) => Formula::ExistsUnique(v.clone(), Box::new(miniscope(a))),
        Formula::ForallSet(v, a) => Formula::ForallSet(v.clone(), Box::new(miniscope(a))),
        Formula::ExistsSet(v, a) => Formula::ExistsSet(v.clone(), Box::new(miniscope(a))),
        _ => f.clone(),
    }
}

fn push_exists(v: &str, f: Formula) -> Formula {
    if !mentions(v, &f) {
        return f;
    }
    match f {
        Formula::Or(a, b) => Formula::or(push_exists(v, *a), push_exists(v, *b)),
        Formula::Implies(a, b) => push_exists(v, Formula::or(Formula::not(*a), *b)),
        Formula::And(..) => {
            let mut items = Vec::new();
            flatten(f, true, &mut items);
            let (with, without): (Vec<_>, Vec<_>) = items.into_iter().partition(|g| mentions(v, g));
            let inner = match with.len() {
                1 => {
                    let g = with.into_iter().next().expect("one conjunct");
                    match g {
                        Formula::Or(..) | Formula::Implies(..) => push_exists(v, g),
                        g => Formula::ExistsInd(v.into(), Box::new(g)),
                    }
                }
                _ => distribute(v, with),
            };
            Formula::conj(without.into_iter().chain([inner]))
        }
        f => Formula::ExistsInd(v.into(), Box::new(f)),
    }
}

/// `ex v. (C1 & .. & Ck)` where every conjunct mentions `v`: splits on the first
/// disjunction when the result stays small.
fn distribute(v: &str, conjuncts: Vec<Formula>) -> Formula {
    let pos = conjuncts.iter().position(|g| matches!(g, Formula::Or(..)));
    if let Some(pos) = pos {
        let mut ds = Vec::new();
        flatten(conjuncts[pos].clone(), false, &mut ds);
        let rest: usize = conjuncts.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, g)| g.size()).sum();
        let total: usize = ds.iter().map(|d| d.size() + rest).sum();
        if total <= DISTRIBUTE_LIMIT {
            return Formula::disj(ds.into_iter().map(|d| {
                let mut cs = conjuncts.clone();
                cs[pos] = d;
                push_exists(v, Formula::conj(cs))
            }));
        }
    }
    Formula::ExistsInd(v.into(), Box::new(Formula::conj(conjuncts)))
}

fn push_forall(v: &str, f: Formula) -> Formula {
    if !mentions(v, &f) {
        return f;
    }
    match f {
        Formula::And(a, b) => Formula::and(push_forall(v, *a), push_forall(v, *b)),
        Formula::Implies(a, b) => match (mentions(v, &a), mentions(v, &b)) {
            (false, _) => Formula::implies(*a, push_forall(v, *b)),
            (true, false) => Formula::implies(push_exists(v, *a), *b),
            _ => Formula::ForallInd(v.into(), Box::new(Formula::implies(*a, *b))),
        },
        Formula::Or(..) => {
            let mut items = Vec::new();
            flatten(f, false, &mut items);
            let (with, without): (Vec<_>, Vec<_>) = items.into_iter().partition(|g| mentions(v, g));
            let inner = match with.len() {
                1 => {
                    let g = with.into_iter().next().expect("one disjunct");
                    match g {
                        Formula::And(..) => push_forall(v, g),
                        g => Formula::ForallInd(v.into(), Box::new(g)),
                    }
                }
                _ => Formula::ForallInd(v.into(), Box::new(Formula::disj(with))),
            };
            Formula::disj(without.into_iter().chain([inner]))
        }
        f => Formula::ForallInd(v.into(), Box::new(f)),
    }
}

fn flatten(f: Formula, and: bool, out: &mut Vec<Formula>) {
    match (f, and) {
        (Formula::And(a, b), true) | (Formula::Or(a, b), false) => {
            flatten(*a, and, out);
            flatten(*b, and, out);
        }
        (f, _) => out.push(f),
    }
}

/// Whether individual variable `v` occurs free in `f`.
fn mentions(v: &str, f: &Formula) -> bool {
    let term = |t: &Term| matches!(t, Term::Var(x) if x == v);
    match f {
        Formula::SetApp(_, t) | Formula::Pred(_, t) => term(t),
        Formula::Atom(_, a, b) | Formula::Aux(_, a, b) => term(a) || term(b),
        Formula::Not(a) => mentions(v, a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            mentions(v, a) || mentions(v, b)
        }
        Formula::ForallInd(x, a) | Formula::ExistsInd(x, a) | Formula::ExistsUnique(x, a) => {
            x != v && mentions(v, a)
        }
        Formula::ForallSet(_, a) | Formula::ExistsSet(_, a) => mentions(v, a),
        Formula::Macro(_, args) => args.iter().any(|a| matches!(a, Arg::Ind(t) if term(t))),
        Formula::True | Formula::False => false,
    }
}
