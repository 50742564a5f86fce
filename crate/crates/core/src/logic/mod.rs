//! Formula syntax: the abstract syntax tree, signatures, printing, parsing and
//! macro expansion.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

mod expand;
mod parse;
mod print;

pub use expand::{builtin_env, expand, MacroDef, MacroEnv, Param, PolyFn};
pub use parse::{parse_definitions, parse_formula, parse_formulas, Definition};

/// The five fixed binary relations of the tree language.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Rel {
    /// `x < y`: x is the parent of y.
    Parent,
    /// `x <* y`: x dominates y (reflexive).
    Dom,
    /// `x <+ y`: x properly dominates y.
    PDom,
    /// `x << y`: x is left of y.
    Left,
    /// `x = y`.
    Eq,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Parent => "<",
            Rel::Dom => "<*",
            Rel::PDom => "<+",
            Rel::Left => "<<",
            Rel::Eq => "=",
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Var(String),
    /// Individual constant, written `@name`.
    Const(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }
}

/// Sorts of variables and macro parameters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sort {
    Ind,
    Set,
}

/// A macro argument.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Arg {
    Ind(Term),
    SetVar(String),
    Pred(String),
}

impl Arg {
    pub fn sort(&self) -> Sort {
        match self {
            Arg::Ind(_) => Sort::Ind,
            _ => Sort::Set,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Formula {
    True,
    False,
    Atom(Rel, Term, Term),
    Pred(String, Term),
    SetApp(String, Term),
    Aux(String, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    ForallInd(String, Box<Formula>),
    ExistsInd(String, Box<Formula>),
    ExistsUnique(String, Box<Formula>),
    ForallSet(String, Box<Formula>),
    ExistsSet(String, Box<Formula>),
    Macro(String, Vec<Arg>),
}

// Convenience constructors.
impl Formula {
    pub fn atom(rel: Rel, a: &str, b: &str) -> Self {
        Formula::Atom(rel, Term::var(a), Term::var(b))
    }

    pub fn pred(p: &str, x: &str) -> Self {
        Formula::Pred(p.into(), Term::var(x))
    }

    pub fn set(s: &str, x: &str) -> Self {
        Formula::SetApp(s.into(), Term::var(x))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(x: &str, f: Formula) -> Self {
        Formula::ForallInd(x.into(), Box::new(f))
    }

    pub fn exists(x: &str, f: Formula) -> Self {
        Formula::ExistsInd(x.into(), Box::new(f))
    }

    pub fn forall_set(x: &str, f: Formula) -> Self {
        Formula::ForallSet(x.into(), Box::new(f))
    }

    pub fn exists_set(x: &str, f: Formula) -> Self {
        Formula::ExistsSet(x.into(), Box::new(f))
    }

    pub fn call(name: &str, args: Vec<Arg>) -> Self {
        Formula::Macro(name.into(), args)
    }

    /// Conjunction of a list; `True` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Disjunction of a list; `False` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        let mut it = items.into_iter();
        match it.next() {
            None => Formula::False,
            Some(first) => it.fold(first, Formula::or),
        }
    }

    /// Direct subformulas.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Not(a)
            | Formula::ForallInd(_, a)
            | Formula::ExistsInd(_, a)
            | Formula::ExistsUnique(_, a)
            | Formula::ForallSet(_, a)
            | Formula::ExistsSet(_, a) => alloc::vec![&**a],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                alloc::vec![&**a, &**b]
            }
            _ => Vec::new(),
        }
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Formula::size).sum::<usize>()
    }

    pub fn contains_macros(&self) -> bool {
        match self {
            Formula::Macro(..) | Formula::ExistsUnique(..) => true,
            Formula::Atom(Rel::PDom, ..) => true,
            _ => self.children().into_iter().any(Formula::contains_macros),
        }
    }

    pub fn is_closed(&self) -> bool {
        let (i, s) = free_variables(self);
        i.is_empty() && s.is_empty()
    }

    /// Predicate names applied anywhere in the formula (including as macro arguments).
    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Pred(p, _) => {
                out.insert(p.clone());
            }
            Formula::Macro(_, args) => {
                for a in args {
                    if let Arg::Pred(p) = a {
                        out.insert(p.clone());
                    }
                }
            }
            _ => {}
        });
        out
    }

    /// Individual constants used anywhere in the formula.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut add = |t: &Term| {
            if let Term::Const(c) = t {
                out.insert(c.clone());
            }
        };
        self.visit(&mut |f| match f {
            Formula::Atom(_, a, b) | Formula::Aux(_, a, b) => {
                add(a);
                add(b);
            }
            Formula::Pred(_, t) | Formula::SetApp(_, t) => add(t),
            Formula::Macro(_, args) => {
                for a in args {
                    if let Arg::Ind(t) = a {
                        add(t);
                    }
                }
            }
            _ => {}
        });
        out
    }

    /// Auxiliary relation names used anywhere in the formula.
    pub fn aux_relations(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Aux(r, _, _) = f {
                out.insert(r.clone());
            }
        });
        out
    }

    /// Preorder traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Every variable name occurring anywhere, bound or free, of either sort.
    pub fn all_variable_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let add_t = |t: &Term, out: &mut BTreeSet<String>| {
            if let Term::Var(v) = t {
                out.insert(v.clone());
            }
        };
        self.visit(&mut |f| match f {
            Formula::Atom(_, a, b) | Formula::Aux(_, a, b) => {
                add_t(a, &mut out);
                add_t(b, &mut out);
            }
            Formula::Pred(_, t) => add_t(t, &mut out),
            Formula::SetApp(s, t) => {
                out.insert(s.clone());
                add_t(t, &mut out);
            }
            Formula::ForallInd(v, _)
            | Formula::ExistsInd(v, _)
            | Formula::ExistsUnique(v, _)
            | Formula::ForallSet(v, _)
            | Formula::ExistsSet(v, _) => {
                out.insert(v.clone());
            }
            Formula::Macro(_, args) => {
                for a in args {
                    match a {
                        Arg::Ind(t) => add_t(t, &mut out),
                        Arg::SetVar(s) => {
                            out.insert(s.clone());
                        }
                        Arg::Pred(_) => {}
                    }
                }
            }
            _ => {}
        });
        out
    }
}

/// Free individual variables and free set variables of a formula.
pub fn free_variables(f: &Formula) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut ind = BTreeSet::new();
    let mut sets = BTreeSet::new();
    let mut bound_i: Vec<String> = Vec::new();
    let mut bound_s: Vec<String> = Vec::new();
    free_rec(f, &mut bound_i, &mut bound_s, &mut ind, &mut sets);
    (ind, sets)
}

fn free_rec(
    f: &Formula,
    bi: &mut Vec<String>,
    bs: &mut Vec<String>,
    ind: &mut BTreeSet<String>,
    sets: &mut BTreeSet<String>,
) {
    let term = |t: &Term, bi: &Vec<String>, ind: &mut BTreeSet<String>| {
        if let Term::Var(v) = t {
            if !bi.contains(v) {
                ind.insert(v.clone());
            }
        }
    };
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom(_, a, b) | Formula::Aux(_, a, b) => {
            term(a, bi, ind);
            term(b, bi, ind);
        }
        Formula::Pred(_, t) => term(t, bi, ind),
        Formula::SetApp(s, t) => {
            if !bs.contains(s) {
                sets.insert(s.clone());
            }
            term(t, bi, ind);
        }
        Formula::Not(a) => free_rec(a, bi, bs, ind, sets),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            free_rec(a, bi, bs, ind, sets);
            free_rec(b, bi, bs, ind, sets);
        }
        Formula::ForallInd(v, a) | Formula::ExistsInd(v, a) | Formula::ExistsUnique(v, a) => {
            bi.push(v.clone());
            free_rec(a, bi, bs, ind, sets);
            bi.pop();
        }
        Formula::ForallSet(v, a) | Formula::ExistsSet(v, a) => {
            bs.push(v.clone());
            free_rec(a, bi, bs, ind, sets);
            bs.pop();
        }
        Formula::Macro(_, args) => {
            for a in args {
                match a {
                    Arg::Ind(t) => term(t, bi, ind),
                    Arg::SetVar(s) => {
                        if !bs.contains(s) {
                            sets.insert(s.clone());
                        }
                    }
                    Arg::Pred(_) => {}
                }
            }
        }
    }
}

/// The declared vocabulary for a run.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Signature {
    /// Predicate names, in the order used for automaton bit universes.
    pub predicates: Vec<String>,
    /// Individual constant names.
    pub constants: Vec<String>,
    /// Auxiliary binary relation names (evaluator only).
    pub aux_relations: Vec<String>,
    /// When set, unknown unary names parse as predicates and unknown binary names
    /// as auxiliary relations, instead of free set variables and errors.
    pub open: bool,
}

impl Signature {
    pub fn new<S: Into<String>>(predicates: impl IntoIterator<Item = S>) -> Self {
        Signature { predicates: predicates.into_iter().map(Into::into).collect(), ..Default::default() }
    }

    /// A signature that accepts any predicate or auxiliary relation name.
    pub fn open() -> Self {
        Signature { open: true, ..Default::default() }
    }

    pub fn with_aux<S: Into<String>>(mut self, rels: impl IntoIterator<Item = S>) -> Self {
        self.aux_relations.extend(rels.into_iter().map(Into::into));
        self
    }

    pub fn with_constants<S: Into<String>>(mut self, cs: impl IntoIterator<Item = S>) -> Self {
        self.constants.extend(cs.into_iter().map(Into::into));
        self
    }

    pub fn has_predicate(&self, p: &str) -> bool {
        self.predicates.iter().any(|q| q == p)
    }

    pub fn has_aux(&self, r: &str) -> bool {
        self.aux_relations.iter().any(|q| q == r)
    }

    /// Checks that names are unique and auxiliary names are disjoint from predicates.
    pub fn validate(&self) -> Result<(), LogicError> {
        let mut seen = BTreeSet::new();
        for n in self.predicates.iter().chain(&self.aux_relations) {
            if !seen.insert(n.as_str()) {
                return Err(LogicError::DuplicateName(n.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for n in &self.constants {
            if !seen.insert(n.as_str()) {
                return Err(LogicError::DuplicateName(n.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum LogicError {
    Syntax { line: usize, column: usize, message: String },
    Sort(String),
    UnknownName(String),
    UnknownMacro(String),
    ArgumentCount { name: String, expected: String, found: usize },
    CyclicMacro(String),
    Redefinition(String),
    DuplicateName(String),
}

impl fmt::Display for LogicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicError::Syntax { line, column, message } => {
                write!(f, "formula syntax error at {line}:{column}: {message}")
            }
            LogicError::Sort(m) => write!(f, "sort error: {m}"),
            LogicError::UnknownName(n) => write!(f, "unknown predicate or relation {n}"),
            LogicError::UnknownMacro(n) => write!(f, "unknown macro {n}"),
            LogicError::ArgumentCount { name, expected, found } => {
                write!(f, "{name} expects {expected} arguments, got {found}")
            }
            LogicError::CyclicMacro(n) => write!(f, "cyclic macro definition involving {n}"),
            LogicError::Redefinition(n) => write!(f, "macro {n} is already defined"),
            LogicError::DuplicateName(n) => write!(f, "name {n} declared twice"),
        }
    }
}

impl core::error::Error for LogicError {}

#[cfg(test)]
mod tests;
