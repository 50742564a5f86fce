//! Compositional translation of expanded formulas into tree automata.
//!
//! Free variables and individual constants become extra alphabet bits: a tree
//! whose nodes carry these bits encodes an assignment, a node being in the set
//! for `X` iff it carries bit `X`. Individual variables are singleton sets.
//! Every intermediate automaton accepts only markings in which each individual
//! bit occurs exactly once; complement and union re-impose this by intersecting
//! with singleton automata. Keeping invalid markings out keeps subset
//! constructions small. Every subformula is compiled over just the bits it
//! mentions and widened when combined, and results are minimized as they are
//! built.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::{HashMap, HashSet};

use crate::automata::{AutomatonError, TreeAutomaton};
use crate::logic::{free_variables, Formula, Rel, Signature, Term};
use crate::tree::LabeledTree;
use crate::DEFAULT_STATE_CAP;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CompileError {
    /// Auxiliary binary relations take the logic beyond finite-state recognition.
    AuxRelation(String),
    NotExpanded,
    NotClosed(String),
    UnknownPredicate(String),
    /// A free variable has the same name as a predicate.
    NameClash(String),
    Automaton(AutomatonError),
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompileError::AuxRelation(r) => write!(
                f,
                "auxiliary relation {r} cannot be compiled to an automaton; use the evaluator"
            ),
            CompileError::NotExpanded => f.write_str("formula still contains macro calls; expand it first"),
            CompileError::NotClosed(v) => write!(f, "formula is not closed: {v} is free"),
            CompileError::UnknownPredicate(p) => write!(f, "predicate {p} is not in the signature"),
            CompileError::NameClash(v) => write!(f, "free variable {v} has the name of a predicate"),
            CompileError::Automaton(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for CompileError {}

impl From<AutomatonError> for CompileError {
    fn from(e: AutomatonError) -> Self {
        CompileError::Automaton(e)
    }
}

/// Outcome of [`decide`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Decision {
    /// Satisfiable, with a smallest model.
    Sat(LabeledTree),
    Unsat,
}

/// Compilation settings.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Options {
    pub arity: usize,
    pub state_cap: usize,
}

impl Options {
    pub fn new(arity: usize) -> Self {
        Options { arity, state_cap: DEFAULT_STATE_CAP }
    }
}

/// Compiles an expanded formula. The alphabet's bits are the signature's
/// predicates (or, for an open signature, the predicates the formula uses),
/// then `@c` for each constant used, then each free variable.
pub fn compile(f: &Formula, sig: &Signature, arity: usize) -> Result<TreeAutomaton, CompileError> {
    compile_with(f, sig, Options::new(arity))
}

pub fn compile_with(f: &Formula, sig: &Signature, opts: Options) -> Result<TreeAutomaton, CompileError> {
    let mut bits: Vec<String> = if sig.open {
        f.predicates().into_iter().collect()
    } else {
        for p in f.predicates() {
            if !sig.has_predicate(&p) {
                return Err(CompileError::UnknownPredicate(p));
            }
        }
        sig.predicates.clone()
    };
    if let Some(r) = f.aux_relations().into_iter().next() {
        return Err(CompileError::AuxRelation(r));
    }
    let consts: Vec<String> = f.constants().into_iter().map(|c| format!("@{c}")).collect();
    let (free_ind, free_sets) = free_variables(f);
    for v in free_ind.iter().chain(&free_sets) {
        if bits.contains(v) {
            return Err(CompileError::NameClash(v.clone()));
        }
    }
    let renamed = rename(f, &mut Vec::new(), 0)?;
    let mut individual: HashSet<String> = consts.iter().chain(&free_ind).cloned().collect();
    renamed.visit(&mut |g| {
        if let Formula::ForallInd(v, _) | Formula::ExistsInd(v, _) = g {
            individual.insert(v.clone());
        }
    });
    let mut c = Compiler { opts, memo: HashMap::new(), individual };
    let mut a = c.compile(&renamed)?;
    for v in consts.iter().chain(&free_ind) {
        a = c.min(a.intersect(&c.singleton(v)?)?)?;
    }
    bits.extend(consts);
    bits.extend(free_ind);
    bits.extend(free_sets);
    Ok(a.cylindrify(&bits)?)
}

/// Decides a sentence over finite trees with at most `arity` children per node.
pub fn decide(f: &Formula, sig: &Signature, arity: usize) -> Result<Decision, CompileError> {
    decide_with(f, sig, Options::new(arity))
}

pub fn decide_with(f: &Formula, sig: &Signature, opts: Options) -> Result<Decision, CompileError> {
    let (i, s) = free_variables(f);
    if let Some(v) = i.into_iter().chain(s).next() {
        return Err(CompileError::NotClosed(v));
    }
    let a = compile_with(f, sig, opts)?;
    Ok(match a.witness() {
        Some(t) => Decision::Sat(t),
        None => Decision::Unsat,
    })
}

/// Renames bound variables to `~d` (individuals) or `~Sd` (sets), d being the
/// binder depth, so that identical subformulas get identical bit names.
fn rename(f: &Formula, scope: &mut Vec<(String, String)>, depth: usize) -> Result<Formula, CompileError> {
    let term = |t: &Term, scope: &Vec<(String, String)>| match t {
        Term::Var(v) => Term::Var(lookup(v, scope)),
        Term::Const(c) => Term::Const(c.clone()),
    };
    let bind = |v: &String, set: bool, body: &Formula, scope: &mut Vec<(String, String)>| {
        let name = if set { format!("~S{depth}") } else { format!("~{depth}") };
        scope.push((v.clone(), name.clone()));
        let b = rename(body, scope, depth + 1);
        scope.pop();
        b.map(|b| (name, alloc::boxed::Box::new(b)))
    };
    Ok(match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(Rel::PDom, ..) | Formula::ExistsUnique(..) | Formula::Macro(..) => {
            return Err(CompileError::NotExpanded)
        }
        Formula::Atom(r, a, b) => Formula::Atom(*r, term(a, scope), term(b, scope)),
        Formula::Pred(p, t) => Formula::Pred(p.clone(), term(t, scope)),
        Formula::SetApp(s, t) => Formula::SetApp(lookup(s, scope), term(t, scope)),
        Formula::Aux(r, ..) => return Err(CompileError::AuxRelation(r.clone())),
        Formula::Not(a) => Formula::not(rename(a, scope, depth)?),
        Formula::And(a, b) => Formula::and(rename(a, scope, depth)?, rename(b, scope, depth)?),
        Formula::Or(a, b) => Formula::or(rename(a, scope, depth)?, rename(b, scope, depth)?),
        Formula::Implies(a, b) => Formula::implies(rename(a, scope, depth)?, rename(b, scope, depth)?),
        Formula::Iff(a, b) => Formula::iff(rename(a, scope, depth)?, rename(b, scope, depth)?),
        Formula::ForallInd(v, a) => {
            let (n, b) = bind(v, false, a, scope)?;
            Formula::ForallInd(n, b)
        }
        Formula::ExistsInd(v, a) => {
            let (n, b) = bind(v, false, a, scope)?;
            Formula::ExistsInd(n, b)
        }
        Formula::ForallSet(v, a) => {
            let (n, b) = bind(v, true, a, scope)?;
            Formula::ForallSet(n, b)
        }
        Formula::ExistsSet(v, a) => {
            let (n, b) = bind(v, true, a, scope)?;
            Formula::ExistsSet(n, b)
        }
    })
}

fn lookup(v: &str, scope: &[(String, String)]) -> String {
    scope.iter().rev().find(|(n, _)| n == v).map(|(_, b)| b.clone()).unwrap_or_else(|| v.into())
}

fn bit_of(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Const(c) => format!("@{c}"),
    }
}

struct Compiler {
    opts: Options,
    memo: HashMap<Formula, TreeAutomaton>,
    individual: HashSet<String>,
}

impl Compiler {
    fn min(&self, a: TreeAutomaton) -> Result<TreeAutomaton, CompileError> {
        Ok(a.with_state_cap(self.opts.state_cap).minimize()?)
    }

    /// Restricts to markings where every individual bit occurs exactly once.
    fn clean(&self, mut a: TreeAutomaton) -> Result<TreeAutomaton, CompileError> {
        let bits: Vec<String> = a.bits().iter().filter(|b| self.individual.contains(*b)).cloned().collect();
        for b in bits {
            a = a.intersect(&self.singleton(&b)?)?;
        }
        self.min(a)
    }

    fn constant(&self, value: bool) -> Result<TreeAutomaton, CompileError> {
        let a = TreeAutomaton::from_fn(Vec::new(), self.opts.arity, 1, if value { &[0] } else { &[] }, |_, _| 0)?;
        Ok(a.with_state_cap(self.opts.state_cap))
    }

    /// Two-state automaton: some node carries all the given bits.
    fn some_node_with(&self, bits: &[String]) -> Result<TreeAutomaton, CompileError> {
        let all = (1u64 << bits.len()) - 1;
        let a = TreeAutomaton::from_fn(bits.to_vec(), self.opts.arity, 2, &[1], |m, kids| {
            u32::from(m == all || kids.contains(&1))
        })?;
        Ok(a.with_state_cap(self.opts.state_cap))
    }

    /// Exactly one node carries the bit.
    fn singleton(&self, bit: &str) -> Result<TreeAutomaton, CompileError> {
        let a = TreeAutomaton::from_fn(alloc::vec![bit.into()], self.opts.arity, 3, &[1], |m, kids| {
            let count: u32 = kids.iter().sum::<u32>() + (m as u32 & 1);
            count.min(2)
        })?;
        Ok(a.with_state_cap(self.opts.state_cap))
    }

    /// Automaton for `x r y` over bits [x, y], assuming each bit marks one node.
    fn relation(&self, r: Rel, x: &str, y: &str) -> Result<TreeAutomaton, CompileError> {
        if x == y {
            return match r {
                Rel::Dom | Rel::Eq => self.constant(true),
                _ => self.constant(false),
            };
        }
        let bits = alloc::vec![String::from(x), String::from(y)];
        let n = self.opts.arity;
        let a = match r {
            Rel::Eq => return self.some_node_with(&bits),
            // 0 nothing, 1 this node is y, 2 found
            Rel::Parent => TreeAutomaton::from_fn(bits, n, 3, &[2], |m, kids| {
                let (hx, hy) = (m & 1 == 1, m & 2 == 2);
                if kids.contains(&2) || (hx && kids.contains(&1)) {
                    2
                } else {
                    u32::from(hy)
                }
            })?,
            // 0 nothing, 1 y in subtree, 2 found
            Rel::Dom => TreeAutomaton::from_fn(bits, n, 3, &[2], |m, kids| {
                let (hx, hy) = (m & 1 == 1, m & 2 == 2);
                let below = hy || kids.contains(&1);
                if kids.contains(&2) || (hx && below) {
                    2
                } else {
                    u32::from(below)
                }
            })?,
            // 0 nothing, 1 only x below, 2 only y below, 3 found, 4 both below but not x << y
            Rel::Left => TreeAutomaton::from_fn(bits, n, 5, &[3], |m, kids| {
                let (hx, hy) = (m & 1 == 1, m & 2 == 2);
                if kids.contains(&3) {
                    return 3;
                }
                if kids.contains(&4) {
                    return 4;
                }
                let xi = kids.iter().position(|&k| k == 1);
                let yi = kids.iter().position(|&k| k == 2);
                match (hx, hy, xi, yi) {
                    (true, true, ..) => 4,
                    (true, false, _, Some(_)) | (false, true, Some(_), _) => 4,
                    (true, false, _, None) => 1,
                    (false, true, None, _) => 2,
                    (false, false, Some(i), Some(j)) => {
                        if i < j {
                            3
                        } else {
                            4
                        }
                    }
                    (false, false, Some(_), None) => 1,
                    (false, false, None, Some(_)) => 2,
                    (false, false, None, None) => 0,
                }
            })?,
            Rel::PDom => return Err(CompileError::NotExpanded),
        };
        Ok(a.with_state_cap(self.opts.state_cap))
    }

    fn compile(&mut self, f: &Formula) -> Result<TreeAutomaton, CompileError> {
        if let Some(a) = self.memo.get(f) {
            return Ok(a.clone());
        }
        let a = match f {
            Formula::True => self.constant(true)?,
            Formula::False => self.constant(false)?,
            Formula::Atom(r, a, b) => self.clean(self.relation(*r, &bit_of(a), &bit_of(b))?)?,
            Formula::Pred(p, t) | Formula::SetApp(p, t) => {
                self.clean(self.some_node_with(&[p.clone(), bit_of(t)])?)?
            }
            Formula::Not(a) => {
                let a = self.compile(a)?.complement()?;
                self.clean(a)?
            }
            Formula::And(a, b) => {
                let (a, b) = (self.compile(a)?, self.compile(b)?);
                self.min(a.intersect(&b)?)?
            }
            Formula::Or(a, b) => {
                let (a, b) = (self.compile(a)?, self.compile(b)?);
                self.clean(a.union(&b)?)?
            }
            Formula::Implies(a, b) => {
                let (a, b) = (self.compile(a)?.complement()?, self.compile(b)?);
                self.clean(a.union(&b)?)?
            }
            Formula::Iff(a, b) => {
                let (a, b) = (self.compile(a)?, self.compile(b)?);
                let both = a.intersect(&b)?;
                let neither = a.complement()?.intersect(&b.complement()?)?;
                self.clean(both.union(&neither)?)?
            }
            Formula::ExistsInd(v, body) | Formula::ExistsSet(v, body) => self.exists(v, body)?,
            Formula::ForallInd(v, body) => {
                let inner = Formula::not((**body).clone());
                let a = self.exists(v, &inner)?.complement()?;
                self.clean(a)?
            }
            Formula::ForallSet(v, body) => {
                let inner = Formula::not((**body).clone());
                let a = self.exists(v, &inner)?.complement()?;
                self.clean(a)?
            }
            Formula::ExistsUnique(..) | Formula::Macro(..) => return Err(CompileError::NotExpanded),
            Formula::Aux(r, ..) => return Err(CompileError::AuxRelation(r.clone())),
        };
        self.memo.insert(f.clone(), a.clone());
        Ok(a)
    }

    fn exists(&mut self, v: &str, body: &Formula) -> Result<TreeAutomaton, CompileError> {
        let a = self.compile(body)?;
        if !a.bits().iter().any(|b| b == v) {
            // trees are non-empty, so an individual witness always exists
            return Ok(a);
        }
        self.min(a.project(v)?.determinize()?)
    }
}
