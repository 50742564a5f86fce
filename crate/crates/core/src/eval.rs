//! Direct model checking of expanded formulas on labeled trees.
//!
//! Formulas are compiled once into a [`Program`] with numbered variable slots and
//! can then be run against any number of trees. Set quantifiers are decided by a
//! backtracking search over partial sets: subformulas are evaluated in three-valued
//! (Kleene) logic, where membership of a not-yet-decided node is unknown, and the
//! search branches only on nodes whose membership the evaluation actually
//! consulted. Because three-valued evaluation is sound, a definite answer on a
//! partial set holds for every completion, so the search agrees with plain subset
//! enumeration. Subformulas without free set variables are memoized per
//! assignment of their free individual variables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::bitset::NodeSet;
use crate::logic::{Formula, Rel, Term};
use crate::tree::{Address, LabeledTree};

mod scope;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EvalError {
    NotExpanded,
    UnboundVariable(String),
    UnknownRelation(String),
    UnknownConstant(String),
    NotClosed(String),
    NotEquivalence { relation: String, reason: String },
    UnknownId { relation: String, id: u64 },
    AddressNotInTree(Address),
    RelationSyntax { line: usize, message: String },
    TooManySolutions(usize),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::NotExpanded => f.write_str("formula still contains macro calls; expand it first"),
            EvalError::UnboundVariable(v) => write!(f, "variable {v} is free and not assigned"),
            EvalError::UnknownRelation(r) => write!(f, "auxiliary relation {r} is not provided"),
            EvalError::UnknownConstant(c) => write!(f, "constant @{c} is not bound in the tree"),
            EvalError::NotClosed(v) => write!(f, "formula is not closed: {v} is free"),
            EvalError::NotEquivalence { relation, reason } => {
                write!(f, "relation {relation} is not an equivalence relation: {reason}")
            }
            EvalError::UnknownId { relation, id } => {
                write!(f, "relation {relation} mentions node id {id}, which is not in the tree")
            }
            EvalError::AddressNotInTree(a) => write!(f, "address {a} is not in the tree"),
            EvalError::RelationSyntax { line, message } => {
                write!(f, "relation file line {line}: {message}")
            }
            EvalError::TooManySolutions(cap) => write!(f, "more than {cap} satisfying sets"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Values for free variables.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Assignment {
    pub individuals: BTreeMap<String, Address>,
    pub sets: BTreeMap<String, BTreeSet<Address>>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_individual(mut self, v: &str, a: Address) -> Self {
        self.individuals.insert(v.into(), a);
        self
    }

    pub fn with_set(mut self, v: &str, s: impl IntoIterator<Item = Address>) -> Self {
        self.sets.insert(v.into(), s.into_iter().collect());
        self
    }
}

/// Named binary relations over tree nodes, such as co-indexation.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AuxRelations {
    rels: BTreeMap<String, BTreeSet<(Address, Address)>>,
}

impl AuxRelations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, pairs: impl IntoIterator<Item = (Address, Address)>) {
        self.rels.entry(name.into()).or_default().extend(pairs);
    }

    pub fn get(&self, name: &str) -> Option<&BTreeSet<(Address, Address)>> {
        self.rels.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rels.keys().map(String::as_str)
    }

    /// Parses lines `REL <id> <id>` and resolves ids against `tree`. Blank lines and
    /// text after `#` are ignored.
    pub fn parse(text: &str, tree: &LabeledTree) -> Result<Self, EvalError> {
        let mut out = AuxRelations::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.is_empty() {
                continue;
            }
            let err = |m: &str| EvalError::RelationSyntax { line: i + 1, message: m.into() };
            if parts.len() != 3 {
                return Err(err("expected `REL <id> <id>`"));
            }
            let a: u64 = parts[1].parse().map_err(|_| err("node id must be a non-negative integer"))?;
            let b: u64 = parts[2].parse().map_err(|_| err("node id must be a non-negative integer"))?;
            let addr = |id| {
                tree.index_of_id(id)
                    .map(|n| tree.address(n))
                    .ok_or(EvalError::UnknownId { relation: parts[0].into(), id })
            };
            let pair = (addr(a)?, addr(b)?);
            out.insert(parts[0], [pair]);
        }
        Ok(out)
    }

    /// Checks that relation `name` is reflexive on `tree`, symmetric and transitive.
    pub fn check_equivalence(&self, name: &str, tree: &LabeledTree) -> Result<(), EvalError> {
        let pairs = self.rels.get(name).ok_or_else(|| EvalError::UnknownRelation(name.into()))?;
        let bad = |reason: String| Err(EvalError::NotEquivalence { relation: name.into(), reason });
        for a in tree.addresses() {
            if !pairs.contains(&(a.clone(), a.clone())) {
                return bad(format!("({a}, {a}) missing"));
            }
        }
        for (a, b) in pairs {
            if tree.index_of(a).is_none() {
                return Err(EvalError::AddressNotInTree(a.clone()));
            }
            if tree.index_of(b).is_none() {
                return Err(EvalError::AddressNotInTree(b.clone()));
            }
            if !pairs.contains(&(b.clone(), a.clone())) {
                return bad(format!("({a}, {b}) present but ({b}, {a}) missing"));
            }
        }
        for (a, b) in pairs {
            for (c, d) in pairs.range((b.clone(), Address::root())..) {
                if c != b {
                    break;
                }
                if !pairs.contains(&(a.clone(), d.clone())) {
                    return bad(format!("({a}, {b}) and ({b}, {d}) present but ({a}, {d}) missing"));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Compiled form

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Ind {
    Slot(u32),
    Const(u32),
}

#[derive(Clone, Debug)]
enum Node {
    Const(bool),
    Rel(Rel, Ind, Ind),
    Pred(u32, Ind),
    Set(u32, Ind),
    Aux(u32, Ind, Ind),
    Not(u32),
    And(Vec<u32>),
    Or(Vec<u32>),
    Iff(u32, u32),
    ForallInd(u32, u32),
    ExistsInd(u32, u32),
    ForallSet(u32, u32),
    ExistsSet(u32, u32),
}

/// A formula compiled for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Program {
    nodes: Vec<Node>,
    root: u32,
    ind_slots: usize,
    set_slots: usize,
    free_ind: Vec<(String, u32)>,
    free_sets: Vec<(String, u32)>,
    preds: Vec<String>,
    consts: Vec<String>,
    auxes: Vec<String>,
    /// Free individual slots of each memoizable node.
    memo_vars: Vec<Option<Vec<u32>>>,
}

struct Builder {
    nodes: Vec<Node>,
    ind_slots: u32,
    set_slots: u32,
    scope_ind: Vec<(String, u32)>,
    scope_set: Vec<(String, u32)>,
    free_ind: Vec<(String, u32)>,
    free_sets: Vec<(String, u32)>,
    preds: Vec<String>,
    consts: Vec<String>,
    auxes: Vec<String>,
}

fn intern(list: &mut Vec<String>, name: &str) -> u32 {
    match list.iter().position(|n| n == name) {
        Some(i) => i as u32,
        None => {
            list.push(name.into());
            (list.len() - 1) as u32
        }
    }
}

impl Builder {
    fn push(&mut self, n: Node) -> u32 {
        self.nodes.push(n);
        (self.nodes.len() - 1) as u32
    }

    fn ind(&mut self, t: &Term) -> Ind {
        match t {
            Term::Const(c) => Ind::Const(intern(&mut self.consts, c)),
            Term::Var(v) => {
                if let Some((_, s)) = self.scope_ind.iter().rev().find(|(n, _)| n == v) {
                    return Ind::Slot(*s);
                }
                if let Some((_, s)) = self.free_ind.iter().find(|(n, _)| n == v) {
                    return Ind::Slot(*s);
                }
                let s = self.ind_slots;
                self.ind_slots += 1;
                self.free_ind.push((v.clone(), s));
                Ind::Slot(s)
            }
        }
    }

    fn set(&mut self, v: &str) -> u32 {
        if let Some((_, s)) = self.scope_set.iter().rev().find(|(n, _)| n == v) {
            return *s;
        }
        if let Some((_, s)) = self.free_sets.iter().find(|(n, _)| n == v) {
            return *s;
        }
        let s = self.set_slots;
        self.set_slots += 1;
        self.free_sets.push((v.into(), s));
        s
    }

    fn flatten_into(&mut self, f: &Formula, and: bool, out: &mut Vec<u32>) -> Result<(), EvalError> {
        match (f, and) {
            (Formula::And(a, b), true) | (Formula::Or(a, b), false) => {
                self.flatten_into(a, and, out)?;
                self.flatten_into(b, and, out)
            }
            _ => {
                out.push(self.build(f)?);
                Ok(())
            }
        }
    }

    fn build(&mut self, f: &Formula) -> Result<u32, EvalError> {
        let node = match f {
            Formula::True => Node::Const(true),
            Formula::False => Node::Const(false),
            Formula::Atom(Rel::PDom, ..) | Formula::Macro(..) | Formula::ExistsUnique(..) => {
                return Err(EvalError::NotExpanded)
            }
            Formula::Atom(r, a, b) => Node::Rel(*r, self.ind(a), self.ind(b)),
            Formula::Pred(p, t) => Node::Pred(intern(&mut self.preds, p), self.ind(t)),
            Formula::SetApp(s, t) => {
                let t = self.ind(t);
                Node::Set(self.set(s), t)
            }
            Formula::Aux(r, a, b) => {
                let (a, b) = (self.ind(a), self.ind(b));
                Node::Aux(intern(&mut self.auxes, r), a, b)
            }
            Formula::Not(a) => Node::Not(self.build(a)?),
            Formula::And(..) => {
                let mut v = Vec::new();
                self.flatten_into(f, true, &mut v)?;
                Node::And(v)
            }
            Formula::Or(..) => {
                let mut v = Vec::new();
                self.flatten_into(f, false, &mut v)?;
                Node::Or(v)
            }
            Formula::Implies(a, b) => {
                let na = self.build(a)?;
                let not_a = self.push(Node::Not(na));
                let nb = self.build(b)?;
                Node::Or(vec![not_a, nb])
            }
            Formula::Iff(a, b) => Node::Iff(self.build(a)?, self.build(b)?),
            Formula::ForallInd(v, a) | Formula::ExistsInd(v, a) => {
                let s = self.ind_slots;
                self.ind_slots += 1;
                self.scope_ind.push((v.clone(), s));
                let body = self.build(a);
                self.scope_ind.pop();
                let body = body?;
                if matches!(f, Formula::ForallInd(..)) {
                    Node::ForallInd(s, body)
                } else {
                    Node::ExistsInd(s, body)
                }
            }
            Formula::ForallSet(v, a) | Formula::ExistsSet(v, a) => {
                let s = self.set_slots;
                self.set_slots += 1;
                self.scope_set.push((v.clone(), s));
                let body = self.build(a);
                self.scope_set.pop();
                let body = body?;
                if matches!(f, Formula::ForallSet(..)) {
                    Node::ForallSet(s, body)
                } else {
                    Node::ExistsSet(s, body)
                }
            }
        };
        Ok(self.push(node))
    }
}

impl Program {
    /// Compiles an expanded formula. Fails with [`EvalError::NotExpanded`] if macro
    /// calls, `ex!` or `<+` remain.
    pub fn new(f: &Formula) -> Result<Program, EvalError> {
        let mut b = Builder {
            nodes: Vec::new(),
            ind_slots: 0,
            set_slots: 0,
            scope_ind: Vec::new(),
            scope_set: Vec::new(),
            free_ind: Vec::new(),
            free_sets: Vec::new(),
            preds: Vec::new(),
            consts: Vec::new(),
            auxes: Vec::new(),
        };
        let root = b.build(&scope::miniscope(f))?;
        let mut p = Program {
            nodes: b.nodes,
            root,
            ind_slots: b.ind_slots as usize,
            set_slots: b.set_slots as usize,
            free_ind: b.free_ind,
            free_sets: b.free_sets,
            preds: b.preds,
            consts: b.consts,
            auxes: b.auxes,
            memo_vars: Vec::new(),
        };
        p.analyze();
        Ok(p)
    }

    /// Works out which nodes can be memoized: quantifier nodes with no free set
    /// variable.
    fn analyze(&mut self) {
        let n = self.nodes.len();
        let mut free_i: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
        let mut free_s: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
        let slot = |i: &Ind, out: &mut BTreeSet<u32>| {
            if let Ind::Slot(s) = i {
                out.insert(*s);
            }
        };
        // children always precede parents
        for id in 0..n {
            let (mut fi, mut fs) = (BTreeSet::new(), BTreeSet::new());
            match &self.nodes[id] {
                Node::Const(_) => {}
                Node::Rel(_, a, b) | Node::Aux(_, a, b) => {
                    slot(a, &mut fi);
                    slot(b, &mut fi);
                }
                Node::Pred(_, a) => slot(a, &mut fi),
                Node::Set(s, a) => {
                    fs.insert(*s);
                    slot(a, &mut fi);
                }
                Node::Not(c) => {
                    fi = free_i[*c as usize].clone();
                    fs = free_s[*c as usize].clone();
                }
                Node::And(cs) | Node::Or(cs) => {
                    for c in cs {
                        fi.extend(free_i[*c as usize].iter().copied());
                        fs.extend(free_s[*c as usize].iter().copied());
                    }
                }
                Node::Iff(a, b) => {
                    for c in [a, b] {
                        fi.extend(free_i[*c as usize].iter().copied());
                        fs.extend(free_s[*c as usize].iter().copied());
                    }
                }
                Node::ForallInd(v, c) | Node::ExistsInd(v, c) => {
                    fi = free_i[*c as usize].clone();
                    fi.remove(v);
                    fs = free_s[*c as usize].clone();
                }
                Node::ForallSet(v, c) | Node::ExistsSet(v, c) => {
                    fi = free_i[*c as usize].clone();
                    fs = free_s[*c as usize].clone();
                    fs.remove(v);
                }
            }
            free_i[id] = fi;
            free_s[id] = fs;
        }
        self.memo_vars = (0..n)
            .map(|id| {
                let quant = matches!(
                    self.nodes[id],
                    Node::ForallInd(..) | Node::ExistsInd(..) | Node::ForallSet(..) | Node::ExistsSet(..)
                );
                (quant && free_s[id].is_empty()).then(|| free_i[id].iter().copied().collect())
            })
            .collect();
    }

    pub fn free_individuals(&self) -> impl Iterator<Item = &str> {
        self.free_ind.iter().map(|(n, _)| n.as_str())
    }

    pub fn free_sets(&self) -> impl Iterator<Item = &str> {
        self.free_sets.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_closed(&self) -> bool {
        self.free_ind.is_empty() && self.free_sets.is_empty()
    }

    fn context<'t>(
        &'t self,
        tree: &'t LabeledTree,
        s: &Assignment,
        aux: &AuxRelations,
    ) -> Result<Ctx<'t>, EvalError> {
        let n = tree.len();
        let resolve = |a: &Address| tree.index_of(a).ok_or_else(|| EvalError::AddressNotInTree(a.clone()));
        let mut ind = vec![0u32; self.ind_slots];
        for (name, slot) in &self.free_ind {
            let a = s.individuals.get(name).ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            ind[*slot as usize] = resolve(a)? as u32;
        }
        let mut sets = vec![Partial::unknown(n); self.set_slots];
        for (name, slot) in &self.free_sets {
            let v = s.sets.get(name).ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            let mut val = NodeSet::empty(n);
            for a in v {
                val.insert(resolve(a)?);
            }
            sets[*slot as usize] = Partial { known: NodeSet::full(n), value: val };
        }
        let consts = self
            .consts
            .iter()
            .map(|c| tree.constant_binding(c).map(|i| i as u32).ok_or_else(|| EvalError::UnknownConstant(c.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let preds = self.preds.iter().map(|p| tree.extension(p)).collect();
        let mut auxes = Vec::with_capacity(self.auxes.len());
        for r in &self.auxes {
            let pairs = aux.get(r).ok_or_else(|| EvalError::UnknownRelation(r.clone()))?;
            let mut rows = vec![NodeSet::empty(n); n];
            for (a, b) in pairs {
                rows[resolve(a)?].insert(resolve(b)?);
            }
            auxes.push(rows);
        }
        let memo = self
            .memo_vars
            .iter()
            .map(|m| {
                m.as_ref().map(|vars| {
                    let cells = (n as u64).checked_pow(vars.len() as u32);
                    match cells {
                        Some(c) if c <= 1 << 16 => Memo::Dense(vec![0; c as usize]),
                        _ => Memo::Sparse(HashMap::new()),
                    }
                })
            })
            .collect();
        Ok(Ctx {
            prog: self,
            tree,
            n: n as u32,
            ind,
            sets,
            hints: vec![None; self.set_slots],
            consts,
            preds,
            auxes,
            memo,
        })
    }

    /// Evaluates under an assignment covering every free variable.
    pub fn run(&self, tree: &LabeledTree, s: &Assignment, aux: &AuxRelations) -> Result<bool, EvalError> {
        let mut ctx = self.context(tree, s, aux)?;
        match ctx.eval(self.root) {
            Tri::T => Ok(true),
            Tri::F => Ok(false),
            Tri::U => unreachable!("all set variables are fully known at top level"),
        }
    }

    /// All sets `X` such that the formula holds when `X` is assigned to `set_var`,
    /// under `s` for the other free variables. Stops with an error after `cap`
    /// solutions.
    pub fn satisfying_sets(
        &self,
        tree: &LabeledTree,
        set_var: &str,
        s: &Assignment,
        aux: &AuxRelations,
        cap: usize,
    ) -> Result<Vec<BTreeSet<Address>>, EvalError> {
        let mut with = s.clone();
        with.sets.insert(set_var.into(), BTreeSet::new());
        let mut ctx = self.context(tree, &with, aux)?;
        let slot = match self.free_sets.iter().find(|(n, _)| n == set_var) {
            Some((_, slot)) => *slot,
            None => {
                // The formula does not mention the variable: every set or none.
                let holds = ctx.eval(self.root) == Tri::T;
                if !holds {
                    return Ok(Vec::new());
                }
                let all = 1usize.checked_shl(tree.len() as u32).filter(|c| *c <= cap);
                let Some(count) = all else { return Err(EvalError::TooManySolutions(cap)) };
                return Ok((0..count)
                    .map(|m| (0..tree.len()).filter(|i| m >> i & 1 == 1).map(|i| tree.address(i)).collect())
                    .collect());
            }
        };
        ctx.sets[slot as usize] = Partial::unknown(tree.len());
        let mut out = Vec::new();
        ctx.enumerate(slot, self.root, &mut out, cap)?;
        Ok(out
            .into_iter()
            .map(|set| set.iter().map(|i| tree.address(i)).collect())
            .collect())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tri {
    F,
    U,
    T,
}

impl Tri {
    fn not(self) -> Tri {
        match self {
            Tri::F => Tri::T,
            Tri::U => Tri::U,
            Tri::T => Tri::F,
        }
    }

    fn from(b: bool) -> Tri {
        if b {
            Tri::T
        } else {
            Tri::F
        }
    }
}

#[derive(Clone, Debug)]
struct Partial {
    known: NodeSet,
    value: NodeSet,
}

impl Partial {
    fn unknown(n: usize) -> Self {
        Partial { known: NodeSet::empty(n), value: NodeSet::empty(n) }
    }
}

enum Memo {
    Dense(Vec<u8>),
    Sparse(HashMap<Vec<u32>, bool>),
}

struct Ctx<'t> {
    prog: &'t Program,
    tree: &'t LabeledTree,
    n: u32,
    ind: Vec<u32>,
    sets: Vec<Partial>,
    hints: Vec<Option<u32>>,
    consts: Vec<u32>,
    preds: Vec<NodeSet>,
    auxes: Vec<Vec<NodeSet>>,
    memo: Vec<Option<Memo>>,
}

impl Ctx<'_> {
    #[inline]
    fn val(&self, i: Ind) -> usize {
        match i {
            Ind::Slot(s) => self.ind[s as usize] as usize,
            Ind::Const(c) => self.consts[c as usize] as usize,
        }
    }

    fn memo_get(&self, id: u32) -> Option<bool> {
        let vars = self.prog.memo_vars[id as usize].as_ref()?;
        match self.memo[id as usize].as_ref()? {
            Memo::Dense(cells) => {
                let mut k = 0usize;
                for v in vars {
                    k = k * self.n as usize + self.ind[*v as usize] as usize;
                }
                match cells[k] {
                    1 => Some(false),
                    2 => Some(true),
                    _ => None,
                }
            }
            Memo::Sparse(map) => {
                let key: Vec<u32> = vars.iter().map(|v| self.ind[*v as usize]).collect();
                map.get(&key).copied()
            }
        }
    }

    fn memo_put(&mut self, id: u32, value: bool) {
        let Some(vars) = self.prog.memo_vars[id as usize].as_ref() else { return };
        let n = self.n as usize;
        let key_dense = || vars.iter().fold(0usize, |k, v| k * n + self.ind[*v as usize] as usize);
        let key_sparse = || vars.iter().map(|v| self.ind[*v as usize]).collect::<Vec<u32>>();
        let (kd, ks) = match self.memo[id as usize] {
            Some(Memo::Dense(_)) => (key_dense(), Vec::new()),
            Some(Memo::Sparse(_)) => (0, key_sparse()),
            None => return,
        };
        match self.memo[id as usize].as_mut() {
            Some(Memo::Dense(cells)) => cells[kd] = if value { 2 } else { 1 },
            Some(Memo::Sparse(map)) => {
                map.insert(ks, value);
            }
            None => {}
        }
    }

    fn eval(&mut self, id: u32) -> Tri {
        let prog = self.prog;
        match &prog.nodes[id as usize] {
            Node::Const(b) => Tri::from(*b),
            Node::Rel(r, a, b) => {
                let (u, v) = (self.val(*a), self.val(*b));
                Tri::from(match r {
                    Rel::Parent => self.tree.is_parent(u, v),
                    Rel::Dom => self.tree.dominates(u, v),
                    Rel::Left => self.tree.left_of(u, v),
                    Rel::Eq => u == v,
                    Rel::PDom => self.tree.properly_dominates(u, v),
                })
            }
            Node::Pred(p, a) => Tri::from(self.preds[*p as usize].contains(self.val(*a))),
            Node::Aux(r, a, b) => {
                let (u, v) = (self.val(*a), self.val(*b));
                Tri::from(self.auxes[*r as usize][u].contains(v))
            }
            Node::Set(s, a) => {
                let v = self.val(*a);
                let p = &self.sets[*s as usize];
                if p.known.contains(v) {
                    Tri::from(p.value.contains(v))
                } else {
                    let h = &mut self.hints[*s as usize];
                    if h.is_none() {
                        *h = Some(v as u32);
                    }
                    Tri::U
                }
            }
            Node::Not(c) => self.eval(*c).not(),
            Node::And(cs) => {
                let mut acc = Tri::T;
                for c in cs {
                    match self.eval(*c) {
                        Tri::F => return Tri::F,
                        Tri::U => acc = Tri::U,
                        Tri::T => {}
                    }
                }
                acc
            }
            Node::Or(cs) => {
                let mut acc = Tri::F;
                for c in cs {
                    match self.eval(*c) {
                        Tri::T => return Tri::T,
                        Tri::U => acc = Tri::U,
                        Tri::F => {}
                    }
                }
                acc
            }
            Node::Iff(a, b) => {
                let x = self.eval(*a);
                if x == Tri::U {
                    // still evaluate b to collect hints
                    let _ = self.eval(*b);
                    return Tri::U;
                }
                let y = self.eval(*b);
                match (x, y) {
                    (_, Tri::U) => Tri::U,
                    _ => Tri::from(x == y),
                }
            }
            Node::ForallInd(..) | Node::ExistsInd(..) | Node::ForallSet(..) | Node::ExistsSet(..) => {
                if let Some(v) = self.memo_get(id) {
                    return Tri::from(v);
                }
                let r = self.eval_quant(id);
                if r != Tri::U {
                    self.memo_put(id, r == Tri::T);
                }
                r
            }
        }
    }

    fn eval_quant(&mut self, id: u32) -> Tri {
        let prog = self.prog;
        match &prog.nodes[id as usize] {
            Node::ForallInd(v, body) | Node::ExistsInd(v, body) => {
                let exists = matches!(prog.nodes[id as usize], Node::ExistsInd(..));
                let (stop, mut acc) = if exists { (Tri::T, Tri::F) } else { (Tri::F, Tri::T) };
                let saved = self.ind[*v as usize];
                for u in 0..self.n {
                    self.ind[*v as usize] = u;
                    match self.eval(*body) {
                        r if r == stop => {
                            acc = stop;
                            break;
                        }
                        Tri::U => acc = Tri::U,
                        _ => {}
                    }
                }
                self.ind[*v as usize] = saved;
                acc
            }
            Node::ForallSet(v, body) | Node::ExistsSet(v, body) => {
                let want = if matches!(prog.nodes[id as usize], Node::ExistsSet(..)) { Tri::T } else { Tri::F };
                let saved = core::mem::replace(&mut self.sets[*v as usize], Partial::unknown(self.n as usize));
                let saved_hint = self.hints[*v as usize];
                let r = self.search(*v, *body, want);
                self.sets[*v as usize] = saved;
                self.hints[*v as usize] = saved_hint;
                r
            }
            _ => unreachable!(),
        }
    }

    /// Looks for a completion of set slot `s` making `body` evaluate to `want`.
    /// Returns `want` if found, its negation if no completion can, and `U` if the
    /// answer depends on an enclosing undecided set.
    fn search(&mut self, s: u32, body: u32, want: Tri) -> Tri {
        self.hints[s as usize] = None;
        let r = self.eval(body);
        if r != Tri::U {
            return if r == want { want } else { want.not() };
        }
        let Some(v) = self.hints[s as usize] else { return Tri::U };
        let v = v as usize;
        let mut all_fail = true;
        for value in [false, true] {
            let p = &mut self.sets[s as usize];
            p.known.insert(v);
            p.value.set(v, value);
            let r = self.search(s, body, want);
            if r == want {
                let p = &mut self.sets[s as usize];
                p.known.remove(v);
                p.value.remove(v);
                return want;
            }
            if r == Tri::U {
                all_fail = false;
            }
        }
        let p = &mut self.sets[s as usize];
        p.known.remove(v);
        p.value.remove(v);
        if all_fail {
            want.not()
        } else {
            Tri::U
        }
    }

    fn enumerate(&mut self, s: u32, body: u32, out: &mut Vec<NodeSet>, cap: usize) -> Result<(), EvalError> {
        self.hints[s as usize] = None;
        match self.eval(body) {
            Tri::F => Ok(()),
            Tri::T => {
                // every completion of the undecided nodes works
                let p = &self.sets[s as usize];
                let free: Vec<usize> = p.known.complement().iter().collect();
                let count = 1usize.checked_shl(free.len() as u32).unwrap_or(usize::MAX);
                if count > cap.saturating_sub(out.len()) {
                    return Err(EvalError::TooManySolutions(cap));
                }
                for m in 0..count {
                    let mut set = p.value.clone();
                    for (i, &v) in free.iter().enumerate() {
                        if m >> i & 1 == 1 {
                            set.insert(v);
                        }
                    }
                    out.push(set);
                }
                Ok(())
            }
            Tri::U => {
                let v = self.hints[s as usize].expect("undecided top-level set has a hint") as usize;
                for value in [false, true] {
                    let p = &mut self.sets[s as usize];
                    p.known.insert(v);
                    p.value.set(v, value);
                    self.enumerate(s, body, out, cap)?;
                }
                let p = &mut self.sets[s as usize];
                p.known.remove(v);
                p.value.remove(v);
                Ok(())
            }
        }
    }
}

/// Evaluates an expanded formula on `tree` under assignment `s`.
pub fn evaluate(tree: &LabeledTree, f: &Formula, s: &Assignment, aux: &AuxRelations) -> Result<bool, EvalError> {
    Program::new(f)?.run(tree, s, aux)
}

/// Evaluates a closed expanded formula.
pub fn evaluate_sentence(tree: &LabeledTree, f: &Formula, aux: &AuxRelations) -> Result<bool, EvalError> {
    let p = Program::new(f)?;
    if let Some((v, _)) = p.free_ind.first().or(p.free_sets.first()) {
        return Err(EvalError::NotClosed(v.clone()));
    }
    p.run(tree, &Assignment::new(), aux)
}
