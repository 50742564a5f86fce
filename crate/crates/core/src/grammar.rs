//! Context-free grammars over node-labeled trees.
//!
//! A derivation tree labels every node with one grammar symbol: the children of
//! a node labeled `A` spell out a right-hand side of `A`, and terminal nodes are
//! leaves. Right-hand sides are never empty; instead a *leaf production*, written
//! `A -> ~`, lets a nonterminal node have no children. Grammars produced from
//! automata use leaf productions for their arity-0 transitions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::automata::{AutomatonError, TreeAutomaton};
use crate::logic::{Arg, Formula, Signature, Term};
use crate::tree::LabeledTree;

/// Default bound on the number of trees an enumeration may produce.
pub const DEFAULT_DERIVATION_CAP: usize = 1 << 20;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum GrammarError {
    Syntax { line: usize, message: String },
    Undeclared(String),
    TerminalWithProductions(String),
    StartNotNonterminal(String),
    NoStart,
    EmptyProduction(String),
    ArityExceeded { lhs: String, length: usize, bound: usize },
    Automaton(AutomatonError),
    TooManyDerivations(usize),
}

impl fmt::Display for GrammarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarError::Syntax { line, message } => write!(f, "grammar line {line}: {message}"),
            GrammarError::Undeclared(s) => write!(f, "symbol {s} is neither a terminal nor has productions"),
            GrammarError::TerminalWithProductions(s) => write!(f, "terminal {s} has productions"),
            GrammarError::StartNotNonterminal(s) => write!(f, "start symbol {s} is not a nonterminal"),
            GrammarError::NoStart => f.write_str("grammar has no start symbol"),
            GrammarError::EmptyProduction(s) => {
                write!(f, "empty right-hand side for {s}; use `~` for a childless node")
            }
            GrammarError::ArityExceeded { lhs, length, bound } => {
                write!(f, "production for {lhs} has {length} symbols, more than the bound {bound}")
            }
            GrammarError::Automaton(e) => e.fmt(f),
            GrammarError::TooManyDerivations(cap) => write!(f, "more than {cap} derivation trees"),
        }
    }
}

impl core::error::Error for GrammarError {}

impl From<AutomatonError> for GrammarError {
    fn from(e: AutomatonError) -> Self {
        GrammarError::Automaton(e)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Grammar {
    pub start: Vec<String>,
    pub terminals: Vec<String>,
    /// Productions in order; an empty right-hand side is a leaf production.
    pub productions: Vec<(String, Vec<String>)>,
    /// For grammars built from automata: the label set each symbol stands for.
    pub projection: Option<BTreeMap<String, BTreeSet<String>>>,
}

impl Grammar {
    /// Nonterminals in order of first appearance as a start symbol or left-hand side.
    pub fn nonterminals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in self.start.iter().chain(self.productions.iter().map(|(l, _)| l)) {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }

    /// Nonterminals followed by terminals.
    pub fn symbols(&self) -> Vec<String> {
        let mut out = self.nonterminals();
        out.extend(self.terminals.iter().cloned());
        out
    }

    pub fn is_terminal(&self, s: &str) -> bool {
        self.terminals.iter().any(|t| t == s)
    }

    pub fn productions_of<'a>(&'a self, lhs: &'a str) -> impl Iterator<Item = &'a [String]> + 'a {
        self.productions.iter().filter(move |(l, _)| l == lhs).map(|(_, r)| r.as_slice())
    }

    pub fn validate(&self) -> Result<(), GrammarError> {
        if self.start.is_empty() {
            return Err(GrammarError::NoStart);
        }
        let lhs: BTreeSet<&str> = self.productions.iter().map(|(l, _)| l.as_str()).collect();
        for s in &self.start {
            if self.is_terminal(s) || !lhs.contains(s.as_str()) {
                return Err(GrammarError::StartNotNonterminal(s.clone()));
            }
        }
        for (l, rhs) in &self.productions {
            if self.is_terminal(l) {
                return Err(GrammarError::TerminalWithProductions(l.clone()));
            }
            for s in rhs {
                if !self.is_terminal(s) && !lhs.contains(s.as_str()) {
                    return Err(GrammarError::Undeclared(s.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn max_rhs(&self) -> usize {
        self.productions.iter().map(|(_, r)| r.len()).max().unwrap_or(0)
    }

    /// Replaces every node label by the label set its symbol stands for. Without a
    /// projection the tree is returned unchanged.
    pub fn project(&self, t: &LabeledTree) -> LabeledTree {
        match &self.projection {
            None => t.clone(),
            Some(p) => t.map_labels(|ls| {
                ls.iter().flat_map(|l| p.get(l).cloned().unwrap_or_else(|| [l.clone()].into())).collect()
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Text format

/// Parses the grammar text format:
///
/// ```text
/// start: A
/// terminals: b c d
/// A -> B c | A B | d
/// B -> b
/// L -> ~
/// proj A.q0 -> A
/// ```
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut g = Grammar::default();
    let mut projection = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| GrammarError::Syntax { line: i + 1, message: m };
        if let Some(rest) = line.strip_prefix("start:") {
            g.start.extend(rest.split_whitespace().map(ToString::to_string));
        } else if let Some(rest) = line.strip_prefix("terminals:") {
            g.terminals.extend(rest.split_whitespace().map(ToString::to_string));
        } else if let Some(rest) = line.strip_prefix("proj ") {
            let (pair, target) = rest.split_once("->").ok_or_else(|| err("expected `proj X -> Y`".into()))?;
            let target = target.trim();
            let labels: BTreeSet<String> = match target.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                Some(inner) => inner.split(',').map(str::trim).filter(|s| !s.is_empty()).map(Into::into).collect(),
                None => [target.to_string()].into(),
            };
            projection.insert(pair.trim().to_string(), labels);
        } else if let Some((lhs, rhs)) = line.split_once("->") {
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(err(format!("malformed left-hand side '{lhs}'")));
            }
            for alt in rhs.split('|') {
                let syms: Vec<String> = alt.split_whitespace().map(ToString::to_string).collect();
                match syms.as_slice() {
                    [] => return Err(GrammarError::EmptyProduction(lhs.into())),
                    [one] if one == "~" => g.productions.push((lhs.into(), Vec::new())),
                    _ => g.productions.push((lhs.into(), syms)),
                }
            }
        } else {
            return Err(err(format!("unrecognized line '{line}'")));
        }
    }
    if !projection.is_empty() {
        g.projection = Some(projection);
    }
    g.validate()?;
    Ok(g)
}

fn render_labels(ls: &BTreeSet<String>) -> String {
    if ls.len() == 1 {
        ls.iter().next().unwrap().clone()
    } else {
        let v: Vec<&str> = ls.iter().map(String::as_str).collect();
        format!("{{{}}}", v.join(","))
    }
}

pub fn write_grammar(g: &Grammar) -> String {
    let mut out = format!("start: {}\n", g.start.join(" "));
    if !g.terminals.is_empty() {
        out.push_str(&format!("terminals: {}\n", g.terminals.join(" ")));
    }
    for n in g.nonterminals() {
        let alts: Vec<String> =
            g.productions_of(&n).map(|r| if r.is_empty() { "~".to_string() } else { r.join(" ") }).collect();
        if !alts.is_empty() {
            out.push_str(&format!("{n} -> {}\n", alts.join(" | ")));
        }
    }
    if let Some(p) = &g.projection {
        for (k, v) in p {
            out.push_str(&format!("proj {k} -> {}\n", render_labels(v)));
        }
    }
    out
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_grammar(self))
    }
}

// ---------------------------------------------------------------------------
// Grammar to sentences

fn children_formula(x: &str, ys: &[String], labels: &[String]) -> Formula {
    let mut args = vec![Arg::Ind(Term::var(x))];
    args.extend(ys.iter().map(|y| Arg::Ind(Term::var(y.as_str()))));
    let body = Formula::conj(
        core::iter::once(Formula::call("Children", args))
            .chain(ys.iter().zip(labels).map(|(y, l)| Formula::pred(l, y))),
    );
    ys.iter().rev().fold(body, |acc, y| Formula::exists(y, acc))
}

/// The signature of the sentences produced by [`cfg_to_mso`]: one predicate per
/// grammar symbol.
pub fn grammar_signature(g: &Grammar) -> Signature {
    Signature::new(g.symbols())
}

/// Sentences whose finite models are exactly the derivation trees of `g`: every
/// nonterminal node has children matching one of its productions, terminal nodes
/// have no children, the root carries a start symbol, the symbols partition the
/// nodes and the node set is finite. The sentences use macros; expand them before
/// evaluating or compiling.
pub fn cfg_to_mso(g: &Grammar, max_arity: usize) -> Result<Vec<Formula>, GrammarError> {
    g.validate()?;
    for (l, r) in &g.productions {
        if r.len() > max_arity {
            return Err(GrammarError::ArityExceeded { lhs: l.clone(), length: r.len(), bound: max_arity });
        }
    }
    let mut out = Vec::new();
    for n in g.nonterminals() {
        let alts: Vec<Formula> = g
            .productions_of(&n)
            .map(|rhs| {
                let ys: Vec<String> = (1..=rhs.len()).map(|i| format!("y{i}")).collect();
                children_formula("x", &ys, rhs)
            })
            .collect();
        let body = if alts.is_empty() { Formula::False } else { Formula::disj(alts) };
        out.push(Formula::forall("x", Formula::implies(Formula::pred(&n, "x"), body)));
    }
    for t in &g.terminals {
        out.push(Formula::forall("x", Formula::implies(Formula::pred(t, "x"), children_formula("x", &[], &[]))));
    }
    let root = Formula::call("O", vec![Arg::Ind(Term::var("x"))]);
    let starts = Formula::disj(g.start.iter().map(|s| Formula::pred(s, "x")));
    out.push(Formula::forall("x", Formula::implies(root, starts)));
    let everything = Formula::forall("x", Formula::set("N", "x"));
    let mut args: Vec<Arg> = g.symbols().into_iter().map(Arg::Pred).collect();
    args.push(Arg::SetVar("N".into()));
    out.push(Formula::forall_set("N", Formula::implies(everything.clone(), Formula::call("Partition", args))));
    out.push(Formula::forall_set(
        "N",
        Formula::implies(everything, Formula::call("Finite", vec![Arg::SetVar("N".into())])),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Automaton to grammar

/// Grammar symbol for a label set: the label itself for singletons, `_` for the
/// empty set, labels joined by `+` otherwise.
pub fn symbol_name(labels: &BTreeSet<String>) -> String {
    if labels.is_empty() {
        "_".into()
    } else {
        let v: Vec<&str> = labels.iter().map(String::as_str).collect();
        v.join("+")
    }
}

fn pair_name(labels: &BTreeSet<String>, q: u32) -> String {
    format!("{}.q{q}", symbol_name(labels))
}

/// Builds a grammar of state-annotated trees from a deterministic automaton.
/// Its symbols are pairs `a.qN` of an automaton symbol and a state; a node
/// `a.qN` with children `b1.qM1 .. bk.qMk` is allowed when the automaton moves
/// from `a` with child states `M1 .. Mk` to `N`. Start symbols are the pairs with
/// final states. Only pairs that occur in some accepted tree are kept. The
/// projection maps each pair back to its label set.
pub fn automaton_to_cfg(aut: &TreeAutomaton) -> Result<Grammar, GrammarError> {
    if !aut.is_deterministic() {
        return Err(GrammarError::Automaton(AutomatonError::NotDeterministic));
    }
    let trans = aut.transitions();
    // pairs (symbol, state) some tree realizes
    let mut realized: BTreeSet<(usize, u32)> = BTreeSet::new();
    let mut reach = vec![false; aut.num_states()];
    let mut changed = true;
    while changed {
        changed = false;
        for (sym, kids, q) in &trans {
            if kids.iter().all(|&k| reach[k as usize]) && realized.insert((*sym, *q)) {
                reach[*q as usize] = true;
                changed = true;
            }
        }
    }
    let by_state = |q: u32| realized.iter().filter(move |(_, s)| *s == q).map(|(a, _)| *a);
    // productions for realized pairs, expanded over child symbol choices
    type Pair = (usize, u32);
    let mut prods: BTreeMap<Pair, Vec<Vec<Pair>>> = BTreeMap::new();
    for (sym, kids, q) in &trans {
        if !realized.contains(&(*sym, *q)) || !kids.iter().all(|&k| reach[k as usize]) {
            continue;
        }
        let choices: Vec<Vec<usize>> = kids.iter().map(|&k| by_state(k).collect()).collect();
        let mut idx = vec![0usize; kids.len()];
        let entry = prods.entry((*sym, *q)).or_default();
        loop {
            entry.push(kids.iter().enumerate().map(|(i, &k)| (choices[i][idx[i]], k)).collect());
            let mut i = kids.len();
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < choices[i].len() {
                    break;
                }
                idx[i] = 0;
            }
            if idx.iter().all(|&x| x == 0) {
                break;
            }
        }
    }
    // keep pairs reachable from the start pairs
    let starts: Vec<(usize, u32)> = realized.iter().copied().filter(|(_, q)| aut.is_final(*q)).collect();
    let mut useful: BTreeSet<(usize, u32)> = starts.iter().copied().collect();
    let mut stack = starts.clone();
    while let Some(p) = stack.pop() {
        for rhs in prods.get(&p).into_iter().flatten() {
            for c in rhs {
                if useful.insert(*c) {
                    stack.push(*c);
                }
            }
        }
    }
    let name = |(sym, q): (usize, u32)| pair_name(&aut.symbol_labels(sym), q);
    let mut g = Grammar { start: starts.iter().map(|&p| name(p)).collect(), ..Default::default() };
    let mut projection = BTreeMap::new();
    // order: by state, then symbol, so that start pairs come first for state 0
    let mut order: Vec<(usize, u32)> = useful.iter().copied().collect();
    order.sort_by_key(|&(sym, q)| (q, sym));
    for p in order {
        projection.insert(name(p), aut.symbol_labels(p.0));
        for rhs in &prods[&p] {
            g.productions.push((name(p), rhs.iter().map(|&c| name(c)).collect()));
        }
    }
    g.projection = Some(projection);
    if g.start.is_empty() {
        // empty language: keep the grammar well-formed with an unproductive start
        g.start.push("_.empty".into());
        g.productions.push(("_.empty".into(), vec!["_.empty".into()]));
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Derivation trees

/// Derivation trees of `g` with at most `max_depth` levels of nodes, ordered by
/// depth, then start symbol, then production order.
pub fn enumerate_derivations(g: &Grammar, max_depth: usize) -> Result<Vec<LabeledTree>, GrammarError> {
    enumerate_derivations_capped(g, max_depth, DEFAULT_DERIVATION_CAP)
}

pub fn enumerate_derivations_capped(
    g: &Grammar,
    max_depth: usize,
    cap: usize,
) -> Result<Vec<LabeledTree>, GrammarError> {
    g.validate()?;
    let mut e = Enumerator { g, cap, memo: HashMap::new() };
    let mut out = Vec::new();
    for s in &g.start {
        for t in e.by_depth(s, max_depth)? {
            if out.len() >= cap {
                return Err(GrammarError::TooManyDerivations(cap));
            }
            out.push(t);
        }
    }
    out.sort_by_key(LabeledTree::depth);
    Ok(out)
}

/// Derivation trees of `g` with at most `max_nodes` nodes, ordered by size, then
/// start symbol, then production order.
pub fn enumerate_by_size(g: &Grammar, max_nodes: usize, cap: usize) -> Result<Vec<LabeledTree>, GrammarError> {
    g.validate()?;
    let mut e = Enumerator { g, cap, memo: HashMap::new() };
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        for s in &g.start {
            for t in e.by_size(s, n)? {
                if out.len() >= cap {
                    return Err(GrammarError::TooManyDerivations(cap));
                }
                out.push(t);
            }
        }
    }
    Ok(out)
}

struct Enumerator<'g> {
    g: &'g Grammar,
    cap: usize,
    memo: HashMap<(String, usize, bool), Vec<LabeledTree>>,
}

impl Enumerator<'_> {
    /// Trees rooted in `sym` of depth at most `d`.
    fn by_depth(&mut self, sym: &str, d: usize) -> Result<Vec<LabeledTree>, GrammarError> {
        if d == 0 {
            return Ok(Vec::new());
        }
        if self.g.is_terminal(sym) {
            return Ok(vec![LabeledTree::leaf([sym])]);
        }
        let key = (sym.to_string(), d, false);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let mut out = Vec::new();
        let rhss: Vec<Vec<String>> = self.g.productions_of(sym).map(<[String]>::to_vec).collect();
        for rhs in rhss {
            let mut kids = Vec::new();
            for c in &rhs {
                kids.push(self.by_depth(c, d - 1)?);
            }
            self.combine(sym, &kids, &mut out)?;
        }
        self.memo.insert(key, out.clone());
        Ok(out)
    }

    /// Trees rooted in `sym` with exactly `n` nodes.
    fn by_size(&mut self, sym: &str, n: usize) -> Result<Vec<LabeledTree>, GrammarError> {
        if n == 0 {
            return Ok(Vec::new());
        }
        if self.g.is_terminal(sym) {
            return Ok(if n == 1 { vec![LabeledTree::leaf([sym])] } else { Vec::new() });
        }
        let key = (sym.to_string(), n, true);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let mut out = Vec::new();
        let rhss: Vec<Vec<String>> = self.g.productions_of(sym).map(<[String]>::to_vec).collect();
        for rhs in rhss {
            if rhs.is_empty() {
                if n == 1 {
                    out.push(LabeledTree::leaf([sym]));
                }
                continue;
            }
            let mut sizes = vec![1usize; rhs.len()];
            self.split_sizes(sym, &rhs, n - 1, 0, &mut sizes, &mut out)?;
        }
        self.memo.insert(key, out.clone());
        Ok(out)
    }

    fn split_sizes(
        &mut self,
        sym: &str,
        rhs: &[String],
        left: usize,
        i: usize,
        sizes: &mut Vec<usize>,
        out: &mut Vec<LabeledTree>,
    ) -> Result<(), GrammarError> {
        if i == rhs.len() {
            if left != 0 {
                return Ok(());
            }
            let mut kids = Vec::new();
            for (c, &s) in rhs.iter().zip(sizes.iter()) {
                kids.push(self.by_size(c, s)?);
            }
            return self.combine(sym, &kids, out);
        }
        let remaining = rhs.len() - i - 1;
        if left < remaining + 1 {
            return Ok(());
        }
        for s in 1..=left - remaining {
            sizes[i] = s;
            self.split_sizes(sym, rhs, left - s, i + 1, sizes, out)?;
        }
        Ok(())
    }

    fn combine(&self, sym: &str, kids: &[Vec<LabeledTree>], out: &mut Vec<LabeledTree>) -> Result<(), GrammarError> {
        if kids.is_empty() {
            out.push(LabeledTree::leaf([sym]));
            return Ok(());
        }
        if kids.iter().any(Vec::is_empty) {
            return Ok(());
        }
        let mut idx = vec![0usize; kids.len()];
        loop {
            if out.len() >= self.cap {
                return Err(GrammarError::TooManyDerivations(self.cap));
            }
            let children: Vec<LabeledTree> = idx.iter().enumerate().map(|(i, &j)| kids[i][j].clone()).collect();
            out.push(LabeledTree::node([sym], children));
            let mut i = kids.len();
            loop {
                if i == 0 {
                    return Ok(());
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < kids[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

/// True when `t` is a derivation tree of `g`.
pub fn is_derivation(g: &Grammar, t: &LabeledTree) -> bool {
    let single = |i: usize| {
        let ls = &t.node_at(i).labels;
        (ls.len() == 1 && t.node_at(i).constants.is_empty()).then(|| ls.iter().next().unwrap().clone())
    };
    let Some(root) = single(0) else { return false };
    if !g.start.contains(&root) {
        return false;
    }
    (0..t.len()).all(|i| {
        let Some(sym) = single(i) else { return false };
        let kids: Option<Vec<String>> = t.children(i).iter().map(|&c| single(c)).collect();
        let Some(kids) = kids else { return false };
        if g.is_terminal(&sym) {
            kids.is_empty()
        } else {
            g.productions_of(&sym).any(|r| r == kids.as_slice())
        }
    })
}
