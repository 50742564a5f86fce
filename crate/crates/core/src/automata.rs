//! Bottom-up finite tree automata over label-set alphabets.
//!
//! An alphabet is a list of symbols, each a subset of an ordered bit universe
//! (predicate names, and during compilation variable marks). By default the
//! symbols are the whole powerset of the universe, in mask order; an explicit
//! restricted list may be given instead. Transitions are stored in dense tables,
//! one per arity `k <= max_arity`, indexed by the symbol and the tuple of child
//! states. A node with `k` children labeled `a` in states `q1 .. qk` moves to
//! `δ(a, q1 .. qk)`; the tree is accepted when the root ends in a final state.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::hash::Hash;

use hashbrown::HashMap;

use crate::tree::{parse_tree, Address, LabeledTree};
use crate::DEFAULT_STATE_CAP;

const UNDEF: u32 = u32::MAX;

/// Largest number of table cells a single automaton may hold.
pub const MAX_TABLE_CELLS: usize = 1 << 25;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AutomatonError {
    AlphabetMismatch(String),
    UnknownBit(String),
    TooManyBits(usize),
    StateCap(usize),
    TableTooLarge { states: usize, arity: usize },
    NotDeterministic,
    NotTotal { symbol: String, children: Vec<u32> },
    LabelNotInAlphabet(String),
    ArityExceeded { children: usize, bound: usize },
    InvalidState(u32),
    Parse { line: usize, message: String },
}

impl fmt::Display for AutomatonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutomatonError::AlphabetMismatch(m) => write!(f, "alphabet mismatch: {m}"),
            AutomatonError::UnknownBit(b) => write!(f, "bit {b} is not in the alphabet"),
            AutomatonError::TooManyBits(n) => write!(f, "{n} bits exceed the supported maximum of 64"),
            AutomatonError::StateCap(cap) => write!(f, "state cap of {cap} exceeded"),
            AutomatonError::TableTooLarge { states, arity } => write!(
                f,
                "transition table for {states} states at arity {arity} exceeds {MAX_TABLE_CELLS} cells"
            ),
            AutomatonError::NotDeterministic => f.write_str("operation needs a deterministic automaton"),
            AutomatonError::NotTotal { symbol, children } => {
                write!(f, "no transition for {symbol} with children {children:?}")
            }
            AutomatonError::LabelNotInAlphabet(l) => write!(f, "label set {l} is not in the alphabet"),
            AutomatonError::ArityExceeded { children, bound } => {
                write!(f, "node with {children} children exceeds the arity bound {bound}")
            }
            AutomatonError::InvalidState(q) => write!(f, "state {q} is out of range"),
            AutomatonError::Parse { line, message } => write!(f, "automaton file line {line}: {message}"),
        }
    }
}

impl core::error::Error for AutomatonError {}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Table {
    Det(Vec<u32>),
    Nondet(Vec<Vec<u32>>),
}

/// How [`TreeAutomaton::new`] treats the given transitions.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Kind {
    /// Deterministic and total: every symbol and child tuple must have a transition.
    Total,
    /// Deterministic; missing transitions go to an added sink state.
    Partial,
    /// Nondeterministic.
    Nondet,
}

/// One explicitly listed transition: symbol labels, child states, target state.
pub type Transition = (BTreeSet<String>, Vec<u32>, u32);

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TreeAutomaton {
    bits: Vec<String>,
    symbols: Vec<u64>,
    full: bool,
    max_arity: usize,
    states: usize,
    finals: Vec<bool>,
    tables: Vec<Table>,
    state_cap: usize,
}

/// The result of a deterministic run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Run {
    pub accepted: bool,
    /// State of each node, indexed by preorder position.
    pub states: Vec<u32>,
    addresses: Vec<Address>,
}

impl Run {
    pub fn state_at(&self, a: &Address) -> Option<u32> {
        self.addresses.iter().position(|b| b == a).map(|i| self.states[i])
    }

    pub fn by_address(&self) -> Vec<(Address, u32)> {
        self.addresses.iter().cloned().zip(self.states.iter().copied()).collect()
    }

    /// States in breadth-first (level, then left-to-right) order.
    pub fn breadth_first(&self) -> Vec<u32> {
        let mut v: Vec<(usize, &Address, u32)> =
            self.addresses.iter().zip(&self.states).map(|(a, q)| (a.0.len(), a, *q)).collect();
        v.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        v.into_iter().map(|(_, _, q)| q).collect()
    }
}

fn checked_cells(symbols: usize, states: usize, k: usize) -> Result<usize, AutomatonError> {
    (states as u128)
        .checked_pow(k as u32)
        .map(|c| c * symbols as u128)
        .filter(|c| *c <= MAX_TABLE_CELLS as u128)
        .map(|c| c as usize)
        .ok_or(AutomatonError::TableTooLarge { states, arity: k })
}

fn encode(tuple: &[u32], q: usize) -> usize {
    tuple.iter().fold(0usize, |acc, &s| acc * q + s as usize)
}

fn decode(mut code: usize, k: usize, q: usize, out: &mut [u32]) {
    for i in (0..k).rev() {
        out[i] = (code % q) as u32;
        code /= q;
    }
}

/// Iterates over all tuples in `ranges` (half-open), last position fastest.
fn for_each_tuple(ranges: &[(u32, u32)], mut f: impl FnMut(&[u32])) {
    if ranges.iter().any(|(a, b)| a >= b) {
        return;
    }
    let mut t: Vec<u32> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&t);
        let mut i = t.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < ranges[i].1 {
                break;
            }
            t[i] = ranges[i].0;
        }
    }
}

impl TreeAutomaton {
    /// Builds an automaton from explicit transitions.
    ///
    /// `symbols` restricts the alphabet to the listed label sets; `None` means the
    /// full powerset of `bits`.
    pub fn new(
        bits: Vec<String>,
        symbols: Option<Vec<BTreeSet<String>>>,
        max_arity: usize,
        states: usize,
        finals: &[u32],
        transitions: &[Transition],
        kind: Kind,
    ) -> Result<Self, AutomatonError> {
        if bits.len() > 64 {
            return Err(AutomatonError::TooManyBits(bits.len()));
        }
        let mut a = TreeAutomaton {
            bits,
            symbols: Vec::new(),
            full: symbols.is_none(),
            max_arity,
            states,
            finals: vec![false; states],
            tables: Vec::new(),
            state_cap: DEFAULT_STATE_CAP,
        };
        a.symbols = match symbols {
            None => {
                if a.bits.len() > 20 {
                    return Err(AutomatonError::TooManyBits(a.bits.len()));
                }
                (0..1u64 << a.bits.len()).collect()
            }
            Some(list) => {
                let mut out = Vec::new();
                for s in &list {
                    let m = a.mask_of(s)?;
                    if out.contains(&m) {
                        return Err(AutomatonError::AlphabetMismatch(format!(
                            "symbol {} listed twice",
                            a.render_mask(m)
                        )));
                    }
                    out.push(m);
                }
                out
            }
        };
        for &f in finals {
            if f as usize >= states {
                return Err(AutomatonError::InvalidState(f));
            }
            a.finals[f as usize] = true;
        }
        let det = kind != Kind::Nondet;
        for k in 0..=max_arity {
            let cells = checked_cells(a.symbols.len(), states, k)?;
            a.tables.push(if det { Table::Det(vec![UNDEF; cells]) } else { Table::Nondet(vec![Vec::new(); cells]) });
        }
        for (labels, children, target) in transitions {
            if children.len() > max_arity {
                return Err(AutomatonError::ArityExceeded { children: children.len(), bound: max_arity });
            }
            for &q in children.iter().chain(core::iter::once(target)) {
                if q as usize >= states {
                    return Err(AutomatonError::InvalidState(q));
                }
            }
            let sym = a.symbol_index(labels)?;
            let idx = a.index(sym, children);
            match &mut a.tables[children.len()] {
                Table::Det(t) => {
                    if t[idx] != UNDEF && t[idx] != *target {
                        return Err(AutomatonError::NotDeterministic);
                    }
                    t[idx] = *target;
                }
                Table::Nondet(t) => {
                    if !t[idx].contains(target) {
                        t[idx].push(*target);
                        t[idx].sort_unstable();
                    }
                }
            }
        }
        match kind {
            Kind::Total => {
                for k in 0..=max_arity {
                    if let Table::Det(t) = &a.tables[k] {
                        if let Some(i) = t.iter().position(|&x| x == UNDEF) {
                            let (sym, tuple) = a.split_index(k, i);
                            return Err(AutomatonError::NotTotal {
                                symbol: a.render_mask(a.symbols[sym]),
                                children: tuple,
                            });
                        }
                    }
                }
            }
            Kind::Partial => a.totalize()?,
            Kind::Nondet => {}
        }
        Ok(a)
    }

    /// Builds a deterministic automaton over the full powerset of `bits` from a
    /// transition function taking the symbol's bit mask and the child states.
    pub fn from_fn(
        bits: Vec<String>,
        max_arity: usize,
        states: usize,
        finals: &[u32],
        step: impl Fn(u64, &[u32]) -> u32,
    ) -> Result<Self, AutomatonError> {
        if bits.len() > 20 {
            return Err(AutomatonError::TooManyBits(bits.len()));
        }
        let symbols: Vec<u64> = (0..1u64 << bits.len()).collect();
        let mut tables = Vec::with_capacity(max_arity + 1);
        for k in 0..=max_arity {
            let per = states.pow(k as u32);
            let mut t = vec![0u32; checked_cells(symbols.len(), states, k)?];
            let mut tuple = vec![0u32; k];
            for &m in &symbols {
                for code in 0..per {
                    decode(code, k, states, &mut tuple);
                    let q = step(m, &tuple);
                    if q as usize >= states {
                        return Err(AutomatonError::InvalidState(q));
                    }
                    t[m as usize * per + code] = q;
                }
            }
            tables.push(Table::Det(t));
        }
        let mut fin = vec![false; states];
        for &f in finals {
            *fin.get_mut(f as usize).ok_or(AutomatonError::InvalidState(f))? = true;
        }
        Ok(TreeAutomaton {
            bits,
            symbols,
            full: true,
            max_arity,
            states,
            finals: fin,
            tables,
            state_cap: DEFAULT_STATE_CAP,
        })
    }

    /// Same automaton, with a different cap on states created by later operations.
    pub fn with_state_cap(mut self, cap: usize) -> Self {
        self.state_cap = cap;
        self
    }

    pub fn state_cap(&self) -> usize {
        self.state_cap
    }

    pub fn bits(&self) -> &[String] {
        &self.bits
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn is_deterministic(&self) -> bool {
        self.tables.iter().all(|t| matches!(t, Table::Det(_)))
    }

    /// True when the alphabet is the full powerset of the bit universe.
    pub fn has_full_alphabet(&self) -> bool {
        self.full
    }

    pub fn finals(&self) -> Vec<u32> {
        (0..self.states as u32).filter(|&q| self.finals[q as usize]).collect()
    }

    pub fn is_final(&self, q: u32) -> bool {
        self.finals[q as usize]
    }

    pub fn symbol_labels(&self, sym: usize) -> BTreeSet<String> {
        let m = self.symbols[sym];
        self.bits.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, b)| b.clone()).collect()
    }

    fn render_mask(&self, m: u64) -> String {
        let labels: Vec<&str> =
            self.bits.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, b)| b.as_str()).collect();
        let mut sorted = labels;
        sorted.sort_unstable();
        format!("{{{}}}", sorted.join(","))
    }

    fn mask_of(&self, labels: &BTreeSet<String>) -> Result<u64, AutomatonError> {
        let mut m = 0u64;
        for l in labels {
            match self.bits.iter().position(|b| b == l) {
                Some(i) => m |= 1 << i,
                None => return Err(AutomatonError::UnknownBit(l.clone())),
            }
        }
        Ok(m)
    }

    fn symbol_of_mask(&self, m: u64) -> Option<usize> {
        if self.full {
            Some(m as usize)
        } else {
            self.symbols.iter().position(|&s| s == m)
        }
    }

    /// Index of the symbol with exactly these labels.
    pub fn symbol_index(&self, labels: &BTreeSet<String>) -> Result<usize, AutomatonError> {
        let render = || {
            let v: Vec<&str> = labels.iter().map(String::as_str).collect();
            format!("{{{}}}", v.join(","))
        };
        let m = self.mask_of(labels).map_err(|_| AutomatonError::LabelNotInAlphabet(render()))?;
        self.symbol_of_mask(m).ok_or_else(|| AutomatonError::LabelNotInAlphabet(render()))
    }

    #[inline]
    fn index(&self, sym: usize, tuple: &[u32]) -> usize {
        let q = self.states;
        let per = q.pow(tuple.len() as u32);
        sym * per + encode(tuple, q)
    }

    fn split_index(&self, k: usize, i: usize) -> (usize, Vec<u32>) {
        let per = self.states.pow(k as u32).max(1);
        let mut tuple = vec![0; k];
        decode(i % per, k, self.states, &mut tuple);
        (i / per, tuple)
    }

    /// Successor states for a symbol and child tuple.
    pub fn step(&self, sym: usize, tuple: &[u32]) -> Vec<u32> {
        let idx = self.index(sym, tuple);
        match &self.tables[tuple.len()] {
            Table::Det(t) if t[idx] == UNDEF => Vec::new(),
            Table::Det(t) => vec![t[idx]],
            Table::Nondet(t) => t[idx].clone(),
        }
    }

    #[inline]
    fn det_step(&self, sym: usize, tuple: &[u32]) -> u32 {
        match &self.tables[tuple.len()] {
            Table::Det(t) => t[self.index(sym, tuple)],
            Table::Nondet(_) => unreachable!("det_step on a nondeterministic automaton"),
        }
    }

    /// Every defined transition as (symbol index, children, target), by arity,
    /// symbol and child tuple.
    pub fn transitions(&self) -> Vec<(usize, Vec<u32>, u32)> {
        let mut out = Vec::new();
        for k in 0..=self.max_arity {
            let per = self.states.pow(k as u32);
            let mut tuple = vec![0u32; k];
            for sym in 0..self.symbols.len() {
                for code in 0..per {
                    decode(code, k, self.states, &mut tuple);
                    let idx = sym * per + code;
                    match &self.tables[k] {
                        Table::Det(t) => {
                            if t[idx] != UNDEF {
                                out.push((sym, tuple.clone(), t[idx]));
                            }
                        }
                        Table::Nondet(t) => {
                            for &q in &t[idx] {
                                out.push((sym, tuple.clone(), q));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn totalize(&mut self) -> Result<(), AutomatonError> {
        let needs = self.tables.iter().any(|t| match t {
            Table::Det(t) => t.contains(&UNDEF),
            Table::Nondet(_) => false,
        });
        if !needs {
            return Ok(());
        }
        let old = self.clone();
        let sink = self.states as u32;
        self.states += 1;
        self.finals.push(false);
        for k in 0..=self.max_arity {
            let cells = checked_cells(self.symbols.len(), self.states, k)?;
            let mut t = vec![sink; cells];
            let mut tuple = vec![0u32; k];
            for (i, cell) in t.iter_mut().enumerate() {
                let (sym, rest) = (i / self.states.pow(k as u32), i % self.states.pow(k as u32));
                decode(rest, k, self.states, &mut tuple);
                if tuple.iter().all(|&q| q != sink) {
                    let v = old.det_step(sym, &tuple);
                    if v != UNDEF {
                        *cell = v;
                    }
                }
            }
            self.tables[k] = Table::Det(t);
        }
        Ok(())
    }

    fn symbol_for_node(&self, tree: &LabeledTree, i: usize) -> Result<usize, AutomatonError> {
        let node = tree.node_at(i);
        let k = node.children.len();
        if k > self.max_arity {
            return Err(AutomatonError::ArityExceeded { children: k, bound: self.max_arity });
        }
        let mut labels = node.labels.clone();
        labels.extend(node.constants.iter().map(|c| format!("@{c}")));
        self.symbol_index(&labels)
    }

    /// The unique run of a deterministic automaton.
    pub fn run(&self, tree: &LabeledTree) -> Result<Run, AutomatonError> {
        if !self.is_deterministic() {
            return Err(AutomatonError::NotDeterministic);
        }
        let mut states = vec![0u32; tree.len()];
        let mut tuple = Vec::new();
        for i in (0..tree.len()).rev() {
            let sym = self.symbol_for_node(tree, i)?;
            tuple.clear();
            tuple.extend(tree.children(i).iter().map(|&c| states[c]));
            states[i] = self.det_step(sym, &tuple);
        }
        Ok(Run { accepted: self.finals[states[0] as usize], states, addresses: tree.addresses() })
    }

    /// Acceptance for deterministic and nondeterministic automata alike.
    pub fn accepts(&self, tree: &LabeledTree) -> Result<bool, AutomatonError> {
        if self.is_deterministic() {
            return Ok(self.run(tree)?.accepted);
        }
        let mut sets: Vec<Vec<u32>> = vec![Vec::new(); tree.len()];
        for i in (0..tree.len()).rev() {
            let sym = self.symbol_for_node(tree, i)?;
            let kids: Vec<&Vec<u32>> = tree.children(i).iter().map(|&c| &sets[c]).collect();
            let mut out = BTreeSet::new();
            let ranges: Vec<(u32, u32)> = kids.iter().map(|s| (0, s.len() as u32)).collect();
            let mut tuple = vec![0u32; kids.len()];
            for_each_tuple(&ranges, |pick| {
                for (j, &p) in pick.iter().enumerate() {
                    tuple[j] = kids[j][p as usize];
                }
                out.extend(self.step(sym, &tuple));
            });
            sets[i] = out.into_iter().collect();
        }
        Ok(sets[0].iter().any(|&q| self.finals[q as usize]))
    }

    /// Builds the reachable part of a deterministic automaton whose states are
    /// abstract values `S`, discovered from the leaves upward.
    fn explore<S: Hash + Eq + Clone>(
        &self,
        mut step: impl FnMut(usize, &[&S]) -> S,
        accept: impl Fn(&S) -> bool,
    ) -> Result<TreeAutomaton, AutomatonError> {
        let nsyms = self.symbols.len();
        let mut states: Vec<S> = Vec::new();
        let mut index: HashMap<S, u32> = HashMap::new();
        let cap = self.state_cap;
        let mut intern = |s: S, states: &mut Vec<S>| -> Result<u32, AutomatonError> {
            if let Some(&i) = index.get(&s) {
                return Ok(i);
            }
            if states.len() >= cap {
                return Err(AutomatonError::StateCap(cap));
            }
            let i = states.len() as u32;
            index.insert(s.clone(), i);
            states.push(s);
            Ok(i)
        };
        // entries[k]: (child tuple, target per symbol)
        let mut entries: Vec<Vec<(Vec<u32>, Vec<u32>)>> = vec![Vec::new(); self.max_arity + 1];
        let mut leaf = Vec::with_capacity(nsyms);
        for sym in 0..nsyms {
            let s = step(sym, &[]);
            leaf.push(intern(s, &mut states)?);
        }
        entries[0].push((Vec::new(), leaf));
        let mut m0 = 0u32;
        loop {
            let m1 = states.len() as u32;
            if m1 == m0 {
                break;
            }
            for (k, bucket) in entries.iter_mut().enumerate().skip(1) {
                checked_cells(nsyms, m1 as usize, k)?;
                for p in 0..k {
                    let ranges: Vec<(u32, u32)> = (0..k)
                        .map(|i| match i.cmp(&p) {
                            core::cmp::Ordering::Less => (0, m0),
                            core::cmp::Ordering::Equal => (m0, m1),
                            core::cmp::Ordering::Greater => (0, m1),
                        })
                        .collect();
                    let mut pending: Vec<Vec<u32>> = Vec::new();
                    for_each_tuple(&ranges, |t| pending.push(t.to_vec()));
                    for tuple in pending {
                        let mut targets = Vec::with_capacity(nsyms);
                        for sym in 0..nsyms {
                            let s = {
                                let kids: Vec<&S> = tuple.iter().map(|&q| &states[q as usize]).collect();
                                step(sym, &kids)
                            };
                            targets.push(intern(s, &mut states)?);
                        }
                        bucket.push((tuple, targets));
                    }
                }
            }
            m0 = m1;
        }
        let q = states.len();
        let mut tables = Vec::with_capacity(self.max_arity + 1);
        for (k, list) in entries.into_iter().enumerate() {
            let per = q.pow(k as u32);
            let mut t = vec![UNDEF; checked_cells(nsyms, q, k)?];
            for (tuple, targets) in list {
                let code = encode(&tuple, q);
                for (sym, target) in targets.into_iter().enumerate() {
                    t[sym * per + code] = target;
                }
            }
            tables.push(Table::Det(t));
        }
        Ok(TreeAutomaton {
            bits: self.bits.clone(),
            symbols: self.symbols.clone(),
            full: self.full,
            max_arity: self.max_arity,
            states: q,
            finals: states.iter().map(&accept).collect(),
            tables,
            state_cap: self.state_cap,
        })
    }

    /// Subset construction over reachable subsets. The result is total; the empty
    /// subset, when reachable, acts as the sink.
    pub fn determinize(&self) -> Result<TreeAutomaton, AutomatonError> {
        let mut scratch = Vec::new();
        self.explore(
            |sym, kids: &[&Vec<u32>]| {
                let mut out = BTreeSet::new();
                let ranges: Vec<(u32, u32)> = kids.iter().map(|s| (0, s.len() as u32)).collect();
                scratch.resize(kids.len(), 0);
                for_each_tuple(&ranges, |pick| {
                    for (j, &p) in pick.iter().enumerate() {
                        scratch[j] = kids[j][p as usize];
                    }
                    out.extend(self.step(sym, &scratch));
                });
                out.into_iter().collect::<Vec<u32>>()
            },
            |s| s.iter().any(|&q| self.finals[q as usize]),
        )
    }

    fn ensure_det(&self) -> Result<TreeAutomaton, AutomatonError> {
        if self.is_deterministic() {
            Ok(self.clone())
        } else {
            self.determinize()
        }
    }

    /// Brings two automata to a common bit universe (the bits of `self` followed by
    /// the missing bits of `other`).
    pub fn align(&self, other: &TreeAutomaton) -> Result<(TreeAutomaton, TreeAutomaton), AutomatonError> {
        if self.max_arity != other.max_arity {
            return Err(AutomatonError::AlphabetMismatch(format!(
                "arity bounds {} and {} differ",
                self.max_arity, other.max_arity
            )));
        }
        if self.bits == other.bits {
            if self.symbols != other.symbols {
                return Err(AutomatonError::AlphabetMismatch("symbol lists differ".into()));
            }
            return Ok((self.clone(), other.clone()));
        }
        let mut bits = self.bits.clone();
        for b in &other.bits {
            if !bits.contains(b) {
                bits.push(b.clone());
            }
        }
        let a = self.cylindrify(&bits)?;
        let b = other.cylindrify(&bits)?;
        if a.symbols != b.symbols {
            return Err(AutomatonError::AlphabetMismatch("symbol lists differ".into()));
        }
        Ok((a, b))
    }

    /// Re-expresses the automaton over a larger bit universe whose extra bits it
    /// ignores. Only full-powerset alphabets can be widened.
    pub fn cylindrify(&self, bits: &[String]) -> Result<TreeAutomaton, AutomatonError> {
        if bits == self.bits.as_slice() {
            return Ok(self.clone());
        }
        if bits.len() > 20 {
            return Err(AutomatonError::TooManyBits(bits.len()));
        }
        for b in &self.bits {
            if !bits.contains(b) {
                return Err(AutomatonError::AlphabetMismatch(format!("bit {b} missing from the new universe")));
            }
        }
        if !self.full {
            return Err(AutomatonError::AlphabetMismatch(
                "an automaton over a restricted symbol list cannot change its bit universe".into(),
            ));
        }
        let pos: Vec<usize> = self.bits.iter().map(|b| bits.iter().position(|c| c == b).unwrap()).collect();
        let symbols: Vec<u64> = (0..1u64 << bits.len()).collect();
        let old_sym: Vec<usize> = symbols
            .iter()
            .map(|&m| pos.iter().enumerate().fold(0usize, |acc, (i, &p)| acc | (((m >> p) & 1) as usize) << i))
            .collect();
        let mut tables = Vec::new();
        for k in 0..=self.max_arity {
            let per = self.states.pow(k as u32);
            checked_cells(symbols.len(), self.states, k)?;
            tables.push(match &self.tables[k] {
                Table::Det(t) => {
                    Table::Det(old_sym.iter().flat_map(|&s| t[s * per..(s + 1) * per].iter().copied()).collect())
                }
                Table::Nondet(t) => {
                    Table::Nondet(old_sym.iter().flat_map(|&s| t[s * per..(s + 1) * per].iter().cloned()).collect())
                }
            });
        }
        Ok(TreeAutomaton {
            bits: bits.to_vec(),
            symbols,
            full: true,
            max_arity: self.max_arity,
            states: self.states,
            finals: self.finals.clone(),
            tables,
            state_cap: self.state_cap,
        })
    }

    fn product(&self, other: &TreeAutomaton, both: bool) -> Result<TreeAutomaton, AutomatonError> {
        let (a, b) = self.align(other)?;
        let (a, b) = (a.ensure_det()?, b.ensure_det()?);
        let mut ta = Vec::new();
        let mut tb = Vec::new();
        a.explore(
            |sym, kids: &[&(u32, u32)]| {
                ta.clear();
                tb.clear();
                ta.extend(kids.iter().map(|p| p.0));
                tb.extend(kids.iter().map(|p| p.1));
                (a.det_step(sym, &ta), b.det_step(sym, &tb))
            },
            |&(p, q)| {
                let (fp, fq) = (a.finals[p as usize], b.finals[q as usize]);
                if both {
                    fp && fq
                } else {
                    fp || fq
                }
            },
        )
    }

    pub fn intersect(&self, other: &TreeAutomaton) -> Result<TreeAutomaton, AutomatonError> {
        self.product(other, true)
    }

    pub fn union(&self, other: &TreeAutomaton) -> Result<TreeAutomaton, AutomatonError> {
        self.product(other, false)
    }

    /// Language complement relative to all trees over the alphabet within the arity bound.
    pub fn complement(&self) -> Result<TreeAutomaton, AutomatonError> {
        let mut a = self.ensure_det()?;
        for f in a.finals.iter_mut() {
            *f = !*f;
        }
        Ok(a)
    }

    /// Erases `bit` from the alphabet. The result is nondeterministic and accepts a
    /// tree iff some way of adding the bit to its nodes is accepted.
    pub fn project(&self, bit: &str) -> Result<TreeAutomaton, AutomatonError> {
        let b = self.bits.iter().position(|x| x == bit).ok_or_else(|| AutomatonError::UnknownBit(bit.into()))?;
        let drop_bit = |m: u64| {
            let low = m & ((1u64 << b) - 1);
            let high = (m >> (b + 1)) << b;
            low | high
        };
        let mut bits = self.bits.clone();
        bits.remove(b);
        let (symbols, full) = if self.full {
            ((0..1u64 << bits.len()).collect::<Vec<u64>>(), true)
        } else {
            let mut v: Vec<u64> = self.symbols.iter().map(|&m| drop_bit(m)).collect();
            v.sort_unstable();
            v.dedup();
            (v, false)
        };
        let new_sym = |m: u64| -> usize {
            if full {
                m as usize
            } else {
                symbols.iter().position(|&s| s == m).unwrap()
            }
        };
        let mut tables = Vec::new();
        for k in 0..=self.max_arity {
            let per = self.states.pow(k as u32);
            let mut t = vec![Vec::new(); checked_cells(symbols.len(), self.states, k)?];
            for (sym, &m) in self.symbols.iter().enumerate() {
                let ns = new_sym(drop_bit(m));
                for code in 0..per {
                    let targets: Vec<u32> = match &self.tables[k] {
                        Table::Det(d) => {
                            let v = d[sym * per + code];
                            if v == UNDEF {
                                Vec::new()
                            } else {
                                vec![v]
                            }
                        }
                        Table::Nondet(n) => n[sym * per + code].clone(),
                    };
                    let cell: &mut Vec<u32> = &mut t[ns * per + code];
                    for q in targets {
                        if let Err(pos) = cell.binary_search(&q) {
                            cell.insert(pos, q);
                        }
                    }
                }
            }
            tables.push(Table::Nondet(t));
        }
        Ok(TreeAutomaton {
            bits,
            symbols,
            full,
            max_arity: self.max_arity,
            states: self.states,
            finals: self.finals.clone(),
            tables,
            state_cap: self.state_cap,
        })
    }

    /// Reachability fixpoint: the states some tree can reach.
    pub fn reachable_states(&self) -> Vec<bool> {
        let mut reach = vec![false; self.states];
        let mut changed = true;
        let mut tuple = Vec::new();
        while changed {
            changed = false;
            for k in 0..=self.max_arity {
                let per = self.states.pow(k as u32);
                tuple.resize(k, 0);
                for code in 0..per {
                    decode(code, k, self.states, &mut tuple);
                    if !tuple.iter().all(|&q| reach[q as usize]) {
                        continue;
                    }
                    for sym in 0..self.symbols.len() {
                        let idx = sym * per + code;
                        let mut mark = |q: u32| {
                            if q != UNDEF && !reach[q as usize] {
                                reach[q as usize] = true;
                                changed = true;
                            }
                        };
                        match &self.tables[k] {
                            Table::Det(t) => mark(t[idx]),
                            Table::Nondet(t) => t[idx].iter().for_each(|&q| mark(q)),
                        }
                    }
                }
            }
        }
        reach
    }

    pub fn is_empty(&self) -> bool {
        let reach = self.reachable_states();
        !(0..self.states).any(|q| reach[q] && self.finals[q])
    }

    /// Moore partition refinement. The input must be deterministic; unreachable
    /// states are dropped first.
    pub fn minimize(&self) -> Result<TreeAutomaton, AutomatonError> {
        let a = self.ensure_det()?;
        // re-explore to keep only reachable states
        let a = a.explore(
            |sym, kids: &[&u32]| {
                let t: Vec<u32> = kids.iter().map(|&&q| q).collect();
                a.det_step(sym, &t)
            },
            |&q| a.finals[q as usize],
        )?;
        let q = a.states;
        let mut class: Vec<u32> = a.finals.iter().map(|&f| u32::from(f)).collect();
        let mut count = class.iter().collect::<BTreeSet<_>>().len();
        loop {
            let mut sigs: Vec<Vec<u32>> = (0..q).map(|s| vec![class[s]]).collect();
            let mut tuple = Vec::new();
            for k in 1..=a.max_arity {
                let per_other = q.pow(k as u32 - 1);
                tuple.resize(k, 0);
                for pos in 0..k {
                    for sym in 0..a.symbols.len() {
                        for other in 0..per_other {
                            let mut rest = vec![0u32; k - 1];
                            decode(other, k - 1, q, &mut rest);
                            for (s, sig) in sigs.iter_mut().enumerate() {
                                let mut r = rest.iter();
                                for (i, slot) in tuple.iter_mut().enumerate() {
                                    *slot = if i == pos { s as u32 } else { *r.next().unwrap() };
                                }
                                sig.push(class[a.det_step(sym, &tuple) as usize]);
                            }
                        }
                    }
                }
            }
            let mut ids: HashMap<&Vec<u32>, u32> = HashMap::new();
            let mut next = vec![0u32; q];
            for s in 0..q {
                let n = ids.len() as u32;
                next[s] = *ids.entry(&sigs[s]).or_insert(n);
            }
            let new_count = ids.len();
            class = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let nq = count;
        let mut tables = Vec::new();
        for k in 0..=a.max_arity {
            let per = nq.pow(k as u32);
            let old_per = q.pow(k as u32);
            let mut t = vec![UNDEF; checked_cells(a.symbols.len(), nq, k)?];
            let mut tuple = vec![0u32; k];
            for sym in 0..a.symbols.len() {
                for code in 0..old_per {
                    decode(code, k, q, &mut tuple);
                    let target = class[a.det_step(sym, &tuple) as usize];
                    let ct: Vec<u32> = tuple.iter().map(|&s| class[s as usize]).collect();
                    t[sym * per + encode(&ct, nq)] = target;
                }
            }
            tables.push(Table::Det(t));
        }
        let mut finals = vec![false; nq];
        for s in 0..q {
            if a.finals[s] {
                finals[class[s] as usize] = true;
            }
        }
        Ok(TreeAutomaton {
            bits: a.bits.clone(),
            symbols: a.symbols.clone(),
            full: a.full,
            max_arity: a.max_arity,
            states: nq,
            finals,
            tables,
            state_cap: a.state_cap,
        })
    }

    /// A smallest accepted tree; among those of that size, the one whose
    /// serialization is lexicographically least.
    pub fn witness(&self) -> Option<LabeledTree> {
        let q = self.states;
        // smallest tree size reaching each state
        let mut min_size = vec![usize::MAX; q];
        let mut changed = true;
        let all = self.transitions();
        while changed {
            changed = false;
            for (_, kids, target) in &all {
                let mut total = 1usize;
                for &c in kids {
                    total = total.saturating_add(min_size[c as usize]);
                }
                if total < min_size[*target as usize] {
                    min_size[*target as usize] = total;
                    changed = true;
                }
            }
        }
        let goal = (0..q).filter(|&s| self.finals[s]).map(|s| min_size[s]).min()?;
        if goal == usize::MAX {
            return None;
        }
        let labels: Vec<String> = (0..self.symbols.len())
            .map(|s| {
                // same order as the tree serializer: labels, then @constants
                let (consts, mut l): (Vec<String>, Vec<String>) =
                    self.symbol_labels(s).into_iter().partition(|b| b.starts_with('@'));
                l.extend(consts);
                format!("({{{}}}", l.join(","))
            })
            .collect();
        // best[s][n]: least serialization of an n-node tree reaching s
        let mut best: Vec<Vec<Option<String>>> = vec![vec![None; goal + 1]; q];
        for n in 1..=goal {
            for (sym, kids, target) in &all {
                let t = *target as usize;
                if min_size[t] > n || kids.iter().fold(1usize, |acc, &c| acc.saturating_add(min_size[c as usize])) > n {
                    continue;
                }
                let k = kids.len();
                if k == 0 {
                    if n == 1 {
                        let cand = format!("{})", labels[*sym]);
                        improve(&mut best[t][1], cand);
                    }
                    continue;
                }
                // split n - 1 nodes among the children
                let mut sizes = vec![0usize; k];
                let mut pending = Vec::new();
                split(n - 1, 0, kids, &min_size, &mut sizes, &mut |sizes| {
                    let mut s = labels[*sym].clone();
                    for (i, &c) in kids.iter().enumerate() {
                        match &best[c as usize][sizes[i]] {
                            Some(child) => {
                                s.push(' ');
                                s.push_str(child);
                            }
                            None => return,
                        }
                    }
                    s.push(')');
                    pending.push(s);
                });
                for s in pending {
                    improve(&mut best[t][n], s);
                }
            }
        }
        let text = (0..q).filter(|&s| self.finals[s]).filter_map(|s| best[s][goal].clone()).min()?;
        Some(parse_tree(&text, usize::MAX).expect("witness serialization parses"))
    }
}

fn improve(slot: &mut Option<String>, cand: String) {
    match slot {
        Some(cur) if *cur <= cand => {}
        _ => *slot = Some(cand),
    }
}

/// Calls `f` with every way of writing `total` as an ordered sum of per-child sizes
/// respecting each child's minimum.
fn split(total: usize, i: usize, kids: &[u32], min_size: &[usize], sizes: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if i == kids.len() {
        if total == 0 {
            f(sizes);
        }
        return;
    }
    let rest_min = kids[i + 1..].iter().fold(0usize, |acc, &c| acc.saturating_add(min_size[c as usize]));
    let lo = min_size[kids[i] as usize];
    if lo == usize::MAX || rest_min > total {
        return;
    }
    for s in lo..=total.saturating_sub(rest_min) {
        sizes[i] = s;
        split(total - s, i + 1, kids, min_size, sizes, f);
    }
}

// ---------------------------------------------------------------------------
// Text format

fn parse_label_set(s: &str) -> Option<BTreeSet<String>> {
    let inner = s.strip_prefix('{')?.strip_suffix('}')?;
    Some(inner.split(',').map(str::trim).filter(|x| !x.is_empty()).map(ToString::to_string).collect())
}

/// Parses the automaton text format:
///
/// ```text
/// arity: 2
/// bits: A B D a
/// symbols: {A} {B} {D} {a}     # optional; default is every subset of the bits
/// kind: det                    # det (total), partial (sink added) or nondet
/// states: 5
/// final: 0
/// trans {B} () -> 1
/// trans {A} (1 2) -> 0
/// ```
pub fn parse_automaton(text: &str) -> Result<TreeAutomaton, AutomatonError> {
    let mut arity = None;
    let mut bits: Option<Vec<String>> = None;
    let mut symbols = None;
    let mut kind = Kind::Total;
    let mut states = None;
    let mut finals = Vec::new();
    let mut trans = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| AutomatonError::Parse { line: i + 1, message: m };
        let num = |s: &str| s.trim().parse::<u32>().map_err(|_| err(format!("expected a number, found '{s}'")));
        if let Some(rest) = line.strip_prefix("trans") {
            let (lhs, target) = rest.split_once("->").ok_or_else(|| err("missing '->'".into()))?;
            let lhs = lhs.trim();
            let close = lhs.find('}').ok_or_else(|| err("missing label set".into()))?;
            let labels = parse_label_set(&lhs[..=close]).ok_or_else(|| err("malformed label set".into()))?;
            let tuple = lhs[close + 1..].trim();
            let inner = tuple
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| err("child states must be written as (q1 q2 ...)".into()))?;
            let kids = inner.split_whitespace().map(num).collect::<Result<Vec<u32>, _>>()?;
            trans.push((labels, kids, num(target)?));
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| err(format!("unrecognized line '{line}'")))?;
        let value = value.trim();
        match key.trim() {
            "arity" => arity = Some(num(value)? as usize),
            "bits" => bits = Some(value.split_whitespace().map(ToString::to_string).collect()),
            "symbols" => {
                let mut list = Vec::new();
                let mut rest = value;
                while let Some(start) = rest.find('{') {
                    let end = rest[start..].find('}').ok_or_else(|| err("unterminated symbol".into()))? + start;
                    list.push(parse_label_set(&rest[start..=end]).unwrap());
                    rest = &rest[end + 1..];
                }
                symbols = Some(list);
            }
            "kind" => {
                kind = match value {
                    "det" => Kind::Total,
                    "partial" => Kind::Partial,
                    "nondet" => Kind::Nondet,
                    other => return Err(err(format!("unknown kind '{other}'"))),
                }
            }
            "states" | "state" => states = Some(num(value)? as usize),
            "final" => finals = value.split_whitespace().map(num).collect::<Result<Vec<_>, _>>()?,
            other => return Err(err(format!("unknown key '{other}'"))),
        }
    }
    let missing = |what: &str| AutomatonError::Parse { line: 0, message: format!("missing '{what}:' line") };
    TreeAutomaton::new(
        bits.ok_or_else(|| missing("bits"))?,
        symbols,
        arity.ok_or_else(|| missing("arity"))?,
        states.ok_or_else(|| missing("states"))?,
        &finals,
        &trans,
        kind,
    )
}

/// Writes an automaton in the text format accepted by [`parse_automaton`].
pub fn write_automaton(a: &TreeAutomaton) -> String {
    let mut out = String::new();
    out.push_str(&format!("arity: {}\n", a.max_arity));
    out.push_str(&format!("bits: {}\n", a.bits.join(" ")));
    let render = |sym: usize| {
        let l: Vec<String> = a.symbol_labels(sym).into_iter().collect();
        format!("{{{}}}", l.join(","))
    };
    if !a.full {
        let list: Vec<String> = (0..a.symbols.len()).map(render).collect();
        out.push_str(&format!("symbols: {}\n", list.join(" ")));
    }
    out.push_str(if a.is_deterministic() { "kind: det\n" } else { "kind: nondet\n" });
    out.push_str(&format!("states: {}\n", a.states));
    let finals: Vec<String> = a.finals().iter().map(|q| q.to_string()).collect();
    out.push_str(&format!("final: {}\n", finals.join(" ")));
    for (sym, kids, target) in a.transitions() {
        let kids: Vec<String> = kids.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("trans {} ({}) -> {}\n", render(sym), kids.join(" "), target));
    }
    out
}

#[cfg(test)]
mod tests;
