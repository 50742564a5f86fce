//! Decision procedures for monadic second-order logic over finite labeled trees.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides:
//!
//! - [`tree`]: tree domains, labeled trees, the induced parent/dominance/left-of
//!   relations and the textual tree format.
//! - [`logic`]: formula syntax, the surface parser, macro environments and
//!   syntactic macro expansion.
//! - [`eval`]: a direct model checker, used as the ground truth for everything else.
//! - [`automata`]: bottom-up finite tree automata with boolean closure, projection,
//!   determinization, minimization, emptiness and witnesses.
//! - [`compile`]: the compositional formula-to-automaton translation and `decide`.
//! - [`grammar`]: context-free grammars, grammar-to-sentences and
//!   automaton-to-grammar translations, and derivation-tree enumeration.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod automata;
pub mod bitset;
pub mod compile;
pub mod eval;
pub mod grammar;
pub mod logic;
pub mod tree;

pub use automata::{AutomatonError, TreeAutomaton};
pub use compile::{compile, decide, CompileError, Decision};
pub use eval::{evaluate, evaluate_sentence, Assignment, AuxRelations, EvalError};
pub use grammar::{Grammar, GrammarError};
pub use logic::{Formula, MacroEnv, Signature};
pub use tree::{Address, LabeledTree, TreeError};

/// Default bound on the number of children per node.
pub const DEFAULT_ARITY: usize = 8;

/// Default cap on the number of automaton states produced by a single construction.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;
