use std::path::PathBuf;

use treebound_core::automata::AutomatonError;
use treebound_core::compile::CompileError;
use treebound_core::eval::EvalError;
use treebound_core::grammar::GrammarError;
use treebound_core::logic::LogicError;
use treebound_core::tree::TreeError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<Error> },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("{0}")]
    Gb(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Whether the error is a resource cap being hit rather than bad input.
    pub fn is_resource_cap(&self) -> bool {
        fn automaton(e: &AutomatonError) -> bool {
            matches!(e, AutomatonError::StateCap(..) | AutomatonError::TableTooLarge { .. })
        }
        match self {
            Error::InFile { source, .. } => source.is_resource_cap(),
            Error::Automaton(e) => automaton(e),
            Error::Compile(CompileError::Automaton(e)) => automaton(e),
            Error::Grammar(GrammarError::Automaton(e)) => automaton(e),
            Error::Grammar(GrammarError::TooManyDerivations(_)) => true,
            Error::Eval(EvalError::TooManySolutions(_)) => true,
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
