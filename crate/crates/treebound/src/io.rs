//! Loading and saving the text formats from disk.

use std::path::Path;

use treebound_core::automata::{parse_automaton, write_automaton};
use treebound_core::eval::AuxRelations;
use treebound_core::grammar::{parse_grammar, write_grammar, Grammar};
use treebound_core::logic::{parse_formulas, Formula, MacroEnv, Signature};
use treebound_core::tree::{parse_tree, LabeledTree};
use treebound_core::{TreeAutomaton, DEFAULT_STATE_CAP};

use crate::error::{Error, Result};

/// Environment variable overriding the automaton state cap.
pub const STATE_CAP_VAR: &str = "TREEBOUND_STATE_CAP";

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.into(), source })
}

fn in_file<T, E: Into<Error>>(path: &Path, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| Error::InFile { path: path.into(), source: Box::new(e.into()) })
}

pub fn load_tree(path: &Path, max_arity: usize) -> Result<LabeledTree> {
    let text = read(path)?;
    in_file(path, parse_tree(&text, max_arity))
}

/// Parses a file of `;`-separated formulas.
pub fn load_formulas(path: &Path, sig: &Signature, env: &MacroEnv) -> Result<Vec<Formula>> {
    let text = read(path)?;
    in_file(path, parse_formulas(&text, sig, env))
}

/// Adds the definitions of each file in order. A file may not redefine a name
/// that is already defined.
pub fn load_definitions<P: AsRef<Path>>(env: &mut MacroEnv, paths: &[P]) -> Result<()> {
    for p in paths {
        let p = p.as_ref();
        let text = read(p)?;
        in_file(p, env.load(&text))?;
    }
    Ok(())
}

pub fn load_relations(path: &Path, tree: &LabeledTree) -> Result<AuxRelations> {
    let text = read(path)?;
    in_file(path, AuxRelations::parse(&text, tree))
}

pub fn load_automaton(path: &Path) -> Result<TreeAutomaton> {
    let text = read(path)?;
    in_file(path, parse_automaton(&text))
}

pub fn save_automaton(path: &Path, a: &TreeAutomaton) -> Result<()> {
    write(path, &write_automaton(a))
}

pub fn load_grammar(path: &Path) -> Result<Grammar> {
    let text = read(path)?;
    let g = in_file(path, parse_grammar(&text))?;
    in_file(path, g.validate())?;
    Ok(g)
}

pub fn save_grammar(path: &Path, g: &Grammar) -> Result<()> {
    write(path, &write_grammar(g))
}

/// The state cap from [`STATE_CAP_VAR`], or the default when unset.
pub fn state_cap_from_env() -> Result<usize> {
    match std::env::var(STATE_CAP_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_STATE_CAP),
        Err(e) => Err(Error::Usage(format!("{STATE_CAP_VAR}: {e}"))),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::Usage(format!("{STATE_CAP_VAR} must be a positive integer, got '{v}'"))),
    }
}
