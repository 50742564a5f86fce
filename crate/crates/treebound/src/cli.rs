//! The `treebound` command line.
//!
//! Exit codes: 0 when the formula holds, the sentence is satisfiable or the
//! judgment passes; 1 when it fails, is unsatisfiable or the judgment fails; 2 for
//! usage and input errors; 3 when a resource cap is exceeded.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use treebound_core::automata::write_automaton;
use treebound_core::compile::{compile_with, decide_with, Decision, Options};
use treebound_core::grammar::{automaton_to_cfg, cfg_to_mso, enumerate_derivations_capped, write_grammar};
use treebound_core::logic::{builtin_env, expand, free_variables, Formula, MacroEnv, Signature};
use treebound_core::{evaluate_sentence, AuxRelations, DEFAULT_ARITY};

use crate::error::{Error, Result};
use crate::gb::{self, Expected, Principle};
use crate::io;

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "treebound", version, about = "Monadic second-order logic over finite labeled trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate closed formulas on a tree.
    Check(CheckArgs),
    /// Compile a formula to a tree automaton.
    Compile(CompileArgs),
    /// Decide satisfiability of a sentence or non-emptiness of an automaton.
    Sat(SatArgs),
    /// Translate a grammar to the sentences characterizing its derivation trees.
    Cfg2mso(Cfg2msoArgs),
    /// Translate an automaton to a grammar whose derivation trees project onto its language.
    Aut2cfg(Aut2cfgArgs),
    /// Enumerate the derivation trees of a grammar.
    Enum(EnumArgs),
    /// Judge trees against the chain and ECP constraints.
    Gb(GbArgs),
}

#[derive(Debug, Args)]
pub struct FormulaArgs {
    /// Formula file; several formulas separated by `;` are conjoined.
    #[arg(long)]
    pub formula: PathBuf,
    /// Macro definition file; may be repeated, later files may not redefine names.
    #[arg(long)]
    pub defs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[command(flatten)]
    pub formula: FormulaArgs,
    /// Auxiliary relation file (`REL <id> <id>` lines).
    #[arg(long)]
    pub rel: Option<PathBuf>,
    /// Largest number of children a tree node may have.
    #[arg(long, default_value_t = DEFAULT_ARITY)]
    pub arity: usize,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub formula: FormulaArgs,
    /// Predicates of the signature, separated by commas or spaces; defaults to the
    /// predicates the formula uses.
    #[arg(long)]
    pub sig: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub arity: usize,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["formula", "aut"])))]
pub struct SatArgs {
    #[arg(long)]
    pub formula: Option<PathBuf>,
    #[arg(long)]
    pub aut: Option<PathBuf>,
    #[arg(long, conflicts_with = "aut")]
    pub defs: Vec<PathBuf>,
    #[arg(long, conflicts_with = "aut")]
    pub sig: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub arity: usize,
    /// Print a smallest accepted tree after `SAT`.
    #[arg(long)]
    pub witness: bool,
}

#[derive(Debug, Args)]
pub struct Cfg2msoArgs {
    #[arg(long)]
    pub cfg: PathBuf,
    /// Arity bound for the sentences; defaults to the longest right-hand side.
    #[arg(long)]
    pub arity: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Aut2cfgArgs {
    #[arg(long)]
    pub aut: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumArgs {
    #[arg(long)]
    pub cfg: PathBuf,
    /// Largest number of nodes on a root-to-leaf path.
    #[arg(long)]
    pub max_depth: usize,
    /// Fail with exit code 3 beyond this many trees.
    #[arg(long, default_value_t = treebound_core::grammar::DEFAULT_DERIVATION_CAP)]
    pub cap: usize,
    /// Print trees relabeled by the grammar's projection.
    #[arg(long)]
    pub project: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["suite", "tree"])))]
pub struct GbArgs {
    /// Judge every bundled example and compare with its expected verdict.
    #[arg(long)]
    pub suite: bool,
    #[arg(long)]
    pub tree: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command, writing the
/// result to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_HOLDS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_resource_cap() {
                EXIT_CAP
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Check(a) => check(a, out),
        Command::Compile(a) => compile(a, out),
        Command::Sat(a) => sat(a, out),
        Command::Cfg2mso(a) => cfg2mso(a, out),
        Command::Aut2cfg(a) => aut2cfg(a, out),
        Command::Enum(a) => enumerate(a, out),
        Command::Gb(a) => judge(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

fn emit_to(path: Option<&Path>, out: &mut dyn Write, text: &str) -> Result<()> {
    match path {
        Some(p) => io::write(p, text),
        None => emit(out, text),
    }
}

fn signature(names: Option<&str>) -> Signature {
    match names {
        None => Signature::open(),
        Some(s) => Signature::new(s.split(|c: char| c == ',' || c.is_whitespace()).filter(|n| !n.is_empty())),
    }
}

fn environment(defs: &[PathBuf]) -> Result<MacroEnv> {
    let mut env = builtin_env();
    io::load_definitions(&mut env, defs)?;
    Ok(env)
}

/// Parses, expands and conjoins the formulas of a file.
fn load_sentence(path: &Path, defs: &[PathBuf], sig: &Signature) -> Result<Formula> {
    let env = environment(defs)?;
    let fs = io::load_formulas(path, sig, &env)?;
    if fs.is_empty() {
        return Err(Error::Usage(format!("{}: no formula", path.display())));
    }
    let expanded = fs.iter().map(|f| expand(f, &env)).collect::<std::result::Result<Vec<_>, _>>()?;
    let f = Formula::conj(expanded);
    let (inds, sets) = free_variables(&f);
    if let Some(v) = inds.iter().chain(&sets).next() {
        return Err(Error::Usage(format!("{}: free variable {v}", path.display())));
    }
    Ok(f)
}

fn options(arity: usize) -> Result<Options> {
    Ok(Options { arity, state_cap: io::state_cap_from_env()? })
}

fn check(a: &CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let tree = io::load_tree(&a.tree, a.arity)?;
    let aux = match &a.rel {
        Some(p) => io::load_relations(p, &tree)?,
        None => AuxRelations::new(),
    };
    let env = environment(&a.formula.defs)?;
    let fs = io::load_formulas(&a.formula.formula, &Signature::open(), &env)?;
    let mut all = true;
    for f in &fs {
        let holds = evaluate_sentence(&tree, &expand(f, &env)?, &aux)?;
        emit(out, if holds { "holds\n" } else { "fails\n" })?;
        all &= holds;
    }
    Ok(if all { EXIT_HOLDS } else { EXIT_FAILS })
}

fn compile(a: &CompileArgs, out: &mut dyn Write) -> Result<i32> {
    let sig = signature(a.sig.as_deref());
    let f = load_sentence(&a.formula.formula, &a.formula.defs, &sig)?;
    let aut = compile_with(&f, &sig, options(a.arity)?)?;
    emit_to(a.output.as_deref(), out, &write_automaton(&aut))?;
    Ok(EXIT_HOLDS)
}

fn sat(a: &SatArgs, out: &mut dyn Write) -> Result<i32> {
    let witness = match (&a.formula, &a.aut) {
        (Some(p), _) => {
            let sig = signature(a.sig.as_deref());
            let f = load_sentence(p, &a.defs, &sig)?;
            match decide_with(&f, &sig, options(a.arity)?)? {
                Decision::Sat(t) => Some(t),
                Decision::Unsat => None,
            }
        }
        (None, Some(p)) => io::load_automaton(p)?.with_state_cap(io::state_cap_from_env()?).witness(),
        (None, None) => unreachable!("clap requires one input"),
    };
    match witness {
        Some(t) => {
            emit(out, "SAT\n")?;
            if a.witness {
                emit(out, &format!("{t}\n"))?;
            }
            Ok(EXIT_HOLDS)
        }
        None => {
            emit(out, "UNSAT\n")?;
            Ok(EXIT_FAILS)
        }
    }
}

fn cfg2mso(a: &Cfg2msoArgs, out: &mut dyn Write) -> Result<i32> {
    let g = io::load_grammar(&a.cfg)?;
    let fs = cfg_to_mso(&g, a.arity.unwrap_or(g.max_rhs()))?;
    let text: Vec<String> = fs.iter().map(ToString::to_string).collect();
    emit_to(a.output.as_deref(), out, &format!("{}\n", text.join(" ;\n")))?;
    Ok(EXIT_HOLDS)
}

fn aut2cfg(a: &Aut2cfgArgs, out: &mut dyn Write) -> Result<i32> {
    let aut = io::load_automaton(&a.aut)?;
    let g = automaton_to_cfg(&aut)?;
    emit_to(a.output.as_deref(), out, &write_grammar(&g))?;
    Ok(EXIT_HOLDS)
}

fn enumerate(a: &EnumArgs, out: &mut dyn Write) -> Result<i32> {
    let g = io::load_grammar(&a.cfg)?;
    let mut text = String::new();
    for t in enumerate_derivations_capped(&g, a.max_depth, a.cap)? {
        let t = if a.project { g.project(&t) } else { t };
        text.push_str(&format!("{t}\n"));
    }
    emit(out, &text)?;
    Ok(EXIT_HOLDS)
}

fn judge(a: &GbArgs, out: &mut dyn Write) -> Result<i32> {
    if let Some(p) = &a.tree {
        let tree = io::load_tree(p, DEFAULT_ARITY)?;
        let j = gb::judge(&tree)?;
        emit(out, &j.report(&tree))?;
        return Ok(if j.pass() { EXIT_HOLDS } else { EXIT_FAILS });
    }
    let mut all = true;
    for ex in gb::EXAMPLES {
        let tree = ex.tree();
        let j = gb::judge(&tree)?;
        let ok = match ex.expected {
            Expected::Pass => j.pass(),
            Expected::IdentificationFailure => !j.passes(Principle::Identification),
        };
        all &= ok;
        let verdict = if j.pass() { "pass" } else { "fail" };
        let status = if ok { "as expected" } else { "UNEXPECTED" };
        emit(out, &format!("== {} {verdict} ({status})\n{}", ex.name, j.report(&tree)))?;
    }
    Ok(if all { EXIT_HOLDS } else { EXIT_FAILS })
}
