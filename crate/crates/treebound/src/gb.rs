//! Government-and-binding constraints: chains and the ECP over bundled example
//! trees, and the free-indexation constraint over the grid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use treebound_core::eval::{Assignment, AuxRelations, Program};
use treebound_core::logic::{builtin_env, expand, parse_formula, Arg, Formula, MacroEnv, Signature};
use treebound_core::tree::{parse_tree, Address, LabeledTree};
use treebound_core::{evaluate_sentence, DEFAULT_ARITY};

use crate::error::{Error, Result};

pub const GB_MSO: &str = include_str!("../data/gb.mso");
pub const GRID_MSO: &str = include_str!("../data/grid.mso");

/// Predicates a GB tree may carry besides lowercase lexical ones.
pub const VOCABULARY: &[&str] = &[
    "CP", "Cbar", "C", "IP", "Ibar", "I", "VP", "Vbar", "V", "NP", "N", "AdvP", "Bar0", "Bar2", "Trace",
    "Target", "Base", "Ref", "Spec", "APos", "Barrier", "Anaphor", "Pronominal", "Wh", "Extraposed",
];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Expected {
    Pass,
    IdentificationFailure,
}

/// A bundled example tree with its expected verdict.
#[derive(Clone, Copy, Debug)]
pub struct Example {
    pub name: &'static str,
    pub sentence: &'static str,
    pub text: &'static str,
    pub expected: Expected,
}

impl Example {
    pub fn tree(&self) -> LabeledTree {
        parse_tree(self.text, DEFAULT_ARITY).expect("bundled trees parse")
    }
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "object_extraction",
        sentence: "Whom do you think Alice will invite.",
        text: include_str!("../data/object_extraction.tree"),
        expected: Expected::Pass,
    },
    Example {
        name: "subject_extraction",
        sentence: "Who do you think will invite Alice.",
        text: include_str!("../data/subject_extraction.tree"),
        expected: Expected::Pass,
    },
    Example {
        name: "ecp_violation",
        sentence: "*Who do you wonder why invited Alice.",
        text: include_str!("../data/ecp_violation.tree"),
        expected: Expected::IdentificationFailure,
    },
    Example {
        name: "subjacency_violation",
        sentence: "?Whom do you wonder why Alice invited.",
        text: include_str!("../data/subjacency_violation.tree"),
        expected: Expected::Pass,
    },
    Example {
        name: "conflated_chains",
        sentence: "*Who has told you invited him (two extractions conflated).",
        text: include_str!("../data/conflated_chains.tree"),
        expected: Expected::IdentificationFailure,
    },
    Example {
        name: "dutch_head_raising",
        sentence: "dat Jan Piet Marie die kinderen zag helpen helpen zwemmen",
        text: include_str!("../data/dutch_head_raising.tree"),
        expected: Expected::IdentificationFailure,
    },
];

pub fn example(name: &str) -> Option<&'static Example> {
    EXAMPLES.iter().find(|e| e.name == name)
}

/// The builtin macros plus the GB and grid libraries.
pub fn gb_env() -> MacroEnv {
    let mut env = builtin_env();
    env.load(GB_MSO).expect("gb.mso is well formed");
    env.load(GRID_MSO).expect("grid.mso is well formed");
    env
}

struct Kit {
    licensing: Program,
    licensed_at: Program,
    identification: Program,
    identified_at: Program,
    link: Program,
    chain: Program,
}

fn program(env: &MacroEnv, text: &str) -> Program {
    let f = parse_formula(text, &Signature::open(), env).expect("kit formula parses");
    Program::new(&expand(&f, env).expect("kit formula expands")).expect("kit formula compiles")
}

fn kit() -> &'static Kit {
    static KIT: OnceLock<Kit> = OnceLock::new();
    KIT.get_or_init(|| {
        let env = gb_env();
        Kit {
            licensing: program(&env, "Licensing()"),
            licensed_at: program(&env, "Trace(x) -> (Bar0(x) | ex y. Proper-Head-Governs(y, x))"),
            identification: program(&env, "Generalized-Identification()"),
            identified_at: program(&env, "Ex X. (Chain(X) & X(x))"),
            link: program(&env, "Link(x, y)"),
            chain: Program::new(&expand(&Formula::call("Chain", vec![Arg::SetVar("X".into())]), &env).expect("Chain expands"))
                .expect("Chain compiles"),
        }
    })
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Principle {
    /// Every trace is a head or properly head-governed.
    Licensing,
    /// Every node belongs to a well-formed, possibly trivial, chain.
    Identification,
    /// No node has two Link antecedents or two Link successors.
    ChainFormation,
}

impl Principle {
    pub const ALL: [Principle; 3] = [Principle::Licensing, Principle::Identification, Principle::ChainFormation];

    pub fn name(self) -> &'static str {
        match self {
            Principle::Licensing => "licensing",
            Principle::Identification => "identification",
            Principle::ChainFormation => "chain-formation",
        }
    }
}

/// Per-principle verdicts; each principle lists its offending nodes by preorder
/// index, and passes when that list is empty.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Judgment {
    pub offending: BTreeMap<Principle, Vec<usize>>,
}

impl Judgment {
    pub fn pass(&self) -> bool {
        self.offending.values().all(Vec::is_empty)
    }

    pub fn passes(&self, p: Principle) -> bool {
        self.offending(p).is_empty()
    }

    pub fn offending(&self, p: Principle) -> &[usize] {
        self.offending.get(&p).map_or(&[], Vec::as_slice)
    }

    /// One line per principle: `name pass` or `name fail <node> ...`, naming
    /// nodes by id where they have one and by address otherwise.
    pub fn report(&self, tree: &LabeledTree) -> String {
        let mut out = String::new();
        for p in Principle::ALL {
            let bad = self.offending(p);
            if bad.is_empty() {
                let _ = writeln!(out, "{} pass", p.name());
            } else {
                let nodes: Vec<String> = bad.iter().map(|&i| node_name(tree, i)).collect();
                let _ = writeln!(out, "{} fail {}", p.name(), nodes.join(" "));
            }
        }
        out
    }
}

pub fn node_name(tree: &LabeledTree, i: usize) -> String {
    match tree.node_at(i).id {
        Some(id) => id.to_string(),
        None => tree.address(i).to_string(),
    }
}

/// Checks that the tree is labeled over [`VOCABULARY`] and lowercase lexical
/// predicates, with at most one bar level per node.
pub fn check_signature(tree: &LabeledTree) -> Result<()> {
    for (i, n) in tree.nodes().iter().enumerate() {
        for l in &n.labels {
            let lexical = l.chars().next().is_some_and(char::is_lowercase);
            if !lexical && !VOCABULARY.contains(&l.as_str()) {
                return Err(Error::Gb(format!("node {}: label {l} is not in the GB signature", node_name(tree, i))));
            }
        }
        if n.labels.contains("Bar0") && n.labels.contains("Bar2") {
            return Err(Error::Gb(format!("node {} has two bar levels", node_name(tree, i))));
        }
    }
    Ok(())
}

fn at(x: &str, tree: &LabeledTree, i: usize) -> Assignment {
    Assignment::new().with_individual(x, tree.address(i))
}

/// Evaluates licensing and generalized identification, and checks that Link is
/// one-to-one.
pub fn judge(tree: &LabeledTree) -> Result<Judgment> {
    check_signature(tree)?;
    let k = kit();
    let none = AuxRelations::new();
    let failing = |sentence: &Program, local: &Program| -> Result<Vec<usize>> {
        if sentence.run(tree, &Assignment::new(), &none)? {
            return Ok(Vec::new());
        }
        let mut bad = Vec::new();
        for i in 0..tree.len() {
            if !local.run(tree, &at("x", tree, i), &none)? {
                bad.push(i);
            }
        }
        Ok(bad)
    };
    let mut offending = BTreeMap::new();
    offending.insert(Principle::Licensing, failing(&k.licensing, &k.licensed_at)?);
    offending.insert(Principle::Identification, failing(&k.identification, &k.identified_at)?);
    let mut antecedents = vec![0usize; tree.len()];
    let mut successors = vec![0usize; tree.len()];
    for (x, y) in links(tree)? {
        successors[x] += 1;
        antecedents[y] += 1;
    }
    let forked = (0..tree.len()).filter(|&i| antecedents[i] > 1 || successors[i] > 1).collect();
    offending.insert(Principle::ChainFormation, forked);
    Ok(Judgment { offending })
}

/// All pairs `(x, y)` of preorder indices with `Link(x, y)`.
pub fn links(tree: &LabeledTree) -> Result<Vec<(usize, usize)>> {
    let k = kit();
    let none = AuxRelations::new();
    let mut out = Vec::new();
    for x in 0..tree.len() {
        for y in 0..tree.len() {
            let s = at("x", tree, x).with_individual("y", tree.address(y));
            if k.link.run(tree, &s, &none)? {
                out.push((x, y));
            }
        }
    }
    Ok(out)
}

/// Every node set satisfying `Chain(X)`, trivial chains included.
pub fn chains(tree: &LabeledTree, cap: usize) -> Result<Vec<BTreeSet<Address>>> {
    Ok(kit().chain.satisfying_sets(tree, "X", &Assignment::new(), &AuxRelations::new(), cap)?)
}

// ---------------------------------------------------------------------------
// Free indexation on the grid

/// The complete binary tree whose leaves are `depth` edges below the root, with
/// node ids 1, 2, .. in preorder.
pub fn complete_binary_tree(depth: usize) -> LabeledTree {
    fn build(d: usize) -> LabeledTree {
        let kids = if d == 0 { Vec::new() } else { vec![build(d - 1), build(d - 1)] };
        LabeledTree::node(Vec::<String>::new(), kids)
    }
    let mut t = build(depth);
    for i in 0..t.len() {
        t.set_id(i, Some(i as u64 + 1));
    }
    t
}

/// CI relating nodes reached by the same number of left and of right steps,
/// i.e. nodes naming the same grid point.
pub fn grid_ci(tree: &LabeledTree) -> AuxRelations {
    let point = |a: &Address| {
        let zeros = a.0.iter().filter(|&&c| c == 0).count();
        (zeros, a.0.len() - zeros)
    };
    let mut classes: BTreeMap<(usize, usize), Vec<Address>> = BTreeMap::new();
    for a in tree.addresses() {
        classes.entry(point(&a)).or_default().push(a);
    }
    let mut ci = AuxRelations::new();
    for class in classes.values() {
        ci.insert("CI", class.iter().flat_map(|a| class.iter().map(move |b| (a.clone(), b.clone()))));
    }
    ci
}

/// `ci` with the classes of `a` and `b` merged into one.
pub fn merge_classes(ci: &AuxRelations, a: &Address, b: &Address) -> AuxRelations {
    let pairs = ci.get("CI").cloned().unwrap_or_default();
    let class = |x: &Address| -> BTreeSet<Address> {
        let mut c: BTreeSet<Address> = pairs.iter().filter(|(p, _)| p == x).map(|(_, q)| q.clone()).collect();
        c.insert(x.clone());
        c
    };
    let merged: BTreeSet<Address> = class(a).union(&class(b)).cloned().collect();
    let mut out = ci.clone();
    out.insert("CI", merged.iter().flat_map(|x| merged.iter().map(move |y| (x.clone(), y.clone()))));
    out
}

/// Relation file text for `name`, one `NAME id id` line per pair.
pub fn write_relation(tree: &LabeledTree, rels: &AuxRelations, name: &str) -> Result<String> {
    let id = |a: &Address| -> Result<u64> {
        tree.index_of(a)
            .and_then(|i| tree.node_at(i).id)
            .ok_or_else(|| Error::Gb(format!("node {a} has no id")))
    };
    let mut out = String::new();
    for (a, b) in rels.get(name).into_iter().flatten() {
        let _ = writeln!(out, "{name} {} {}", id(a)?, id(b)?);
    }
    Ok(out)
}

/// Evaluates `PhiG(preds)` with `ci` as the co-indexation relation.
pub fn check_phi_g(tree: &LabeledTree, ci: &AuxRelations, preds: &[&str]) -> Result<bool> {
    ci.check_equivalence("CI", tree)?;
    let env = builtin_env();
    let call = Formula::call("PhiG", preds.iter().map(|p| Arg::Pred((*p).into())).collect());
    let f = expand(&call, &env)?;
    Ok(evaluate_sentence(tree, &f, ci)?)
}

#[cfg(test)]
mod tests;
