//! Macro environments and capture-avoiding macro expansion.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::parse::{parse_definitions, Definition};
use super::{Arg, Formula, LogicError, Rel, Sort, Term};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Param {
    pub name: String,
    pub sort: Sort,
}

/// Instantiates an arity-polymorphic macro for a call site's argument sorts.
pub type PolyFn = fn(&[Sort]) -> Option<(Vec<Param>, Formula)>;

#[derive(Clone, Debug)]
pub enum MacroDef {
    Fixed { params: Vec<Param>, body: Formula },
    Poly { shape: &'static str, instantiate: PolyFn },
}

#[derive(Clone, Debug, Default)]
pub struct MacroEnv {
    defs: BTreeMap<String, MacroDef>,
}

impl MacroEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.defs.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&MacroDef> {
        self.defs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }

    pub fn define(&mut self, name: &str, params: Vec<Param>, body: Formula) -> Result<(), LogicError> {
        if self.defs.contains_key(name) {
            return Err(LogicError::Redefinition(name.into()));
        }
        self.defs.insert(name.into(), MacroDef::Fixed { params, body });
        Ok(())
    }

    pub fn define_poly(&mut self, name: &str, shape: &'static str, instantiate: PolyFn) -> Result<(), LogicError> {
        if self.defs.contains_key(name) {
            return Err(LogicError::Redefinition(name.into()));
        }
        self.defs.insert(name.into(), MacroDef::Poly { shape, instantiate });
        Ok(())
    }

    /// Adds parsed definitions; fails on any redefinition or on a cycle among
    /// the definitions.
    pub fn add_definitions(&mut self, defs: Vec<Definition>) -> Result<(), LogicError> {
        for d in &defs {
            if self.defs.contains_key(&d.name) {
                return Err(LogicError::Redefinition(d.name.clone()));
            }
        }
        let mut next = self.clone();
        for d in defs {
            next.defs.insert(d.name, MacroDef::Fixed { params: d.params, body: d.body });
        }
        next.check_acyclic()?;
        *self = next;
        Ok(())
    }

    /// Parses a definition file and adds its definitions.
    pub fn load(&mut self, text: &str) -> Result<(), LogicError> {
        let defs = parse_definitions(text, self)?;
        self.add_definitions(defs)
    }

    fn check_acyclic(&self) -> Result<(), LogicError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn calls(f: &Formula, out: &mut BTreeSet<String>) {
            f.visit(&mut |g| {
                if let Formula::Macro(n, _) = g {
                    out.insert(n.clone());
                }
            });
        }
        fn dfs<'a>(env: &'a MacroEnv, name: &'a str, state: &mut BTreeMap<&'a str, u8>) -> Result<(), LogicError> {
            match state.get(name) {
                Some(1) => return Err(LogicError::CyclicMacro(name.into())),
                Some(2) => return Ok(()),
                _ => {}
            }
            state.insert(name, 1);
            if let Some((key, MacroDef::Fixed { body, .. })) = env.defs.get_key_value(name) {
                let _ = key;
                let mut out = BTreeSet::new();
                calls(body, &mut out);
                for callee in out {
                    if let Some((k, _)) = env.defs.get_key_value(callee.as_str()) {
                        dfs(env, k.as_str(), state)?;
                    }
                }
            }
            state.insert(name, 2);
            Ok(())
        }
        for name in self.defs.keys() {
            dfs(self, name, &mut state)?;
        }
        Ok(())
    }

    /// Parameters and body for a call with the given argument sorts.
    pub fn instantiate(&self, name: &str, sorts: &[Sort]) -> Result<(Vec<Param>, Formula), LogicError> {
        match self.defs.get(name) {
            None => Err(LogicError::UnknownMacro(name.into())),
            Some(MacroDef::Fixed { params, body }) => {
                if params.len() != sorts.len() {
                    return Err(LogicError::ArgumentCount {
                        name: name.into(),
                        expected: params.len().to_string(),
                        found: sorts.len(),
                    });
                }
                for (p, s) in params.iter().zip(sorts) {
                    if p.sort != *s {
                        return Err(LogicError::Sort(format!(
                            "argument for parameter {} of {name} has the wrong sort",
                            p.name
                        )));
                    }
                }
                Ok((params.clone(), body.clone()))
            }
            Some(MacroDef::Poly { shape, instantiate }) => instantiate(sorts).ok_or_else(|| {
                LogicError::ArgumentCount { name: name.into(), expected: (*shape).into(), found: sorts.len() }
            }),
        }
    }
}

const BUILTINS: &str = r"
def Branches(x) := ex y, z. (x < y & x < z & y != z) .
def C-Command(x, y) := !(x <* y) & !(y <* x) & all z. ((z <+ x & Branches(z)) -> z <+ y) .
def Subset(X, Y) := all x. (X(x) -> Y(x)) .
def LexLe(x, y) := x <* y | x << y .
def Finite(X) := All Y. ((Subset(Y, X) & ex x. Y(x)) -> ex x. (Y(x) & all y. (Y(y) -> LexLe(y, x)))) .
def O(x) := all y. (y <* x -> y = x) .
def R0(x, y) := x < y & all z. (x < z -> !(z << y)) .
def R1(x, y) := x < y & all z. (x < z -> !(y << z)) .
";

fn template(text: &str) -> (Vec<Param>, Formula) {
    let env = builtin_env();
    let mut defs = parse_definitions(text, &env).expect("builtin template parses");
    let d = defs.pop().expect("one definition");
    (d.params, d.body)
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn governs(sorts: &[Sort]) -> Option<(Vec<Param>, Formula)> {
    match sorts {
        [Sort::Ind, Sort::Ind] => Some(template(
            "def G(x, y) := C-Command(x, y) & !ex z. (Barrier(z) & z <+ y & !(z <+ x)) .",
        )),
        [Sort::Ind, Sort::Ind, Sort::Set] => Some(template(
            "def G(x, y, B) := C-Command(x, y) & !ex z. (B(z) & z <+ y & !(z <+ x)) .",
        )),
        _ => None,
    }
}

fn partition(sorts: &[Sort]) -> Option<(Vec<Param>, Formula)> {
    if sorts.len() < 2 || sorts.iter().any(|s| *s != Sort::Set) {
        return None;
    }
    let xs = names("X", sorts.len() - 1);
    let cover = xs.iter().map(|x| format!("{x}(x)")).collect::<Vec<_>>().join(" | ");
    let disjoint = xs
        .iter()
        .map(|x| {
            let others: Vec<String> =
                xs.iter().filter(|z| *z != x).map(|z| format!("!{z}(x)")).collect();
            let rhs = if others.is_empty() { "true".into() } else { others.join(" & ") };
            format!("({x}(x) -> {rhs})")
        })
        .collect::<Vec<_>>()
        .join(" & ");
    Some(template(&format!(
        "def P({}, Y) := all x. ((Y(x) <-> {cover}) & {disjoint}) .",
        xs.join(", ")
    )))
}

fn agree(sorts: &[Sort]) -> Option<(Vec<Param>, Formula)> {
    let k = sorts.len().checked_sub(2)?;
    if sorts[..k].iter().any(|s| *s != Sort::Set) || sorts[k..].iter().any(|s| *s != Sort::Ind) {
        return None;
    }
    let ps = names("P", k);
    let body = if ps.is_empty() {
        "true".into()
    } else {
        ps.iter().map(|p| format!("({p}(x) <-> {p}(y))")).collect::<Vec<_>>().join(" & ")
    };
    let mut params = ps;
    params.push("x".into());
    params.push("y".into());
    Some(template(&format!("def A({}) := {body} .", params.join(", "))))
}

fn children(sorts: &[Sort]) -> Option<(Vec<Param>, Formula)> {
    if sorts.is_empty() || sorts.iter().any(|s| *s != Sort::Ind) {
        return None;
    }
    let ys = names("y", sorts.len() - 1);
    if ys.is_empty() {
        return Some(template("def C(x) := all z. !(x < z) ."));
    }
    let mut parts: Vec<String> = ys.iter().map(|y| format!("x < {y}")).collect();
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            parts.push(format!("{} << {}", ys[i], ys[j]));
        }
    }
    let any = ys.iter().map(|y| format!("z = {y}")).collect::<Vec<_>>().join(" | ");
    parts.push(format!("all z. (x < z -> {any})"));
    Some(template(&format!("def C(x, {}) := {} .", ys.join(", "), parts.join(" & "))))
}

fn phi_g(sorts: &[Sort]) -> Option<(Vec<Param>, Formula)> {
    if sorts.iter().any(|s| *s != Sort::Set) {
        return None;
    }
    let ps = names("P", sorts.len());
    let mut agree_args = ps.clone();
    agree_args.push("x".into());
    agree_args.push("y".into());
    let text = format!(
        "def F({}) := all x, y. (
            ((x = y
              | ex x0, y0. (CI(x0, y0) & (R0(x0, x) & R0(y0, y) | R1(x0, x) & R1(y0, y)))
              | ex x0, y0, x1, y1. (CI(x0, y0)
                  & (R0(x0, x1) & R1(x1, x) & R1(y0, y1) & R0(y1, y)
                   | R1(x0, x1) & R0(x1, x) & R0(y0, y1) & R1(y1, y))))
             -> CI(x, y))
            & (CI(x, y) -> Agree({})) ) .",
        ps.join(", "),
        agree_args.join(", ")
    );
    Some(template(&text))
}

/// The predefined macros: `Branches`, `C-Command`, `Governs`, `Subset`,
/// `Partition`, `Finite`, `LexLe`, `O`, `R0`, `R1`, `Agree`, `Children` and `PhiG`.
///
/// `Governs(x, y)` treats nodes labeled `Barrier` as barriers; `Governs(x, y, B)`
/// takes the barrier set as an argument. `Agree(P1, .., Pk, x, y)` and
/// `PhiG(P1, .., Pk)` take any number of predicates, `Partition(X1, .., Xk, Y)`
/// at least one part, and `Children(x, y1, .., yk)` any number of children.
/// `PhiG` refers to the auxiliary relation `CI`.
pub fn builtin_env() -> MacroEnv {
    let mut env = MacroEnv::new();
    let defs = parse_definitions(BUILTINS, &env).expect("builtin definitions parse");
    env.add_definitions(defs).expect("builtin definitions are acyclic");
    env.define_poly("Governs", "2 or 3", governs).unwrap();
    env.define_poly("Partition", "at least 2", partition).unwrap();
    env.define_poly("Agree", "at least 2", agree).unwrap();
    env.define_poly("Children", "at least 1", children).unwrap();
    env.define_poly("PhiG", "any number of set", phi_g).unwrap();
    env
}

struct Expander<'a> {
    env: &'a MacroEnv,
    counter: usize,
    stack: Vec<String>,
}

/// Eliminates macro calls, `ex!` and `<+`. Bound variables of instantiated macro
/// bodies are renamed to fresh names of the form `name#n`, so expansion never
/// captures argument variables.
pub fn expand(f: &Formula, env: &MacroEnv) -> Result<Formula, LogicError> {
    let mut counter = 0;
    for name in f.all_variable_names() {
        if let Some((_, n)) = name.rsplit_once('#') {
            if let Ok(n) = n.parse::<usize>() {
                counter = counter.max(n + 1);
            }
        }
    }
    let mut ex = Expander { env, counter, stack: Vec::new() };
    ex.expand(f)
}

fn base_name(v: &str) -> &str {
    match v.rsplit_once('#') {
        Some((b, n)) if n.chars().all(|c| c.is_ascii_digit()) => b,
        _ => v,
    }
}

impl Expander<'_> {
    fn fresh(&mut self, v: &str) -> String {
        let n = self.counter;
        self.counter += 1;
        format!("{}#{n}", base_name(v))
    }

    fn expand(&mut self, f: &Formula) -> Result<Formula, LogicError> {
        let bx = |f: Formula| Box::new(f);
        Ok(match f {
            Formula::True
            | Formula::False
            | Formula::Pred(..)
            | Formula::SetApp(..)
            | Formula::Aux(..) => f.clone(),
            Formula::Atom(Rel::PDom, a, b) => Formula::and(
                Formula::Atom(Rel::Dom, a.clone(), b.clone()),
                Formula::not(Formula::Atom(Rel::Eq, a.clone(), b.clone())),
            ),
            Formula::Atom(..) => f.clone(),
            Formula::Not(a) => Formula::Not(bx(self.expand(a)?)),
            Formula::And(a, b) => Formula::And(bx(self.expand(a)?), bx(self.expand(b)?)),
            Formula::Or(a, b) => Formula::Or(bx(self.expand(a)?), bx(self.expand(b)?)),
            Formula::Implies(a, b) => Formula::Implies(bx(self.expand(a)?), bx(self.expand(b)?)),
            Formula::Iff(a, b) => Formula::Iff(bx(self.expand(a)?), bx(self.expand(b)?)),
            Formula::ForallInd(v, a) => Formula::ForallInd(v.clone(), bx(self.expand(a)?)),
            Formula::ExistsInd(v, a) => Formula::ExistsInd(v.clone(), bx(self.expand(a)?)),
            Formula::ForallSet(v, a) => Formula::ForallSet(v.clone(), bx(self.expand(a)?)),
            Formula::ExistsSet(v, a) => Formula::ExistsSet(v.clone(), bx(self.expand(a)?)),
            Formula::ExistsUnique(v, a) => {
                let body = self.expand(a)?;
                let y = self.fresh(v);
                let renamed = rename_free_ind(&body, v, &y);
                Formula::exists(
                    v,
                    Formula::and(
                        body,
                        Formula::forall(&y, Formula::implies(renamed, Formula::atom(Rel::Eq, &y, v))),
                    ),
                )
            }
            Formula::Macro(name, args) => {
                if self.stack.iter().any(|n| n == name) {
                    return Err(LogicError::CyclicMacro(name.clone()));
                }
                let sorts: Vec<Sort> = args.iter().map(Arg::sort).collect();
                let (params, body) = self.env.instantiate(name, &sorts)?;
                let body = self.freshen(&body, &mut Vec::new());
                let map: BTreeMap<&str, &Arg> =
                    params.iter().map(|p| p.name.as_str()).zip(args.iter()).collect();
                let body = substitute(&body, &map)?;
                self.stack.push(name.clone());
                let out = self.expand(&body);
                self.stack.pop();
                out?
            }
        })
    }

    /// Renames every binder in `f` to a fresh name.
    fn freshen(&mut self, f: &Formula, ren: &mut Vec<(String, String)>) -> Formula {
        let t = |t: &Term, ren: &Vec<(String, String)>| match t {
            Term::Var(v) => Term::Var(lookup(ren, v)),
            c => c.clone(),
        };
        let binder = |this: &mut Self, v: &str, a: &Formula, ren: &mut Vec<(String, String)>| {
            let nv = this.fresh(v);
            ren.push((v.into(), nv.clone()));
            let body = this.freshen(a, ren);
            ren.pop();
            (nv, Box::new(body))
        };
        match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Atom(r, a, b) => Formula::Atom(*r, t(a, ren), t(b, ren)),
            Formula::Pred(p, a) => Formula::Pred(p.clone(), t(a, ren)),
            Formula::SetApp(s, a) => Formula::SetApp(lookup(ren, s), t(a, ren)),
            Formula::Aux(r, a, b) => Formula::Aux(r.clone(), t(a, ren), t(b, ren)),
            Formula::Not(a) => Formula::not(self.freshen(a, ren)),
            Formula::And(a, b) => Formula::and(self.freshen(a, ren), self.freshen(b, ren)),
            Formula::Or(a, b) => Formula::or(self.freshen(a, ren), self.freshen(b, ren)),
            Formula::Implies(a, b) => Formula::implies(self.freshen(a, ren), self.freshen(b, ren)),
            Formula::Iff(a, b) => Formula::iff(self.freshen(a, ren), self.freshen(b, ren)),
            Formula::ForallInd(v, a) => {
                let (v, b) = binder(self, v, a, ren);
                Formula::ForallInd(v, b)
            }
            Formula::ExistsInd(v, a) => {
                let (v, b) = binder(self, v, a, ren);
                Formula::ExistsInd(v, b)
            }
            Formula::ExistsUnique(v, a) => {
                let (v, b) = binder(self, v, a, ren);
                Formula::ExistsUnique(v, b)
            }
            Formula::ForallSet(v, a) => {
                let (v, b) = binder(self, v, a, ren);
                Formula::ForallSet(v, b)
            }
            Formula::ExistsSet(v, a) => {
                let (v, b) = binder(self, v, a, ren);
                Formula::ExistsSet(v, b)
            }
            Formula::Macro(n, args) => Formula::Macro(
                n.clone(),
                args.iter()
                    .map(|a| match a {
                        Arg::Ind(x) => Arg::Ind(t(x, ren)),
                        Arg::SetVar(s) => Arg::SetVar(lookup(ren, s)),
                        Arg::Pred(p) => Arg::Pred(p.clone()),
                    })
                    .collect(),
            ),
        }
    }
}

fn lookup(ren: &[(String, String)], v: &str) -> String {
    ren.iter().rev().find(|(o, _)| o == v).map(|(_, n)| n.clone()).unwrap_or_else(|| v.into())
}

/// Replaces free occurrences of macro parameters by call arguments. Binders in
/// `f` must already be fresh.
fn substitute(f: &Formula, map: &BTreeMap<&str, &Arg>) -> Result<Formula, LogicError> {
    let term = |t: &Term| -> Result<Term, LogicError> {
        match t {
            Term::Var(v) => match map.get(v.as_str()) {
                Some(Arg::Ind(a)) => Ok(a.clone()),
                Some(_) => Err(LogicError::Sort(format!("set argument used as individual {v}"))),
                None => Ok(t.clone()),
            },
            c => Ok(c.clone()),
        }
    };
    let s = |a: &Formula| substitute(a, map);
    Ok(match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(r, a, b) => Formula::Atom(*r, term(a)?, term(b)?),
        Formula::Pred(p, a) => Formula::Pred(p.clone(), term(a)?),
        Formula::SetApp(x, a) => match map.get(x.as_str()) {
            Some(Arg::SetVar(y)) => Formula::SetApp(y.clone(), term(a)?),
            Some(Arg::Pred(p)) => Formula::Pred(p.clone(), term(a)?),
            Some(Arg::Ind(_)) => {
                return Err(LogicError::Sort(format!("individual argument used as set {x}")))
            }
            None => Formula::SetApp(x.clone(), term(a)?),
        },
        Formula::Aux(r, a, b) => Formula::Aux(r.clone(), term(a)?, term(b)?),
        Formula::Not(a) => Formula::not(s(a)?),
        Formula::And(a, b) => Formula::and(s(a)?, s(b)?),
        Formula::Or(a, b) => Formula::or(s(a)?, s(b)?),
        Formula::Implies(a, b) => Formula::implies(s(a)?, s(b)?),
        Formula::Iff(a, b) => Formula::iff(s(a)?, s(b)?),
        Formula::ForallInd(v, a) => Formula::ForallInd(v.clone(), Box::new(s(a)?)),
        Formula::ExistsInd(v, a) => Formula::ExistsInd(v.clone(), Box::new(s(a)?)),
        Formula::ExistsUnique(v, a) => Formula::ExistsUnique(v.clone(), Box::new(s(a)?)),
        Formula::ForallSet(v, a) => Formula::ForallSet(v.clone(), Box::new(s(a)?)),
        Formula::ExistsSet(v, a) => Formula::ExistsSet(v.clone(), Box::new(s(a)?)),
        Formula::Macro(n, args) => {
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                out.push(match a {
                    Arg::Ind(t) => Arg::Ind(term(t)?),
                    Arg::SetVar(x) => match map.get(x.as_str()) {
                        Some(b) => (*b).clone(),
                        None => a.clone(),
                    },
                    Arg::Pred(_) => a.clone(),
                });
            }
            Formula::Macro(n.clone(), out)
        }
    })
}

/// `f[y/x]` for individual variables; `y` must not be bound in `f`.
pub(crate) fn rename_free_ind(f: &Formula, x: &str, y: &str) -> Formula {
    let t = |t: &Term| match t {
        Term::Var(v) if v == x => Term::Var(y.into()),
        other => other.clone(),
    };
    let r = |a: &Formula| rename_free_ind(a, x, y);
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(rel, a, b) => Formula::Atom(*rel, t(a), t(b)),
        Formula::Pred(p, a) => Formula::Pred(p.clone(), t(a)),
        Formula::SetApp(s, a) => Formula::SetApp(s.clone(), t(a)),
        Formula::Aux(n, a, b) => Formula::Aux(n.clone(), t(a), t(b)),
        Formula::Not(a) => Formula::not(r(a)),
        Formula::And(a, b) => Formula::and(r(a), r(b)),
        Formula::Or(a, b) => Formula::or(r(a), r(b)),
        Formula::Implies(a, b) => Formula::implies(r(a), r(b)),
        Formula::Iff(a, b) => Formula::iff(r(a), r(b)),
        Formula::ForallInd(v, _) | Formula::ExistsInd(v, _) | Formula::ExistsUnique(v, _) if v == x => {
            f.clone()
        }
        Formula::ForallInd(v, a) => Formula::ForallInd(v.clone(), Box::new(r(a))),
        Formula::ExistsInd(v, a) => Formula::ExistsInd(v.clone(), Box::new(r(a))),
        Formula::ExistsUnique(v, a) => Formula::ExistsUnique(v.clone(), Box::new(r(a))),
        Formula::ForallSet(v, a) => Formula::ForallSet(v.clone(), Box::new(r(a))),
        Formula::ExistsSet(v, a) => Formula::ExistsSet(v.clone(), Box::new(r(a))),
        Formula::Macro(n, args) => Formula::Macro(
            n.clone(),
            args.iter()
                .map(|a| match a {
                    Arg::Ind(tm) => Arg::Ind(t(tm)),
                    other => other.clone(),
                })
                .collect(),
        ),
    }
}
