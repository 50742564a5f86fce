//! Surface-syntax parser for formulas and definition files.
//!
//! ```text
//! formula  := quant | iff
//! quant    := ('all' | 'ex' | 'ex!' | 'All' | 'Ex') name (',' name)* '.' formula
//!             (the case of each variable decides its sort; 'All'/'Ex' are aliases)
//! iff      := imp ('<->' imp)*
//! imp      := or ('->' imp)?
//! or       := and ('|' and)*
//! and      := unary ('&' unary)*
//! unary    := '!' unary | quant | '(' formula ')' | 'true' | 'false'
//!           | term relop term | name '(' arg (',' arg)* ')'
//! relop    := '<' | '<*' | '<+' | '<<' | '=' | '!='
//! term     := name | '@' name
//! ```
//!
//! Names are identifiers (`[A-Za-z_][A-Za-z0-9_'-]*`, with `-` only between
//! alphanumerics) or double-quoted strings. `#` starts a comment.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::expand::{MacroDef, MacroEnv, Param};
use super::{Arg, Formula, LogicError, Rel, Signature, Sort, Term};

#[derive(Clone, PartialEq, Debug)]
enum Tok {
    Name(String, bool),
    At,
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
    Bang,
    And,
    Or,
    Imp,
    Iff,
    Rel(Rel),
    Neq,
    Define,
    ExUnique,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, LogicError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, m: String| LogicError::Syntax { line, column, message: m };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: l0, col: c0 });
            *i += len;
            *col += len;
        };
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            '&' => push(Tok::And, 1, &mut i, &mut col),
            '|' => push(Tok::Or, 1, &mut i, &mut col),
            '=' => push(Tok::Rel(Rel::Eq), 1, &mut i, &mut col),
            '!' if next == Some('=') => push(Tok::Neq, 2, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            '-' if next == Some('>') => push(Tok::Imp, 2, &mut i, &mut col),
            ':' if next == Some('=') => push(Tok::Define, 2, &mut i, &mut col),
            '<' => {
                let n2 = chars.get(i + 2).copied();
                match (next, n2) {
                    (Some('-'), Some('>')) => push(Tok::Iff, 3, &mut i, &mut col),
                    (Some('*'), _) => push(Tok::Rel(Rel::Dom), 2, &mut i, &mut col),
                    (Some('+'), _) => push(Tok::Rel(Rel::PDom), 2, &mut i, &mut col),
                    (Some('<'), _) => push(Tok::Rel(Rel::Left), 2, &mut i, &mut col),
                    _ => push(Tok::Rel(Rel::Parent), 1, &mut i, &mut col),
                }
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => return Err(err(l0, c0, "unterminated quoted name".into())),
                        Some('"') => break,
                        Some('\\') if j + 1 < chars.len() => {
                            s.push(chars[j + 1]);
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                if s.is_empty() {
                    return Err(err(l0, c0, "empty quoted name".into()));
                }
                let len = j + 1 - i;
                push(Tok::Name(s, true), len, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() {
                    let ch = chars[j];
                    let ok = ch.is_ascii_alphanumeric()
                        || ch == '_'
                        || ch == '\''
                        || (ch == '-'
                            && j > i
                            && chars.get(j + 1).is_some_and(|n| n.is_ascii_alphanumeric()));
                    if !ok {
                        break;
                    }
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                if s == "ex" && chars.get(j) == Some(&'!') && chars.get(j + 1) != Some(&'=') {
                    push(Tok::ExUnique, 3, &mut i, &mut col);
                } else {
                    let len = j - i;
                    push(Tok::Name(s, false), len, &mut i, &mut col);
                }
            }
            other => return Err(err(l0, c0, format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    sig: &'a Signature,
    env: &'a MacroEnv,
    /// Extra macro names (definitions of the file being parsed).
    extra_macros: &'a BTreeSet<String>,
    scope: Vec<(String, Sort)>,
    end_line: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Quant {
    All,
    Ex,
    ExUnique,
    AllSet,
    ExSet,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn err(&self, message: impl Into<String>) -> LogicError {
        let (line, column) = match self.toks.get(self.pos) {
            Some(s) => (s.line, s.col),
            None => (self.end_line, 0),
        };
        LogicError::Syntax { line, column, message: message.into() }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Name(n, _)) => format!("'{n}'"),
            Some(t) => format!("{t:?}"),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), LogicError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {}", self.describe())))
        }
    }

    fn name(&mut self) -> Result<(String, bool), LogicError> {
        match self.peek().cloned() {
            Some(Tok::Name(n, q)) => {
                self.pos += 1;
                Ok((n, q))
            }
            _ => Err(self.err(format!("expected a name, found {}", self.describe()))),
        }
    }

    fn quant_kw(&self) -> Option<Quant> {
        match self.peek() {
            Some(Tok::ExUnique) => Some(Quant::ExUnique),
            Some(Tok::Name(n, false)) => match n.as_str() {
                "all" => Some(Quant::All),
                "ex" => Some(Quant::Ex),
                "All" => Some(Quant::AllSet),
                "Ex" => Some(Quant::ExSet),
                _ => None,
            },
            _ => None,
        }
    }

    fn lookup(&self, name: &str) -> Option<Sort> {
        self.scope.iter().rev().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    fn formula(&mut self) -> Result<Formula, LogicError> {
        if self.quant_kw().is_some() {
            return self.quantified();
        }
        self.iff()
    }

    fn quantified(&mut self) -> Result<Formula, LogicError> {
        let q = self.quant_kw().unwrap();
        self.pos += 1;
        let mut vars = Vec::new();
        loop {
            let (v, quoted) = self.name()?;
            if !quoted && is_keyword(&v) {
                return Err(self.err(format!("'{v}' cannot be used as a variable")));
            }
            let sort = if starts_upper(&v) { Sort::Set } else { Sort::Ind };
            if sort == Sort::Set && q == Quant::ExUnique {
                return Err(LogicError::Sort(format!("'ex!' needs an individual variable, got {v}")));
            }
            vars.push((v, sort));
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.expect(Tok::Dot, "'.' after quantified variables")?;
        self.scope.extend(vars.iter().cloned());
        let body = self.formula();
        self.scope.truncate(self.scope.len() - vars.len());
        let mut f = body?;
        for (v, sort) in vars.into_iter().rev() {
            let b = Box::new(f);
            f = match (q, sort) {
                (Quant::ExUnique, _) => Formula::ExistsUnique(v, b),
                (Quant::All | Quant::AllSet, Sort::Ind) => Formula::ForallInd(v, b),
                (Quant::All | Quant::AllSet, Sort::Set) => Formula::ForallSet(v, b),
                (_, Sort::Ind) => Formula::ExistsInd(v, b),
                (_, Sort::Set) => Formula::ExistsSet(v, b),
            };
        }
        Ok(f)
    }

    fn iff(&mut self) -> Result<Formula, LogicError> {
        let mut f = self.imp()?;
        while self.peek() == Some(&Tok::Iff) {
            self.pos += 1;
            let g = self.imp_or_quant()?;
            f = Formula::iff(f, g);
        }
        Ok(f)
    }

    fn imp_or_quant(&mut self) -> Result<Formula, LogicError> {
        if self.quant_kw().is_some() {
            self.quantified()
        } else {
            self.imp()
        }
    }

    fn imp(&mut self) -> Result<Formula, LogicError> {
        let f = self.or()?;
        if self.peek() == Some(&Tok::Imp) {
            self.pos += 1;
            let g = if self.quant_kw().is_some() { self.quantified()? } else { self.imp()? };
            return Ok(Formula::implies(f, g));
        }
        Ok(f)
    }

    fn or(&mut self) -> Result<Formula, LogicError> {
        let mut f = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let g = self.and()?;
            f = Formula::or(f, g);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, LogicError> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let g = self.unary()?;
            f = Formula::and(f, g);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, LogicError> {
        if self.quant_kw().is_some() {
            return self.quantified();
        }
        match self.peek().cloned() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Some(Tok::Name(n, false)) if n == "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Name(n, false)) if n == "false" => {
                self.pos += 1;
                Ok(Formula::False)
            }
            Some(Tok::Name(_, _)) if self.peek_at(1) == Some(&Tok::LParen) => self.application(),
            Some(Tok::Name(_, _)) | Some(Tok::At) => self.relation_atom(),
            _ => Err(self.err(format!("expected a formula, found {}", self.describe()))),
        }
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        if self.peek() == Some(&Tok::At) {
            self.pos += 1;
            let (c, _) = self.name()?;
            return Ok(Term::Const(c));
        }
        let (v, quoted) = self.name()?;
        if !quoted && is_keyword(&v) {
            return Err(self.err(format!("unexpected keyword '{v}'")));
        }
        if self.lookup(&v) == Some(Sort::Set) {
            return Err(LogicError::Sort(format!("set variable {v} used as an individual")));
        }
        Ok(Term::Var(v))
    }

    fn relation_atom(&mut self) -> Result<Formula, LogicError> {
        let a = self.term()?;
        let (rel, neg) = match self.peek() {
            Some(Tok::Rel(r)) => (*r, false),
            Some(Tok::Neq) => (Rel::Eq, true),
            _ => return Err(self.err(format!("expected a relation, found {}", self.describe()))),
        };
        self.pos += 1;
        let b = self.term()?;
        let f = Formula::Atom(rel, a, b);
        Ok(if neg { Formula::not(f) } else { f })
    }

    fn arg(&mut self) -> Result<Arg, LogicError> {
        if self.peek() == Some(&Tok::At) {
            return Ok(Arg::Ind(self.term()?));
        }
        let (n, _) = self.name()?;
        Ok(match self.lookup(&n) {
            Some(Sort::Ind) => Arg::Ind(Term::Var(n)),
            Some(Sort::Set) => Arg::SetVar(n),
            None if self.sig.has_predicate(&n) => Arg::Pred(n),
            None if starts_upper(&n) => {
                if self.sig.open {
                    Arg::Pred(n)
                } else {
                    Arg::SetVar(n)
                }
            }
            None => Arg::Ind(Term::Var(n)),
        })
    }

    /// Under an open signature, reads free lowercase arguments of a macro as
    /// predicate names where the macro expects a set.
    fn resolve_predicate_args(&self, name: &str, args: &mut [Arg], unresolved: &[usize]) {
        let to_pred = |a: &mut Arg| {
            if let Arg::Ind(Term::Var(n)) = a {
                *a = Arg::Pred(core::mem::take(n));
            }
        };
        match self.env.get(name) {
            Some(MacroDef::Fixed { params, .. }) => {
                for &i in unresolved {
                    if params.get(i).is_some_and(|p| p.sort == Sort::Set) {
                        to_pred(&mut args[i]);
                    }
                }
            }
            Some(MacroDef::Poly { .. }) => {
                let mut sorts: Vec<Sort> =
                    args.iter().map(|a| if matches!(a, Arg::Ind(_)) { Sort::Ind } else { Sort::Set }).collect();
                if self.env.instantiate(name, &sorts).is_ok() {
                    return;
                }
                for &i in unresolved {
                    sorts[i] = Sort::Set;
                }
                if self.env.instantiate(name, &sorts).is_ok() {
                    for &i in unresolved {
                        to_pred(&mut args[i]);
                    }
                }
            }
            None => {}
        }
    }

    fn application(&mut self) -> Result<Formula, LogicError> {
        let (name, _) = self.name()?;
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        let mut unresolved = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                if let Some(Tok::Name(n, _)) = self.peek() {
                    if self.lookup(n).is_none() && !self.sig.has_predicate(n) && !starts_upper(n) {
                        unresolved.push(args.len());
                    }
                }
                args.push(self.arg()?);
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')' closing the argument list")?;
        let single_ind = || match args.as_slice() {
            [Arg::Ind(t)] => Some(t.clone()),
            _ => None,
        };
        let two_ind = || match args.as_slice() {
            [Arg::Ind(a), Arg::Ind(b)] => Some((a.clone(), b.clone())),
            _ => None,
        };
        let unary_sort_error = |what: &str| {
            LogicError::Sort(format!("{what} {name} takes exactly one individual argument"))
        };
        match self.lookup(&name) {
            Some(Sort::Set) => {
                return single_ind()
                    .map(|t| Formula::SetApp(name.clone(), t))
                    .ok_or_else(|| unary_sort_error("set variable"));
            }
            Some(Sort::Ind) => {
                return Err(LogicError::Sort(format!("individual variable {name} applied as a predicate")))
            }
            None => {}
        }
        if self.sig.has_predicate(&name) {
            return single_ind()
                .map(|t| Formula::Pred(name.clone(), t))
                .ok_or_else(|| unary_sort_error("predicate"));
        }
        if self.env.contains(&name) || self.extra_macros.contains(&name) {
            if self.sig.open {
                self.resolve_predicate_args(&name, &mut args, &unresolved);
            }
            return Ok(Formula::Macro(name, args));
        }
        if self.sig.has_aux(&name) {
            return two_ind()
                .map(|(a, b)| Formula::Aux(name.clone(), a, b))
                .ok_or_else(|| LogicError::Sort(format!("relation {name} takes two individual arguments")));
        }
        if let Some(t) = single_ind() {
            if self.sig.open {
                return Ok(Formula::Pred(name, t));
            }
            if starts_upper(&name) {
                return Ok(Formula::SetApp(name, t));
            }
            return Err(LogicError::UnknownName(name));
        }
        if self.sig.open {
            if let Some((a, b)) = two_ind() {
                return Ok(Formula::Aux(name, a, b));
            }
        }
        Err(LogicError::UnknownMacro(name))
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_uppercase())
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "all" | "ex" | "All" | "Ex" | "true" | "false")
}

fn parser<'a>(
    text: &str,
    sig: &'a Signature,
    env: &'a MacroEnv,
    extra: &'a BTreeSet<String>,
) -> Result<Parser<'a>, LogicError> {
    let toks = lex(text)?;
    let end_line = text.lines().count().max(1);
    Ok(Parser { toks, pos: 0, sig, env, extra_macros: extra, scope: Vec::new(), end_line })
}

/// Parses a single formula. Application names resolve, in order, to a bound set
/// variable, a signature predicate, a macro of `env`, a declared auxiliary relation,
/// and finally (for unknown unary uppercase names) a free set variable; an open
/// signature instead treats unknown unary names as predicates and binary ones as
/// auxiliary relations.
pub fn parse_formula(text: &str, sig: &Signature, env: &MacroEnv) -> Result<Formula, LogicError> {
    let empty = BTreeSet::new();
    let mut p = parser(text, sig, env, &empty)?;
    let f = p.formula()?;
    if p.peek() == Some(&Tok::Semi) {
        p.pos += 1;
    }
    if p.pos < p.toks.len() {
        return Err(p.err(format!("unexpected {} after formula", p.describe())));
    }
    Ok(f)
}

/// Parses a `;`-separated list of formulas (a trailing `;` is allowed).
pub fn parse_formulas(text: &str, sig: &Signature, env: &MacroEnv) -> Result<Vec<Formula>, LogicError> {
    let empty = BTreeSet::new();
    let mut p = parser(text, sig, env, &empty)?;
    let mut out = Vec::new();
    while p.pos < p.toks.len() {
        out.push(p.formula()?);
        match p.peek() {
            Some(Tok::Semi) => p.pos += 1,
            None => break,
            _ => return Err(p.err(format!("expected ';' between formulas, found {}", p.describe()))),
        }
    }
    Ok(out)
}

/// One `def Name(params) := body .` entry of a definition file.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Definition {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Formula,
}

/// Parses a definition file. Parameter sorts follow the case convention (uppercase
/// names are set parameters). Definitions may refer to each other in any order;
/// names unknown to the file and to `env` are read as predicates or auxiliary
/// relations.
pub fn parse_definitions(text: &str, env: &MacroEnv) -> Result<Vec<Definition>, LogicError> {
    let toks = lex(text)?;
    let mut names = BTreeSet::new();
    for w in toks.windows(2) {
        if let (Tok::Name(d, false), Tok::Name(n, _)) = (&w[0].tok, &w[1].tok) {
            if d == "def" {
                names.insert(n.clone());
            }
        }
    }
    let sig = Signature::open();
    let mut p = parser(text, &sig, env, &names)?;
    let mut out: Vec<Definition> = Vec::new();
    while p.pos < p.toks.len() {
        match p.peek() {
            Some(Tok::Name(d, false)) if d == "def" => p.pos += 1,
            _ => return Err(p.err(format!("expected 'def', found {}", p.describe()))),
        }
        let (name, _) = p.name()?;
        if out.iter().any(|d| d.name == name) {
            return Err(LogicError::Redefinition(name));
        }
        p.expect(Tok::LParen, "'(' after definition name")?;
        let mut params = Vec::new();
        if p.peek() != Some(&Tok::RParen) {
            loop {
                let (v, _) = p.name()?;
                let sort = if starts_upper(&v) { Sort::Set } else { Sort::Ind };
                if params.iter().any(|q: &Param| q.name == v) {
                    return Err(p.err(format!("duplicate parameter {v}")));
                }
                params.push(Param { name: v, sort });
                if p.peek() == Some(&Tok::Comma) {
                    p.pos += 1;
                } else {
                    break;
                }
            }
        }
        p.expect(Tok::RParen, "')' after parameters")?;
        p.expect(Tok::Define, "':='")?;
        p.scope = params.iter().map(|q| (q.name.clone(), q.sort)).collect();
        let body = p.formula()?;
        p.scope.clear();
        p.expect(Tok::Dot, "'.' ending the definition")?;
        out.push(Definition { name, params, body });
    }
    Ok(out)
}

impl core::str::FromStr for Formula {
    type Err = LogicError;

    /// Parses with an open signature and the builtin macros.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s, &Signature::open(), &super::builtin_env())
    }
}
