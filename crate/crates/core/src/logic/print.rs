//! Surface-syntax printing. Output re-parses to the same tree under the
//! signature it was parsed with.

use core::fmt::{self, Write};

use super::{Arg, Formula, Rel, Term};

pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else { return false };
    if !(first.is_ascii_alphabetic() || first == '_') {
        return false;
    }
    let bytes = s.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let ok = b.is_ascii_alphanumeric()
            || b == b'_'
            || b == b'\''
            || (b == b'-' && i > 0 && bytes.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric()));
        if !ok {
            return false;
        }
    }
    !matches!(s, "all" | "ex" | "All" | "Ex" | "true" | "false" | "def")
}

pub(crate) fn write_name(f: &mut impl Write, s: &str) -> fmt::Result {
    if is_plain_ident(s) {
        f.write_str(s)
    } else {
        f.write_char('"')?;
        for c in s.chars() {
            if c == '"' || c == '\\' {
                f.write_char('\\')?;
            }
            f.write_char(c)?;
        }
        f.write_char('"')
    }
}

fn write_term(f: &mut impl Write, t: &Term) -> fmt::Result {
    match t {
        Term::Var(v) => write_name(f, v),
        Term::Const(c) => {
            f.write_char('@')?;
            write_name(f, c)
        }
    }
}

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::ForallInd(..)
        | Formula::ExistsInd(..)
        | Formula::ExistsUnique(..)
        | Formula::ForallSet(..)
        | Formula::ExistsSet(..) => 0,
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::Or(..) => 3,
        Formula::And(..) => 4,
        Formula::Not(..) => 5,
        _ => 6,
    }
}

fn write_prec(f: &mut impl Write, g: &Formula, min: u8) -> fmt::Result {
    if prec(g) < min {
        f.write_char('(')?;
        write_formula(f, g)?;
        f.write_char(')')
    } else {
        write_formula(f, g)
    }
}

pub(crate) fn write_formula(f: &mut impl Write, g: &Formula) -> fmt::Result {
    match g {
        Formula::True => f.write_str("true"),
        Formula::False => f.write_str("false"),
        Formula::Atom(r, a, b) => {
            write_term(f, a)?;
            write!(f, " {} ", r.symbol())?;
            write_term(f, b)
        }
        Formula::Pred(p, t) | Formula::SetApp(p, t) => {
            write_name(f, p)?;
            f.write_char('(')?;
            write_term(f, t)?;
            f.write_char(')')
        }
        Formula::Aux(r, a, b) => {
            write_name(f, r)?;
            f.write_char('(')?;
            write_term(f, a)?;
            f.write_str(", ")?;
            write_term(f, b)?;
            f.write_char(')')
        }
        Formula::Macro(name, args) => {
            write_name(f, name)?;
            f.write_char('(')?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                match a {
                    Arg::Ind(t) => write_term(f, t)?,
                    Arg::SetVar(s) | Arg::Pred(s) => write_name(f, s)?,
                }
            }
            f.write_char(')')
        }
        Formula::Not(a) => {
            if let Formula::Atom(Rel::Eq, x, y) = &**a {
                write_term(f, x)?;
                f.write_str(" != ")?;
                return write_term(f, y);
            }
            f.write_char('!')?;
            write_prec(f, a, 5)
        }
        Formula::And(a, b) => {
            write_prec(f, a, 4)?;
            f.write_str(" & ")?;
            write_prec(f, b, 5)
        }
        Formula::Or(a, b) => {
            write_prec(f, a, 3)?;
            f.write_str(" | ")?;
            write_prec(f, b, 4)
        }
        Formula::Implies(a, b) => {
            write_prec(f, a, 3)?;
            f.write_str(" -> ")?;
            write_prec(f, b, 2)
        }
        Formula::Iff(a, b) => {
            write_prec(f, a, 1)?;
            f.write_str(" <-> ")?;
            write_prec(f, b, 2)
        }
        Formula::ForallInd(v, a)
        | Formula::ExistsInd(v, a)
        | Formula::ExistsUnique(v, a)
        | Formula::ForallSet(v, a)
        | Formula::ExistsSet(v, a) => {
            let q = match g {
                Formula::ForallInd(..) => "all",
                Formula::ExistsInd(..) => "ex",
                Formula::ExistsUnique(..) => "ex!",
                Formula::ForallSet(..) => "All",
                _ => "Ex",
            };
            f.write_str(q)?;
            f.write_char(' ')?;
            write_name(f, v)?;
            f.write_str(". ")?;
            write_formula(f, a)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self)
    }
}
