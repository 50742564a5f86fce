use alloc::string::ToString;
use alloc::vec;

use super::*;

fn sig(preds: &[&str]) -> Signature {
    Signature::new(preds.iter().copied())
}

fn p(text: &str, s: &Signature) -> Formula {
    parse_formula(text, s, &builtin_env()).unwrap()
}

#[test]
fn parse_quantified_predicate() {
    let f = p("ex x. NP(x)", &sig(&["NP"]));
    assert_eq!(f, Formula::exists("x", Formula::pred("NP", "x")));
}

#[test]
fn parse_nested_quantifiers() {
    let f = p("all x. all y. (x < y -> x <* y)", &sig(&[]));
    let expect = Formula::forall(
        "x",
        Formula::forall(
            "y",
            Formula::implies(Formula::atom(Rel::Parent, "x", "y"), Formula::atom(Rel::Dom, "x", "y")),
        ),
    );
    assert_eq!(f, expect);
    assert_eq!(p("all x, y. (x < y -> x <* y)", &sig(&[])), expect);
}

#[test]
fn open_formula_with_free_individual() {
    let f = p("ex X. X(x)", &sig(&[]));
    assert_eq!(f, Formula::exists_set("X", Formula::set("X", "x")));
    let (i, s) = free_variables(&f);
    assert_eq!(i.into_iter().collect::<Vec<_>>(), vec!["x"]);
    assert!(s.is_empty());
}

#[test]
fn free_variable_examples() {
    let (i, s) = free_variables(&p("ex x. X(x)", &sig(&[])));
    assert!(i.is_empty());
    assert_eq!(s.into_iter().collect::<Vec<_>>(), vec!["X"]);
    let (i, s) = free_variables(&p("NP(x)", &sig(&["NP"])));
    assert_eq!(i.into_iter().collect::<Vec<_>>(), vec!["x"]);
    assert!(s.is_empty());
    assert!(p("all x. ex y. x << y", &sig(&[])).is_closed());
}

#[test]
fn precedence_and_associativity() {
    let s = sig(&["A", "B", "C"]);
    let a = || Formula::pred("A", "x");
    let b = || Formula::pred("B", "x");
    let c = || Formula::pred("C", "x");
    assert_eq!(p("A(x) | B(x) & C(x)", &s), Formula::or(a(), Formula::and(b(), c())));
    assert_eq!(p("A(x) -> B(x) -> C(x)", &s), Formula::implies(a(), Formula::implies(b(), c())));
    assert_eq!(p("!A(x) & B(x)", &s), Formula::and(Formula::not(a()), b()));
    assert_eq!(p("A(x) <-> B(x) | C(x)", &s), Formula::iff(a(), Formula::or(b(), c())));
    assert_eq!(
        p("A(x) & all y. B(y) | C(y)", &s),
        Formula::and(a(), Formula::forall("y", Formula::or(Formula::pred("B", "y"), Formula::pred("C", "y"))))
    );
    assert_eq!(p("x != y", &s), Formula::not(Formula::atom(Rel::Eq, "x", "y")));
}

#[test]
fn syntax_and_sort_errors() {
    let s = sig(&["P"]);
    let env = builtin_env();
    assert!(matches!(parse_formula("ex x. (P(x)", &s, &env), Err(LogicError::Syntax { .. })));
    assert!(matches!(parse_formula("ex X. X < y", &s, &env), Err(LogicError::Sort(_))));
    assert!(matches!(parse_formula("ex x. x(y)", &s, &env), Err(LogicError::Sort(_))));
    assert!(matches!(parse_formula("P(x, y)", &s, &env), Err(LogicError::Sort(_))));
    assert!(matches!(parse_formula("foo(x)", &s, &env), Err(LogicError::UnknownName(_))));
    assert!(matches!(parse_formula("Foo(x, y)", &s, &env), Err(LogicError::UnknownMacro(_))));
    match parse_formula("all x.\n  (P(x) &)", &s, &env) {
        Err(LogicError::Syntax { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn aux_relations_need_declaration() {
    let s = sig(&[]).with_aux(["CI"]);
    assert_eq!(
        p("CI(x, y)", &s),
        Formula::Aux("CI".into(), Term::var("x"), Term::var("y"))
    );
    assert_eq!(
        p("CI(x, y)", &Signature::open()),
        Formula::Aux("CI".into(), Term::var("x"), Term::var("y"))
    );
}

#[test]
fn lowercase_predicates_and_macro_arguments() {
    let s = sig(&["A", "c"]);
    let f = p("(all x. (c(x) -> Children(x))) & All N. Partition(A, c, N)", &s);
    match &f {
        Formula::And(_, b) => match &**b {
            Formula::ForallSet(_, body) => assert_eq!(
                **body,
                Formula::call(
                    "Partition",
                    vec![Arg::Pred("A".into()), Arg::Pred("c".into()), Arg::SetVar("N".into())]
                )
            ),
            other => panic!("{other:?}"),
        },
        other => panic!("{other:?}"),
    }
}

#[test]
fn open_signature_reads_set_arguments_as_predicates() {
    let f = p("All N. Partition(A, c, N)", &Signature::open());
    let Formula::ForallSet(_, body) = &f else { panic!("{f:?}") };
    assert_eq!(
        **body,
        Formula::call("Partition", vec![Arg::Pred("A".into()), Arg::Pred("c".into()), Arg::SetVar("N".into())])
    );
    let mut env = builtin_env();
    env.load("def Has(X, y) := X(y) .").unwrap();
    assert_eq!(
        parse_formula("Has(p, y)", &Signature::open(), &env).unwrap(),
        Formula::call("Has", vec![Arg::Pred("p".into()), Arg::Ind(Term::var("y"))])
    );
    assert_eq!(
        p("Children(x, y)", &Signature::open()),
        Formula::call("Children", vec![Arg::Ind(Term::var("x")), Arg::Ind(Term::var("y"))])
    );
}

#[test]
fn print_round_trips() {
    let s = sig(&["P", "Q", "A.q3"]).with_aux(["CI"]).with_constants(["k"]);
    for text in [
        "all x. (P(x) -> ex y. x < y & Q(y))",
        "(P(x) -> Q(x)) -> P(x)",
        "P(x) <-> (Q(x) <-> P(x))",
        "!(x = y) & x != y | x << @k",
        "Ex X. All Y. (Subset(Y, X) | X(x) & !Y(x))",
        "ex! x. O(x)",
        "\"A.q3\"(x) & CI(x, y) & true & !false",
        "(all x. P(x)) & Q(y)",
        "P(x) & (Q(x) & P(y))",
        "!!P(x)",
    ] {
        let f = p(text, &s);
        let printed = f.to_string();
        assert_eq!(p(&printed, &s), f, "{text} printed as {printed}");
    }
}

#[test]
fn pdom_expansion() {
    let f = p("x <+ y", &sig(&[]));
    let e = expand(&f, &builtin_env()).unwrap();
    assert_eq!(
        e,
        Formula::and(Formula::atom(Rel::Dom, "x", "y"), Formula::not(Formula::atom(Rel::Eq, "x", "y")))
    );
}

#[test]
fn subset_expansion() {
    let f = p("Subset(X, Y)", &sig(&[]));
    let e = expand(&f, &builtin_env()).unwrap();
    match e {
        Formula::ForallInd(v, body) => {
            assert_eq!(*body, Formula::implies(Formula::set("X", &v), Formula::set("Y", &v)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn exists_unique_expansion() {
    let f = p("ex! x. P(x)", &sig(&["P"]));
    let e = expand(&f, &builtin_env()).unwrap();
    match e {
        Formula::ExistsInd(x, body) => {
            assert_eq!(x, "x");
            match *body {
                Formula::And(a, b) => {
                    assert_eq!(*a, Formula::pred("P", "x"));
                    match *b {
                        Formula::ForallInd(y, inner) => {
                            assert_ne!(y, "x");
                            assert_eq!(
                                *inner,
                                Formula::implies(Formula::pred("P", &y), Formula::atom(Rel::Eq, &y, "x"))
                            );
                        }
                        other => panic!("{other:?}"),
                    }
                }
                other => panic!("{other:?}"),
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn builtin_bodies() {
    let env = builtin_env();
    let body = |name: &str, sorts: &[Sort]| env.instantiate(name, sorts).unwrap().1;
    let o = Signature::open();
    let ii = [Sort::Ind, Sort::Ind];
    assert_eq!(body("LexLe", &ii), p("x <* y | x << y", &o));
    assert_eq!(body("O", &[Sort::Ind]), p("all y. (y <* x -> y = x)", &o));
    assert_eq!(body("R0", &ii), p("x < y & all z. (x < z -> !(z << y))", &o));
    assert_eq!(body("R1", &ii), p("x < y & all z. (x < z -> !(y << z))", &o));
    match body("Finite", &[Sort::Set]) {
        Formula::ForallSet(_, inner) => {
            assert!(inner.to_string().contains("LexLe"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(body("Agree", &ii), Formula::True);
    let (params, f) = env.instantiate("Partition", &[Sort::Set, Sort::Set, Sort::Set]).unwrap();
    assert_eq!(params.len(), 3);
    assert_eq!(f, p("all x. ((Y(x) <-> X1(x) | X2(x)) & (X1(x) -> !X2(x)) & (X2(x) -> !X1(x)))", &sig(&[])));
    assert!(env.instantiate("Partition", &[Sort::Set]).is_err());
    assert!(env.instantiate("Children", &[Sort::Set]).is_err());
}

#[test]
fn expansion_avoids_capture() {
    // C-Command binds z internally; passing z as an argument must not be captured.
    let env = builtin_env();
    let f = p("C-Command(z, x)", &sig(&[]));
    let e = expand(&f, &env).unwrap();
    let (free, _) = free_variables(&e);
    assert_eq!(free.into_iter().collect::<Vec<_>>(), vec!["x", "z"]);
    assert!(!e.contains_macros());
}

#[test]
fn expansion_is_idempotent() {
    let env = builtin_env();
    let f = p("all x. (Governs(x, y) | ex! z. Branches(z)) & Finite(X) & x <+ y", &sig(&[]));
    let once = expand(&f, &env).unwrap();
    let twice = expand(&once, &env).unwrap();
    assert_eq!(once, twice);
    // and survives printing
    let reparsed = p(&once.to_string(), &sig(&["Barrier"]));
    assert_eq!(reparsed, once);
}

#[test]
fn definition_files() {
    let mut env = builtin_env();
    env.load(
        "# comment\n\
         def Later(x) := Earlier(x) & Foo(x) .\n\
         def Earlier(x) := ex Y. (Y(x) & Subset(Y, Bar)) .\n\
         def Pair(x, Z) := Z(x) & Rel(x, x) .",
    )
    .unwrap();
    let f = parse_formula("Later(x) & Pair(x, W)", &sig(&["Foo", "Bar"]), &env).unwrap();
    let e = expand(&f, &env).unwrap();
    assert!(e.predicates().contains("Foo"));
    assert!(e.predicates().contains("Bar"));
    assert!(e.aux_relations().contains("Rel"));
    let (_, sets) = free_variables(&e);
    assert!(sets.contains("W"));

    assert_eq!(env.load("def Subset(X, Y) := true ."), Err(LogicError::Redefinition("Subset".into())));
    let mut env = MacroEnv::new();
    assert!(matches!(
        env.load("def A(x) := B(x) . def B(x) := A(x) ."),
        Err(LogicError::CyclicMacro(_))
    ));
}

#[test]
fn wrong_argument_count_or_sort() {
    let env = builtin_env();
    let f = Formula::call("O", vec![]);
    assert!(matches!(expand(&f, &env), Err(LogicError::ArgumentCount { .. })));
    let f = Formula::call("O", vec![Arg::SetVar("X".into())]);
    assert!(matches!(expand(&f, &env), Err(LogicError::Sort(_))));
    let f = Formula::call("Nope", vec![]);
    assert!(matches!(expand(&f, &env), Err(LogicError::UnknownMacro(_))));
}

#[test]
fn formula_lists() {
    let fs = parse_formulas("ex x. P(x);\n all x. P(x) ;", &sig(&["P"]), &builtin_env()).unwrap();
    assert_eq!(fs.len(), 2);
    assert_eq!(fs[1].to_string(), "all x. P(x)");
}
