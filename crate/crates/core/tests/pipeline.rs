use std::collections::BTreeSet;

use treebound_core::automata::{parse_automaton, write_automaton};
use treebound_core::compile::{compile, decide, Decision};
use treebound_core::eval::{evaluate_sentence, AuxRelations};
use treebound_core::grammar::{
    automaton_to_cfg, cfg_to_mso, enumerate_derivations, grammar_signature, is_derivation, parse_grammar,
};
use treebound_core::logic::{builtin_env, expand, parse_formula, Formula, Signature};
use treebound_core::tree::{all_trees, parse_tree, powerset_labels, serialize_tree};

fn sentence(text: &str, sig: &Signature) -> Formula {
    let env = builtin_env();
    expand(&parse_formula(text, sig, &env).unwrap(), &env).unwrap()
}

#[test]
fn witness_is_a_model() {
    let sig = Signature::new(["P", "Q"]);
    let f = sentence("ex x, y. (x < y & P(x) & Q(y))", &sig);
    let Decision::Sat(w) = decide(&f, &sig, 2).unwrap() else { panic!("satisfiable") };
    assert_eq!(serialize_tree(&w), "({P,Q} ({P,Q}))");
    assert!(evaluate_sentence(&w, &f, &AuxRelations::new()).unwrap());
    let contradiction = sentence("ex x. (P(x) & !P(x))", &sig);
    assert_eq!(decide(&contradiction, &sig, 2).unwrap(), Decision::Unsat);
}

#[test]
fn automaton_text_round_trips() {
    let sig = Signature::new(["P"]);
    let aut = compile(&sentence("all x. (P(x) -> ex y. x < y)", &sig), &sig, 2).unwrap();
    let back = parse_automaton(&write_automaton(&aut)).unwrap();
    for t in all_trees(4, 2, &powerset_labels(&["P"])) {
        assert_eq!(aut.accepts(&t).unwrap(), back.accepts(&t).unwrap(), "{}", serialize_tree(&t));
    }
}

#[test]
fn grammar_sentences_hold_on_derivations() {
    let g = parse_grammar("start: S\nterminals: a b\nS -> a S b | a b\n").unwrap();
    let sig = grammar_signature(&g);
    let phi = cfg_to_mso(&g, 3).unwrap();
    let derivations = enumerate_derivations(&g, 4).unwrap();
    assert!(!derivations.is_empty());
    for t in &derivations {
        assert!(is_derivation(&g, t));
        for f in &phi {
            assert!(evaluate_sentence(t, &expand(f, &builtin_env()).unwrap(), &AuxRelations::new()).unwrap());
        }
    }
    let broken = parse_tree("({S} ({a}) ({a}))", 3).unwrap();
    assert!(!is_derivation(&g, &broken));
    let all_hold = phi
        .iter()
        .all(|f| evaluate_sentence(&broken, &expand(f, &builtin_env()).unwrap(), &AuxRelations::new()).unwrap());
    assert!(!all_hold);
    assert!(sig.has_predicate("S"));
}

#[test]
fn automaton_grammar_projects_onto_accepted_trees() {
    let sig = Signature::new(["P"]);
    let aut = compile(&sentence("ex x. (P(x) & !ex y. x < y)", &sig), &sig, 2).unwrap();
    let g = automaton_to_cfg(&aut).unwrap();
    let projected: BTreeSet<String> =
        enumerate_derivations(&g, 3).unwrap().iter().map(|t| serialize_tree(&g.project(t))).collect();
    let accepted: BTreeSet<String> = all_trees(7, 2, &powerset_labels(&["P"]))
        .into_iter()
        .filter(|t| t.depth() <= 3 && aut.accepts(t).unwrap())
        .map(|t| serialize_tree(&t))
        .collect();
    assert_eq!(projected, accepted);
}
