use alloc::string::ToString;
use alloc::vec;

use super::*;
use crate::tree::{all_trees, powerset_labels, serialize_tree};

const PAIR_AUTOMATON: &str = "\
arity: 2
bits: A B D a
symbols: {A} {B} {D} {a}
kind: partial
states: 4
final: 0
trans {B} () -> 1
trans {a} () -> 2
trans {D} () -> 3
trans {A} (1 2) -> 0
trans {A} (0 1) -> 0
trans {B} (1 3) -> 1
";

fn pair_tree() -> LabeledTree {
    parse_tree("({A} ({A} ({B}) ({a})) ({B} ({B}) ({D})))", 2).unwrap()
}

fn set(labels: &[&str]) -> BTreeSet<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

/// Two-state automaton for "some node is labeled P" over bits [P].
fn some_p() -> TreeAutomaton {
    let mut trans = Vec::new();
    for (labels, hit) in [(set(&[]), 0u32), (set(&["P"]), 1)] {
        trans.push((labels.clone(), vec![], hit));
        for a in 0..2 {
            trans.push((labels.clone(), vec![a], hit.max(a)));
            for b in 0..2 {
                trans.push((labels.clone(), vec![a, b], hit.max(a).max(b)));
            }
        }
    }
    TreeAutomaton::new(vec!["P".into()], None, 2, 2, &[1], &trans, Kind::Total).unwrap()
}

/// Nodes labeled P all have an even number of P-labeled descendants (mod-2 counting).
fn parity() -> TreeAutomaton {
    let mut trans = Vec::new();
    for p in 0..2u32 {
        let labels = if p == 1 { set(&["P"]) } else { set(&[]) };
        trans.push((labels.clone(), vec![], p));
        for a in 0..2 {
            trans.push((labels.clone(), vec![a], (p + a) % 2));
            for b in 0..2 {
                trans.push((labels.clone(), vec![a, b], (p + a + b) % 2));
            }
        }
    }
    TreeAutomaton::new(vec!["P".into()], None, 2, 2, &[0], &trans, Kind::Total).unwrap()
}

fn trees_p(n: usize) -> Vec<LabeledTree> {
    all_trees(n, 2, &powerset_labels(&["P"]))
}

fn count_p(t: &LabeledTree) -> usize {
    (0..t.len()).filter(|&i| t.node_at(i).labels.contains("P")).count()
}

#[test]
fn pair_automaton_run_matches_annotations() {
    let a = parse_automaton(PAIR_AUTOMATON).unwrap();
    assert!(a.is_deterministic());
    let run = a.run(&pair_tree()).unwrap();
    assert!(run.accepted);
    assert_eq!(run.state_at(&Address::root()), Some(0));
    assert_eq!(run.breadth_first(), vec![0, 0, 1, 1, 2, 1, 3]);
    assert_eq!(a.run(&pair_tree()).unwrap(), run);
}

#[test]
fn some_p_rejects_p_free_trees() {
    let a = some_p();
    for t in trees_p(5) {
        assert_eq!(a.accepts(&t).unwrap(), count_p(&t) > 0, "{}", serialize_tree(&t));
    }
    let single = LabeledTree::leaf(Vec::<String>::new());
    let run = a.run(&single).unwrap();
    assert_eq!(run.states, vec![0]);
}

#[test]
fn run_errors() {
    let a = parse_automaton(PAIR_AUTOMATON).unwrap();
    let bad = parse_tree("({A,B})", 2).unwrap();
    assert!(matches!(a.run(&bad), Err(AutomatonError::LabelNotInAlphabet(_))));
    let wide = parse_tree("({A} ({B}) ({B}) ({B}))", 3).unwrap();
    assert!(matches!(a.run(&wide), Err(AutomatonError::ArityExceeded { .. })));
}

#[test]
fn boolean_operations_pointwise() {
    let (a, b) = (some_p(), parity());
    let and = a.intersect(&b).unwrap();
    let or = a.union(&b).unwrap();
    let not_a = a.complement().unwrap();
    let contradiction = a.intersect(&not_a).unwrap();
    let middle = a.union(&not_a).unwrap();
    assert!(contradiction.is_empty());
    for t in trees_p(6) {
        let (x, y) = (a.accepts(&t).unwrap(), b.accepts(&t).unwrap());
        assert_eq!(and.accepts(&t).unwrap(), x && y);
        assert_eq!(or.accepts(&t).unwrap(), x || y);
        assert_eq!(not_a.accepts(&t).unwrap(), !x);
        assert!(!contradiction.accepts(&t).unwrap());
        assert!(middle.accepts(&t).unwrap());
    }
}

#[test]
fn alignment_widens_bit_universes() {
    let a = some_p();
    let q = {
        let s = write_automaton(&some_p()).replace("bits: P", "bits: Q").replace("{P}", "{Q}");
        parse_automaton(&s).unwrap()
    };
    let both = a.intersect(&q).unwrap();
    assert_eq!(both.bits(), &["P".to_string(), "Q".to_string()]);
    for t in all_trees(4, 2, &powerset_labels(&["P", "Q"])) {
        let has = |l: &str| (0..t.len()).any(|i| t.node_at(i).labels.contains(l));
        assert_eq!(both.accepts(&t).unwrap(), has("P") && has("Q"));
    }
    let pair = parse_automaton(PAIR_AUTOMATON).unwrap();
    assert!(matches!(pair.intersect(&a), Err(AutomatonError::AlphabetMismatch(_))));
}

/// Automaton over bits [P, x] accepting trees where exactly one node carries x
/// and that node carries P.
fn marked_p() -> TreeAutomaton {
    // states: 0 no mark, 1 one good mark, 2 bad (mark without P or two marks)
    let mut trans = Vec::new();
    let combine = |own: u32, kids: &[u32]| -> u32 {
        let marks = kids.iter().map(|&k| if k == 2 { 2 } else { k }).sum::<u32>() + own;
        if kids.contains(&2) || marks > 1 || own == 2 {
            2
        } else {
            marks
        }
    };
    for labels in powerset_labels(&["P", "x"]) {
        let own = match (labels.contains("x"), labels.contains("P")) {
            (false, _) => 0,
            (true, true) => 1,
            (true, false) => 2,
        };
        trans.push((labels.clone(), vec![], combine(own, &[])));
        for a in 0..3 {
            trans.push((labels.clone(), vec![a], combine(own, &[a])));
            for b in 0..3 {
                trans.push((labels.clone(), vec![a, b], combine(own, &[a, b])));
            }
        }
    }
    TreeAutomaton::new(vec!["P".into(), "x".into()], None, 2, 3, &[1], &trans, Kind::Total).unwrap()
}

#[test]
fn projection_matches_brute_force() {
    let a = marked_p();
    let p = a.project("x").unwrap();
    assert!(!p.is_deterministic());
    assert_eq!(p.bits(), &["P".to_string()]);
    let d = p.determinize().unwrap();
    let reference = some_p();
    for t in trees_p(5) {
        let brute = (0..1u32 << t.len()).any(|mask| {
            let marked = t.clone().map_labels(|l| l.clone());
            let mut marked = marked;
            for i in 0..t.len() {
                if mask >> i & 1 == 1 {
                    marked.labels_mut(i).insert("x".into());
                }
            }
            a.accepts(&marked).unwrap()
        });
        assert_eq!(p.accepts(&t).unwrap(), brute);
        assert_eq!(d.accepts(&t).unwrap(), brute);
        assert_eq!(reference.accepts(&t).unwrap(), brute);
    }
    assert!(matches!(a.project("y"), Err(AutomatonError::UnknownBit(_))));
}

#[test]
fn vacuous_projection_keeps_language() {
    let a = some_p().cylindrify(&["P".into(), "z".into()]).unwrap();
    let back = a.project("z").unwrap().determinize().unwrap();
    for t in trees_p(5) {
        assert_eq!(back.accepts(&t).unwrap(), some_p().accepts(&t).unwrap());
    }
}

#[test]
fn determinize_empty_and_deterministic_inputs() {
    let empty = TreeAutomaton::new(vec!["P".into()], None, 2, 1, &[0], &[], Kind::Nondet).unwrap();
    let d = empty.determinize().unwrap();
    assert!(d.is_deterministic());
    assert!(d.is_empty());
    let r = d.reachable_states();
    assert!(d.finals().iter().all(|&q| !r[q as usize]));

    let a = parity();
    let d = a.determinize().unwrap();
    for t in trees_p(5) {
        assert_eq!(d.accepts(&t).unwrap(), a.accepts(&t).unwrap());
    }
}

#[test]
fn state_cap_is_enforced() {
    let a = marked_p().project("x").unwrap().with_state_cap(1);
    assert_eq!(a.determinize(), Err(AutomatonError::StateCap(1)));
}

#[test]
fn minimization_preserves_language() {
    let a = some_p().union(&parity()).unwrap().intersect(&some_p()).unwrap();
    let m = a.minimize().unwrap();
    assert!(m.num_states() <= a.num_states());
    assert_eq!(some_p().minimize().unwrap().num_states(), 2);
    for t in trees_p(5) {
        assert_eq!(m.accepts(&t).unwrap(), a.accepts(&t).unwrap());
    }
}

#[test]
fn witnesses() {
    let everything = TreeAutomaton::new(vec!["P".into()], None, 2, 1, &[0], &[], Kind::Partial)
        .unwrap()
        .complement()
        .unwrap();
    // the sink is the only state and it is final after complementing
    let w = everything.witness().unwrap();
    assert_eq!(serialize_tree(&w), "({P})");

    let p = parse_automaton(PAIR_AUTOMATON).unwrap();
    let w = p.witness().unwrap();
    assert_eq!(serialize_tree(&w), "({A} ({B}) ({a}))");

    assert!(some_p().complement().unwrap().intersect(&some_p()).unwrap().witness().is_none());
}

#[test]
fn witness_is_minimal_among_accepted_trees() {
    let a = parity().complement().unwrap().intersect(&some_p()).unwrap();
    let w = a.witness().unwrap();
    assert!(a.accepts(&w).unwrap());
    let smaller: Vec<_> = trees_p(w.len()).into_iter().filter(|t| a.accepts(t).unwrap()).collect();
    let least = smaller.iter().map(|t| (t.len(), serialize_tree(t))).min().unwrap();
    assert_eq!(least, (w.len(), serialize_tree(&w)));
}

#[test]
fn text_format_round_trip() {
    for a in [parse_automaton(PAIR_AUTOMATON).unwrap(), some_p(), marked_p().project("x").unwrap()] {
        let text = write_automaton(&a);
        let b = parse_automaton(&text).unwrap();
        assert_eq!(a, b, "{text}");
    }
}

#[test]
fn text_format_errors() {
    let partial = PAIR_AUTOMATON.replace("kind: partial", "kind: det");
    assert!(matches!(parse_automaton(&partial), Err(AutomatonError::NotTotal { .. })));
    let bad = PAIR_AUTOMATON.replace("trans {D} () -> 3", "trans {D} () -> 9");
    assert_eq!(parse_automaton(&bad), Err(AutomatonError::InvalidState(9)));
    let bad = PAIR_AUTOMATON.replace("-> 3", "3");
    assert!(matches!(parse_automaton(&bad), Err(AutomatonError::Parse { line: 9, .. })));
    let bad = PAIR_AUTOMATON.replace("trans {D}", "trans {E}");
    assert!(matches!(parse_automaton(&bad), Err(AutomatonError::LabelNotInAlphabet(_))));
    assert!(matches!(parse_automaton("arity: 1\n"), Err(AutomatonError::Parse { .. })));
}
