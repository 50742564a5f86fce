use super::*;
use treebound_core::eval::Program;

fn ids(tree: &LabeledTree, nodes: &[usize]) -> Vec<u64> {
    nodes.iter().map(|&i| tree.node_at(i).id.expect("bundled nodes have ids")).collect()
}

fn index(tree: &LabeledTree, id: u64) -> usize {
    (0..tree.len()).find(|&i| tree.node_at(i).id == Some(id)).expect("id present")
}

fn holds(text: &str, tree: &LabeledTree, s: &Assignment) -> bool {
    let env = gb_env();
    let f = parse_formula(text, &Signature::open(), &env).unwrap();
    Program::new(&expand(&f, &env).unwrap()).unwrap().run(tree, s, &AuxRelations::new()).unwrap()
}

#[test]
fn libraries_load() {
    let env = gb_env();
    for name in ["Licensing", "Identification", "Generalized-Identification", "Link", "Chain", "Grid", "Same-Point"] {
        assert!(env.contains(name), "{name}");
    }
    let mut twice = gb_env();
    assert!(twice.load(GB_MSO).is_err());
}

#[test]
fn bundled_examples_parse_and_fit_the_signature() {
    for ex in EXAMPLES {
        let t = ex.tree();
        check_signature(&t).unwrap();
        assert_eq!(ids(&t, &(0..t.len()).collect::<Vec<_>>()), (1..=t.len() as u64).collect::<Vec<_>>());
    }
    assert_eq!(example("ecp_violation").unwrap().expected, Expected::IdentificationFailure);
    assert!(example("no_such_tree").is_none());
}

#[test]
fn verdicts_match_expectations() {
    for ex in EXAMPLES {
        let t = ex.tree();
        let j = judge(&t).unwrap();
        assert!(j.passes(Principle::Licensing), "{}", ex.name);
        match ex.expected {
            Expected::Pass => assert!(j.pass(), "{}: {}", ex.name, j.report(&t)),
            Expected::IdentificationFailure => assert!(!j.passes(Principle::Identification), "{}", ex.name),
        }
    }
}

#[test]
fn ecp_violation_flags_the_subject_chain() {
    let t = example("ecp_violation").unwrap().tree();
    let j = judge(&t).unwrap();
    // Who has no base position once its subject trace is unlinked, and the
    // trace in the embedded subject has no antecedent.
    assert_eq!(ids(&t, j.offending(Principle::Identification)), [2, 19]);
    assert!(t.node_at(index(&t, 2)).labels.contains("who"));
    let trace = &t.node_at(index(&t, 19)).labels;
    assert!(trace.contains("Trace") && trace.contains("Spec") && trace.contains("APos"));
    assert_eq!(j.report(&t), "licensing pass\nidentification fail 2 19\nchain-formation pass\n");
}

#[test]
fn object_extraction_has_two_nontrivial_chains() {
    let t = example("object_extraction").unwrap().tree();
    let mut long: Vec<Vec<u64>> = chains(&t, 10_000)
        .unwrap()
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let mut v: Vec<u64> = c.iter().map(|a| t.node_at(t.index_of(a).unwrap()).id.unwrap()).collect();
            v.sort();
            v
        })
        .collect();
    long.sort();
    assert_eq!(long, [vec![2, 15, 25], vec![5, 10]]);
    let mut links = links(&t).unwrap();
    links.sort();
    let pairs: Vec<(u64, u64)> = links.iter().map(|&(x, y)| (ids(&t, &[x])[0], ids(&t, &[y])[0])).collect();
    assert_eq!(pairs, [(2, 15), (5, 10), (15, 25)]);
}

#[test]
fn every_node_of_a_passing_tree_lies_on_a_chain() {
    for ex in EXAMPLES.iter().filter(|e| e.expected == Expected::Pass) {
        let t = ex.tree();
        let covered: BTreeSet<Address> = chains(&t, 10_000).unwrap().into_iter().flatten().collect();
        assert_eq!(covered.len(), t.len(), "{}", ex.name);
    }
}

#[test]
fn link_is_one_to_one_on_passing_trees() {
    for ex in EXAMPLES.iter().filter(|e| e.expected == Expected::Pass) {
        let t = ex.tree();
        let ls = links(&t).unwrap();
        let heads: BTreeSet<usize> = ls.iter().map(|l| l.0).collect();
        let tails: BTreeSet<usize> = ls.iter().map(|l| l.1).collect();
        assert_eq!(heads.len(), ls.len(), "{}", ex.name);
        assert_eq!(tails.len(), ls.len(), "{}", ex.name);
    }
}

#[test]
fn dutch_verb_traces_have_many_antecedents() {
    let t = example("dutch_head_raising").unwrap().tree();
    let into_24 = links(&t).unwrap().into_iter().filter(|&(_, y)| y == index(&t, 24)).count();
    assert!(into_24 > 1);
    assert!(!judge(&t).unwrap().passes(Principle::ChainFormation));
}

#[test]
fn ungoverned_trace_breaks_licensing() {
    let text = example("object_extraction")
        .unwrap()
        .text
        .replace("{Bar0,Base,Target,V,invite}", "{Base,Target,V,invite}")
        .replace("{Bar2,Base,Target,VP} #22", "{Bar2,Barrier,Base,Target,VP} #22");
    let t = parse_tree(&text, DEFAULT_ARITY).unwrap();
    let j = judge(&t).unwrap();
    assert_eq!(ids(&t, j.offending(Principle::Licensing)), [25]);
    assert!(j.report(&t).starts_with("licensing fail 25\n"));
}

#[test]
fn signature_violations_are_errors() {
    let unknown = parse_tree("({Bar2,CP,Target,Base} ({Foo,Target,Base}))", DEFAULT_ARITY).unwrap();
    assert!(matches!(judge(&unknown), Err(Error::Gb(m)) if m.contains("Foo")));
    let two_bars = parse_tree("({Bar0,Bar2,Target,Base})", DEFAULT_ARITY).unwrap();
    assert!(matches!(check_signature(&two_bars), Err(Error::Gb(m)) if m.contains("two bar levels")));
}

#[test]
fn node_names_fall_back_to_addresses() {
    let t = parse_tree("({NP} ({N} #7) ({N}))", DEFAULT_ARITY).unwrap();
    assert_eq!(node_name(&t, 1), "7");
    assert_eq!(node_name(&t, 2), t.address(2).to_string());
}

#[test]
fn library_macros_on_small_trees() {
    let t = parse_tree("({A} ({B}) ({C} ({D})))", 2).unwrap();
    let pair = |x: usize, y: usize| Assignment::new().with_individual("x", t.address(x)).with_individual("y", t.address(y));
    assert!(holds("Right(x, y)", &t, &pair(0, 1)));
    assert!(!holds("Right(x, y)", &t, &pair(0, 2)));
    assert!(holds("Up(x, y)", &t, &pair(0, 2)));
    // An only child is both the first and the last child.
    assert!(holds("Up(x, y)", &t, &pair(2, 3)) && holds("Right(x, y)", &t, &pair(2, 3)));
    assert!(!holds("Up(x, y)", &t, &pair(1, 3)));
    // A one-node tree is a trivial chain of its own.
    let single = parse_tree("({Bar2,NP,Target,Base,APos,Spec})", DEFAULT_ARITY).unwrap();
    assert!(holds("Generalized-Identification()", &single, &Assignment::new()));
    let orphan = parse_tree("({Bar2,NP,Trace,APos,Spec})", DEFAULT_ARITY).unwrap();
    assert!(!holds("Generalized-Identification()", &orphan, &Assignment::new()));
}

#[test]
fn complete_binary_trees() {
    for depth in 0..5 {
        let t = complete_binary_tree(depth);
        assert_eq!(t.len(), (1 << (depth + 1)) - 1);
        assert_eq!(t.node_at(t.len() - 1).id, Some(t.len() as u64));
    }
}

#[test]
fn grid_indexation_satisfies_phi_g() {
    for depth in 2..=5 {
        let t = complete_binary_tree(depth);
        let ci = grid_ci(&t);
        assert!(check_phi_g(&t, &ci, &[]).unwrap(), "depth {depth}");
        let merged = merge_classes(&ci, &Address(vec![0]), &Address(vec![1]));
        assert!(!check_phi_g(&t, &merged, &[]).unwrap(), "depth {depth}");
    }
}

#[test]
fn grid_macro_agrees_with_phi_g() {
    let t = complete_binary_tree(3);
    let ci = grid_ci(&t);
    let env = gb_env();
    let f = expand(&parse_formula("Grid()", &Signature::open(), &env).unwrap(), &env).unwrap();
    assert!(evaluate_sentence(&t, &f, &ci).unwrap());
}

#[test]
fn identity_indexation() {
    let identity = |t: &LabeledTree| {
        let mut ci = AuxRelations::new();
        ci.insert("CI", t.addresses().into_iter().map(|a| (a.clone(), a)));
        ci
    };
    let t = complete_binary_tree(1);
    assert!(check_phi_g(&t, &identity(&t), &[]).unwrap());
    // Right-then-up and up-then-right reach the same grid point.
    let t = complete_binary_tree(2);
    assert!(!check_phi_g(&t, &identity(&t), &[]).unwrap());
}

#[test]
fn phi_g_respects_labels() {
    let mut t = complete_binary_tree(2);
    let ci = grid_ci(&t);
    assert!(check_phi_g(&t, &ci, &["P"]).unwrap());
    let i = t.index_of(&Address(vec![0, 1])).unwrap();
    t.labels_mut(i).insert("P".into());
    assert!(!check_phi_g(&t, &ci, &["P"]).unwrap());
    assert!(check_phi_g(&t, &ci, &[]).unwrap());
}

#[test]
fn phi_g_requires_an_equivalence() {
    let t = complete_binary_tree(2);
    let mut ci = AuxRelations::new();
    ci.insert("CI", [(Address(vec![0]), Address(vec![1]))]);
    assert!(matches!(check_phi_g(&t, &ci, &[]), Err(Error::Eval(_))));
}

#[test]
fn relation_files_round_trip() {
    let t = complete_binary_tree(2);
    let ci = grid_ci(&t);
    let text = write_relation(&t, &ci, "CI").unwrap();
    assert!(text.lines().all(|l| l.starts_with("CI ")));
    assert_eq!(AuxRelations::parse(&text, &t).unwrap().get("CI"), ci.get("CI"));
    let bare = parse_tree("({A} ({B}))", 2).unwrap();
    let mut r = AuxRelations::new();
    r.insert("CI", [(Address::root(), Address::root())]);
    assert!(matches!(write_relation(&bare, &r, "CI"), Err(Error::Gb(_))));
}
