use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use treebound::gb;

const BIN: &str = env!("CARGO_BIN_EXE_treebound");

const SMALL_GRAMMAR: &str = "\
start: A
terminals: b c d
A -> B c | A B | d
B -> b
";

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Out {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove(treebound::io::STATE_CAP_VAR);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let o = cmd.output().expect("binary runs");
    Out {
        code: o.status.code().expect("exit code"),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Out {
    run_env(args, &[])
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(TempDir::new().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_succeed() {
    let h = run(&["--help"]);
    assert_eq!(h.code, 0);
    for cmd in ["check", "compile", "sat", "cfg2mso", "aut2cfg", "enum", "gb"] {
        assert!(h.stdout.contains(cmd), "{cmd}");
    }
    assert_eq!(run(&["check", "--help"]).code, 0);
    let v = run(&["--version"]);
    assert_eq!(v.code, 0);
    assert!(v.stdout.starts_with("treebound "));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["bogus"][..],
        &[],
        &["check", "--tree", "t.tree"],
        &["enum", "--cfg", "g.cfg", "--max-depth", "many"],
        &["gb"],
        &["gb", "--suite", "--tree", "t.tree"],
    ] {
        let o = run(args);
        assert_eq!(o.code, 2, "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn check_reports_each_formula() {
    let d = Dir::new();
    let tree = d.file("t.tree", "; a root with two leaves\n({A} #1 ({P} #2) ({B} #3))\n");
    let both = d.file("both.mso", "ex x. P(x) ;\nall x. P(x)\n");
    let o = run(&["check", "--tree", s(&tree), "--formula", s(&both)]);
    assert_eq!((o.code, o.stdout.as_str()), (1, "holds\nfails\n"));
    let one = d.file("one.mso", "ex x, y. (x < y & P(y))");
    let o = run(&["check", "--tree", s(&tree), "--formula", s(&one)]);
    assert_eq!((o.code, o.stdout.as_str()), (0, "holds\n"));
}

#[test]
fn check_with_definitions() {
    let d = Dir::new();
    let tree = d.file("t.tree", "({A} ({P}) ({B} ({P})))");
    let defs = d.file("defs.mso", "def Leafy(x) := P(x) & !ex y. x < y .\n");
    let more = d.file("more.mso", "def AllLeafy() := all x. (P(x) -> Leafy(x)) .\n");
    let f = d.file("f.mso", "AllLeafy()");
    let o = run(&["check", "--tree", s(&tree), "--formula", s(&f), "--defs", s(&defs), "--defs", s(&more)]);
    assert_eq!((o.code, o.stdout.as_str()), (0, "holds\n"));
    // Without its definition, Leafy is read as an unlabeled predicate.
    let o = run(&["check", "--tree", s(&tree), "--formula", s(&f), "--defs", s(&more)]);
    assert_eq!((o.code, o.stdout.as_str()), (1, "fails\n"), "{}", o.stderr);
    let o = run(&["check", "--tree", s(&tree), "--formula", s(&f), "--defs", s(&defs), "--defs", s(&defs)]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("Leafy"), "{}", o.stderr);
}

#[test]
fn check_input_errors() {
    let d = Dir::new();
    let tree = d.file("t.tree", "({A} ({P}) ({P}) ({P}))");
    let f = d.file("f.mso", "ex x. P(x)");
    let o = run(&["check", "--tree", s(&tree), "--formula", s(&f), "--arity", "2"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("t.tree"), "{}", o.stderr);
    let bad = d.file("bad.mso", "ex x. (P(x)");
    assert_eq!(run(&["check", "--tree", s(&tree), "--formula", s(&bad)]).code, 2);
    let open = d.file("open.mso", "P(x)");
    assert_eq!(run(&["check", "--tree", s(&tree), "--formula", s(&open)]).code, 2);
    let missing = d.path("missing.tree");
    let o = run(&["check", "--tree", s(&missing), "--formula", s(&f)]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("missing.tree"));
}

#[test]
fn check_with_relation_file() {
    let d = Dir::new();
    let t = gb::complete_binary_tree(3);
    let tree = d.file("grid.tree", &t.to_string());
    let ci = gb::grid_ci(&t);
    let rel = d.file("grid.rel", &gb::write_relation(&t, &ci, "CI").unwrap());
    let merged = gb::merge_classes(&ci, &treebound::core::Address(vec![0]), &treebound::core::Address(vec![1]));
    let bad_rel = d.file("merged.rel", &gb::write_relation(&t, &merged, "CI").unwrap());
    let grid = d.file("grid.mso", gb::GRID_MSO);
    let f = d.file("f.mso", "Grid()");
    let args = |r: &Path| -> Vec<String> {
        ["check", "--tree", s(&tree), "--formula", s(&f), "--defs", s(&grid), "--rel", s(r)].map(String::from).to_vec()
    };
    let o = run(&args(&rel).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!((o.code, o.stdout.as_str()), (0, "holds\n"), "{}", o.stderr);
    let o = run(&args(&bad_rel).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!((o.code, o.stdout.as_str()), (1, "fails\n"));
    let unknown = d.file("unknown.rel", "CI 1 99\n");
    assert_eq!(run(&args(&unknown).iter().map(String::as_str).collect::<Vec<_>>()).code, 2);
}

#[test]
fn compile_writes_an_automaton() {
    let d = Dir::new();
    let f = d.file("f.mso", "ex x. P(x)");
    let o = run(&["compile", "--formula", s(&f), "--sig", "P"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.starts_with("arity: 2\nbits: P\n"), "{}", o.stdout);
    let again = run(&["compile", "--formula", s(&f), "--sig", "P"]);
    assert_eq!(o.stdout, again.stdout);

    let out = d.path("f.aut");
    let w = run(&["compile", "--formula", s(&f), "--sig", "P, Q", "--arity", "3", "-o", s(&out)]);
    assert_eq!((w.code, w.stdout.as_str()), (0, ""));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("arity: 3\nbits: P Q\n"), "{text}");
    let parsed = treebound::io::load_automaton(&out).unwrap();
    let t = treebound::core::tree::parse_tree("({Q} ({Q}) ({P,Q}) ({}))", 3).unwrap();
    assert!(parsed.accepts(&t).unwrap());

    let open = run(&["compile", "--formula", s(&f)]);
    assert_eq!(open.stdout, o.stdout);
    let unknown = run(&["compile", "--formula", s(&f), "--sig", "Q"]);
    assert_eq!(unknown.code, 2);
    assert!(unknown.stderr.contains("free variable P"), "{}", unknown.stderr);
}

#[test]
fn state_cap_from_environment() {
    let d = Dir::new();
    let f = d.file("f.mso", "ex x, y. (x < y & P(x) & Q(y))");
    let capped = run_env(&["sat", "--formula", s(&f)], &[("TREEBOUND_STATE_CAP", "2")]);
    assert_eq!(capped.code, 3);
    assert!(capped.stderr.contains("state cap"), "{}", capped.stderr);
    let c = run_env(&["compile", "--formula", s(&f)], &[("TREEBOUND_STATE_CAP", "2")]);
    assert_eq!((c.code, c.stdout.as_str()), (3, ""));
    assert_eq!(run_env(&["sat", "--formula", s(&f)], &[("TREEBOUND_STATE_CAP", "lots")]).code, 2);
    assert_eq!(run_env(&["sat", "--formula", s(&f)], &[("TREEBOUND_STATE_CAP", "100000")]).code, 0);
}

#[test]
fn sat_decides_and_witnesses() {
    let d = Dir::new();
    let f = d.file("f.mso", "ex x, y. (x < y & P(x) & Q(y))");
    let o = run(&["sat", "--formula", s(&f)]);
    assert_eq!((o.code, o.stdout.as_str()), (0, "SAT\n"));
    let w = run(&["sat", "--formula", s(&f), "--witness"]);
    assert_eq!(w.code, 0);
    let mut lines = w.stdout.lines();
    assert_eq!(lines.next(), Some("SAT"));
    let witness = d.file("w.tree", lines.next().unwrap());
    assert_eq!(lines.next(), None);
    let t = treebound::io::load_tree(&witness, 2).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(run(&["check", "--tree", s(&witness), "--formula", s(&f)]).stdout, "holds\n");

    let u = d.file("u.mso", "ex x. (P(x) & !P(x))");
    let o = run(&["sat", "--formula", s(&u), "--witness"]);
    assert_eq!((o.code, o.stdout.as_str()), (1, "UNSAT\n"));

    let aut = d.path("f.aut");
    assert_eq!(run(&["compile", "--formula", s(&f), "-o", s(&aut)]).code, 0);
    assert_eq!(run(&["sat", "--aut", s(&aut), "--witness"]).stdout, w.stdout);
    assert_eq!(run(&["sat", "--aut", s(&aut), "--formula", s(&f)]).code, 2);
    assert_eq!(run(&["sat", "--aut", s(&aut), "--sig", "P"]).code, 2);
}

#[test]
fn sat_with_definitions_and_signature() {
    let d = Dir::new();
    let defs = d.file("defs.mso", "def Two() := ex x, y. (x != y & P(x) & P(y)) .");
    let f = d.file("f.mso", "Two() & all x. (P(x) -> !ex y. x < y)");
    let w = run(&["sat", "--formula", s(&f), "--defs", s(&defs), "--sig", "P", "--witness"]);
    assert_eq!(w.code, 0, "{}", w.stderr);
    assert_eq!(w.stdout, "SAT\n({} ({P}) ({P}))\n");
    let unary = run(&["sat", "--formula", s(&f), "--defs", s(&defs), "--sig", "P", "--arity", "1"]);
    assert_eq!((unary.code, unary.stdout.as_str()), (1, "UNSAT\n"));
}

#[test]
fn grammar_round_trip_through_sentences() {
    let d = Dir::new();
    let g = d.file("g.cfg", SMALL_GRAMMAR);
    let out = d.path("g.mso");
    let o = run(&["cfg2mso", "--cfg", s(&g), "-o", s(&out)]);
    assert_eq!((o.code, o.stdout.as_str()), (0, ""));
    let printed = run(&["cfg2mso", "--cfg", s(&g)]);
    assert_eq!(printed.stdout, std::fs::read_to_string(&out).unwrap());
    assert!(printed.stdout.contains("Partition("), "{}", printed.stdout);

    let derived = d.file("d.tree", "({A} ({A} ({d})) ({B} ({b})))");
    let o = run(&["check", "--tree", s(&derived), "--formula", s(&out)]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.lines().all(|l| l == "holds"));
    let swapped = d.file("s.tree", "({A} ({c}) ({B} ({b})))");
    assert_eq!(run(&["check", "--tree", s(&swapped), "--formula", s(&out)]).code, 1);

    let wide = run(&["cfg2mso", "--cfg", s(&g), "--arity", "1"]);
    assert_eq!(wide.code, 2);
    let broken = d.file("broken.cfg", "start: A\nA -> B\n");
    assert_eq!(run(&["cfg2mso", "--cfg", s(&broken)]).code, 2);
}

#[test]
fn enumerate_derivations() {
    let d = Dir::new();
    let g = d.file("g.cfg", SMALL_GRAMMAR);
    let o = run(&["enum", "--cfg", s(&g), "--max-depth", "2"]);
    assert_eq!((o.code, o.stdout.as_str()), (0, "({A} ({d}))\n"));
    let o = run(&["enum", "--cfg", s(&g), "--max-depth", "3"]);
    assert_eq!(o.stdout.lines().count(), 3);
    assert_eq!(run(&["enum", "--cfg", s(&g), "--max-depth", "1"]).stdout, "");
    let capped = run(&["enum", "--cfg", s(&g), "--max-depth", "6", "--cap", "2"]);
    assert_eq!((capped.code, capped.stdout.as_str()), (3, ""));
}

#[test]
fn automaton_to_grammar() {
    let d = Dir::new();
    let f = d.file("f.mso", "ex x. P(x)");
    let aut = d.path("f.aut");
    assert_eq!(run(&["compile", "--formula", s(&f), "--sig", "P", "--arity", "1", "-o", s(&aut)]).code, 0);
    let cfg = d.path("f.cfg");
    let o = run(&["aut2cfg", "--aut", s(&aut), "-o", s(&cfg)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let printed = run(&["aut2cfg", "--aut", s(&aut)]);
    assert_eq!(printed.stdout, std::fs::read_to_string(&cfg).unwrap());

    let projected = run(&["enum", "--cfg", s(&cfg), "--max-depth", "2", "--project"]);
    assert_eq!(projected.code, 0);
    let mut trees: Vec<&str> = projected.stdout.lines().collect();
    trees.sort();
    trees.dedup();
    assert_eq!(trees, ["({P} ({P}))", "({P} ({}))", "({P})", "({} ({P}))"]);

    let garbage = d.file("garbage.aut", "arity: two\n");
    assert_eq!(run(&["aut2cfg", "--aut", s(&garbage)]).code, 2);
}

#[test]
fn gb_suite_and_single_trees() {
    let o = run(&["gb", "--suite"]);
    assert_eq!(o.code, 0, "{}", o.stdout);
    assert_eq!(o.stdout.matches("(as expected)").count(), gb::EXAMPLES.len());
    assert!(o.stdout.contains("== ecp_violation fail (as expected)\nlicensing pass\nidentification fail 2 19\n"));

    let d = Dir::new();
    let ok = d.file("ok.tree", gb::example("object_extraction").unwrap().text);
    let o = run(&["gb", "--tree", s(&ok)]);
    assert_eq!((o.code, o.stdout.as_str()), (0, "licensing pass\nidentification pass\nchain-formation pass\n"));
    let bad = d.file("bad.tree", gb::example("ecp_violation").unwrap().text);
    let o = run(&["gb", "--tree", s(&bad)]);
    assert_eq!(o.code, 1);
    assert!(o.stdout.contains("identification fail 2 19"));
    let alien = d.file("alien.tree", "({Bar2,CP,Target,Base} ({Foo}))");
    let o = run(&["gb", "--tree", s(&alien)]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("Foo"));
}
