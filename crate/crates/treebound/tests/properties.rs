use std::collections::BTreeSet;

use proptest::prelude::*;
use treebound::gb;
use treebound_core::eval::AuxRelations;
use treebound_core::tree::{Address, LabeledTree};

/// Whether the equivalence given by `class` satisfies the grid closure
/// conditions and keeps `P` constant on each class.
fn phi_g_oracle(t: &LabeledTree, class: &[usize]) -> bool {
    let addrs = t.addresses();
    let cls = |a: &Address| t.index_of(a).map(|i| class[i]);
    let same = |a: &Address, b: &Address| cls(a).is_some() && cls(a) == cls(b);
    let walk = |a: &Address, steps: &[u32]| steps.iter().try_fold(a.clone(), |acc, &s| {
        Some(acc.child(s)).filter(|x| t.index_of(x).is_some())
    });
    for x0 in &addrs {
        for y0 in &addrs {
            if !same(x0, y0) {
                continue;
            }
            for (sx, sy) in [(&[0][..], &[0][..]), (&[1], &[1]), (&[0, 1], &[1, 0]), (&[1, 0], &[0, 1])] {
                if let (Some(x), Some(y)) = (walk(x0, sx), walk(y0, sy)) {
                    if !same(&x, &y) {
                        return false;
                    }
                }
            }
            let p = |a: &Address| t.node_at(t.index_of(a).unwrap()).labels.contains("P");
            if p(x0) != p(y0) {
                return false;
            }
        }
    }
    true
}

fn instance() -> impl Strategy<Value = (usize, Vec<usize>, Vec<bool>)> {
    (1usize..=3).prop_flat_map(|depth| {
        let n = (1 << (depth + 1)) - 1;
        (Just(depth), prop::collection::vec(0usize..4, n), prop::collection::vec(prop::bool::weighted(0.2), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_g_matches_direct_check((depth, mut class, marked) in instance(), grid in any::<bool>()) {
        let mut t = gb::complete_binary_tree(depth);
        if grid {
            // class = grid point, so that only the labels can break the closure
            for (i, a) in t.addresses().iter().enumerate() {
                let rights = a.0.iter().filter(|&&c| c == 0).count();
                class[i] = rights * 8 + a.0.len() - rights;
            }
        }
        for (i, &m) in marked.iter().enumerate() {
            if m {
                t.labels_mut(i).insert("P".into());
            }
        }
        let addrs = t.addresses();
        let mut ci = AuxRelations::new();
        let n = t.len();
        let pairs: BTreeSet<(Address, Address)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| class[i] == class[j])
            .map(|(i, j)| (addrs[i].clone(), addrs[j].clone()))
            .collect();
        ci.insert("CI", pairs);
        prop_assert_eq!(gb::check_phi_g(&t, &ci, &["P"]).unwrap(), phi_g_oracle(&t, &class));
    }

    #[test]
    fn merging_classes_keeps_an_equivalence(depth in 1usize..=4, a in 0usize..31, b in 0usize..31) {
        let t = gb::complete_binary_tree(depth);
        let addrs = t.addresses();
        let merged = gb::merge_classes(&gb::grid_ci(&t), &addrs[a % t.len()], &addrs[b % t.len()]);
        prop_assert!(merged.check_equivalence("CI", &t).is_ok());
        let text = gb::write_relation(&t, &merged, "CI").unwrap();
        let parsed = AuxRelations::parse(&text, &t).unwrap();
        prop_assert_eq!(parsed.get("CI"), merged.get("CI"));
    }
}
