//! Tree domains, labeled trees and the relations they induce.
//!
//! Nodes of a [`LabeledTree`] are stored in preorder. Node `0` is the root and the
//! subtree of node `i` occupies the index range `i..end(i)`, so dominance and
//! left-of reduce to interval tests.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bitset::NodeSet;

/// A Gorn address: the sequence of child indices leading from the root.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Address(pub Vec<u32>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn child(&self, i: u32) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Address(v)
    }

    pub fn parent(&self) -> Option<Address> {
        if self.0.is_empty() {
            None
        } else {
            Some(Address(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn is_prefix_of(&self, other: &Address) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl<const N: usize> From<[u32; N]> for Address {
    fn from(v: [u32; N]) -> Self {
        Address(v.to_vec())
    }
}

/// True iff `addresses` is a tree domain: non-empty, prefix-closed and
/// left-sibling-closed.
pub fn validate_domain(addresses: &BTreeSet<Address>) -> bool {
    if !addresses.contains(&Address::root()) {
        return false;
    }
    addresses.iter().all(|a| match a.0.split_last() {
        None => true,
        Some((&last, prefix)) => {
            let parent = Address(prefix.to_vec());
            addresses.contains(&parent) && (last == 0 || addresses.contains(&parent.child(last - 1)))
        }
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TreeError {
    Syntax { line: usize, column: usize, message: String },
    DuplicateId(u64),
    DuplicateConstant(String),
    ArityExceeded { address: Address, children: usize, bound: usize },
    InvalidDomain,
    UnknownPredicate(String),
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::Syntax { line, column, message } => {
                write!(f, "tree syntax error at {line}:{column}: {message}")
            }
            TreeError::DuplicateId(id) => write!(f, "duplicate node id #{id}"),
            TreeError::DuplicateConstant(c) => write!(f, "constant @{c} bound more than once"),
            TreeError::ArityExceeded { address, children, bound } => write!(
                f,
                "node {address} has {children} children, exceeding the arity bound {bound}"
            ),
            TreeError::InvalidDomain => f.write_str("address set is not a tree domain"),
            TreeError::UnknownPredicate(p) => write!(f, "predicate {p} is not in the signature"),
        }
    }
}

impl core::error::Error for TreeError {}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TreeNode {
    pub labels: BTreeSet<String>,
    pub constants: BTreeSet<String>,
    pub id: Option<u64>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    end: usize,
}

/// A finite ordered tree whose nodes carry sets of predicate names, optional
/// integer ids and optional individual-constant bindings.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LabeledTree {
    nodes: Vec<TreeNode>,
}

impl LabeledTree {
    pub fn leaf<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self::node(labels, Vec::new())
    }

    /// Builds a tree from a root label set and a list of child subtrees.
    pub fn node<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        children: Vec<LabeledTree>,
    ) -> Self {
        let mut nodes = vec![TreeNode {
            labels: labels.into_iter().map(Into::into).collect(),
            ..TreeNode::default()
        }];
        for child in children {
            let offset = nodes.len();
            nodes[0].children.push(offset);
            for (i, mut n) in child.nodes.into_iter().enumerate() {
                n.parent = Some(match n.parent {
                    Some(p) => p + offset,
                    None => 0,
                });
                for c in n.children.iter_mut() {
                    *c += offset;
                }
                n.end += offset;
                debug_assert!(i + offset == nodes.len());
                nodes.push(n);
            }
        }
        nodes[0].end = nodes.len();
        LabeledTree { nodes }
    }

    /// Builds a tree from an explicit domain and a labeling.
    pub fn from_domain(
        domain: &BTreeSet<Address>,
        labels: &BTreeMap<Address, BTreeSet<String>>,
    ) -> Result<Self, TreeError> {
        if !validate_domain(domain) {
            return Err(TreeError::InvalidDomain);
        }
        fn build(
            a: &Address,
            domain: &BTreeSet<Address>,
            labels: &BTreeMap<Address, BTreeSet<String>>,
        ) -> LabeledTree {
            let mut children = Vec::new();
            let mut i = 0;
            while domain.contains(&a.child(i)) {
                children.push(build(&a.child(i), domain, labels));
                i += 1;
            }
            let l = labels.get(a).cloned().unwrap_or_default();
            LabeledTree::node(l, children)
        }
        Ok(build(&Address::root(), domain, labels))
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.nodes[0].id = Some(id);
        self
    }

    pub fn with_constant(mut self, name: impl Into<String>) -> Self {
        self.nodes[0].constants.insert(name.into());
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn node_at(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn labels_mut(&mut self, i: usize) -> &mut BTreeSet<String> {
        &mut self.nodes[i].labels
    }

    pub fn set_id(&mut self, i: usize, id: Option<u64>) {
        self.nodes[i].id = id;
    }

    #[inline]
    pub fn children(&self, i: usize) -> &[usize] {
        &self.nodes[i].children
    }

    #[inline]
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes[i].parent
    }

    /// One past the last preorder index in the subtree of `i`.
    #[inline]
    pub fn subtree_end(&self, i: usize) -> usize {
        self.nodes[i].end
    }

    #[inline]
    pub fn is_parent(&self, u: usize, v: usize) -> bool {
        self.nodes[v].parent == Some(u)
    }

    /// Reflexive dominance.
    #[inline]
    pub fn dominates(&self, u: usize, v: usize) -> bool {
        u <= v && v < self.nodes[u].end
    }

    #[inline]
    pub fn properly_dominates(&self, u: usize, v: usize) -> bool {
        u < v && v < self.nodes[u].end
    }

    #[inline]
    pub fn left_of(&self, u: usize, v: usize) -> bool {
        self.nodes[u].end <= v
    }

    pub fn max_arity(&self) -> usize {
        self.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0)
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = vec![1usize; self.len()];
        let mut best = 1;
        for i in 1..self.len() {
            let p = self.nodes[i].parent.unwrap();
            depth[i] = depth[p] + 1;
            best = best.max(depth[i]);
        }
        best
    }

    pub fn address(&self, i: usize) -> Address {
        let mut path = Vec::new();
        let mut cur = i;
        while let Some(p) = self.nodes[cur].parent {
            let pos = self.nodes[p].children.iter().position(|&c| c == cur).unwrap();
            path.push(pos as u32);
            cur = p;
        }
        path.reverse();
        Address(path)
    }

    pub fn addresses(&self) -> Vec<Address> {
        (0..self.len()).map(|i| self.address(i)).collect()
    }

    pub fn index_of(&self, a: &Address) -> Option<usize> {
        let mut cur = 0;
        for &c in &a.0 {
            cur = *self.nodes[cur].children.get(c as usize)?;
        }
        Some(cur)
    }

    pub fn domain(&self) -> BTreeSet<Address> {
        self.addresses().into_iter().collect()
    }

    pub fn index_of_id(&self, id: u64) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == Some(id))
    }

    pub fn constant_binding(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.constants.contains(name))
    }

    /// All predicate names used on any node.
    pub fn predicates(&self) -> BTreeSet<String> {
        self.nodes.iter().flat_map(|n| n.labels.iter().cloned()).collect()
    }

    pub fn constants(&self) -> BTreeSet<String> {
        self.nodes.iter().flat_map(|n| n.constants.iter().cloned()).collect()
    }

    /// Nodes labeled with predicate `p`.
    pub fn extension(&self, p: &str) -> NodeSet {
        NodeSet::from_iter(
            self.len(),
            self.nodes.iter().enumerate().filter(|(_, n)| n.labels.contains(p)).map(|(i, _)| i),
        )
    }

    pub fn check_predicates(&self, allowed: &BTreeSet<String>) -> Result<(), TreeError> {
        for p in self.predicates() {
            if !allowed.contains(&p) {
                return Err(TreeError::UnknownPredicate(p));
            }
        }
        Ok(())
    }

    pub fn check_arity(&self, bound: usize) -> Result<(), TreeError> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.children.len() > bound {
                return Err(TreeError::ArityExceeded {
                    address: self.address(i),
                    children: n.children.len(),
                    bound,
                });
            }
        }
        Ok(())
    }

    /// Copy of this tree with every label mapped through `f`.
    pub fn map_labels(&self, mut f: impl FnMut(&BTreeSet<String>) -> BTreeSet<String>) -> Self {
        let mut t = self.clone();
        for n in t.nodes.iter_mut() {
            n.labels = f(&n.labels);
        }
        t
    }

    /// The subtree rooted at preorder index `i`, as a standalone tree.
    pub fn subtree(&self, i: usize) -> LabeledTree {
        let children = self.nodes[i].children.iter().map(|&c| self.subtree(c)).collect();
        let n = &self.nodes[i];
        let mut t = LabeledTree::node(n.labels.iter().cloned(), children);
        t.nodes[0].id = n.id;
        t.nodes[0].constants = n.constants.clone();
        t
    }
}

/// The parent, dominance and left-of relations over a tree domain.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct InducedRelations {
    pub parent: BTreeSet<(Address, Address)>,
    pub dominance: BTreeSet<(Address, Address)>,
    pub left_of: BTreeSet<(Address, Address)>,
}

pub fn induced_relations(tree: &LabeledTree) -> InducedRelations {
    let addrs = tree.addresses();
    let mut rel = InducedRelations::default();
    for u in 0..tree.len() {
        for v in 0..tree.len() {
            let pair = || (addrs[u].clone(), addrs[v].clone());
            if tree.is_parent(u, v) {
                rel.parent.insert(pair());
            }
            if tree.dominates(u, v) {
                rel.dominance.insert(pair());
            }
            if tree.left_of(u, v) {
                rel.left_of.insert(pair());
            }
        }
    }
    rel
}

// ---------------------------------------------------------------------------
// Text format

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '{' | '}' | ',' | '(' | ')' | '#' | '@')
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line: 1, col: 1, _src: src }
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.get(self.pos) {
            if c == ';' {
                // comment to end of line
                while let Some(&c) = self.chars.get(self.pos) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> TreeError {
        TreeError::Syntax { line: self.line, column: self.col, message: message.into() }
    }

    fn expect(&mut self, c: char) -> Result<(), TreeError> {
        self.skip_ws();
        match self.peek() {
            Some(x) if x == c => {
                self.bump();
                Ok(())
            }
            Some(x) => Err(self.err(format!("expected '{c}', found '{x}'"))),
            None => Err(self.err(format!("expected '{c}', found end of input"))),
        }
    }

    fn name(&mut self) -> Result<String, TreeError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_name_char(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if s.is_empty() {
            Err(self.err("expected a name"))
        } else {
            Ok(s)
        }
    }
}

/// Parses a tree in the parenthesized text format, e.g. `({A} #1 ({B}) ({C}))`.
///
/// Text after `;` on a line is a comment.
pub fn parse_tree(text: &str, max_arity: usize) -> Result<LabeledTree, TreeError> {
    let mut cur = Cursor::new(text);
    let tree = parse_node(&mut cur)?;
    cur.skip_ws();
    if cur.peek().is_some() {
        return Err(cur.err("trailing input after tree"));
    }
    let mut ids = BTreeSet::new();
    let mut consts = BTreeSet::new();
    for n in tree.nodes() {
        if let Some(id) = n.id {
            if !ids.insert(id) {
                return Err(TreeError::DuplicateId(id));
            }
        }
        for c in &n.constants {
            if !consts.insert(c.clone()) {
                return Err(TreeError::DuplicateConstant(c.clone()));
            }
        }
    }
    tree.check_arity(max_arity)?;
    Ok(tree)
}

fn parse_node(cur: &mut Cursor<'_>) -> Result<LabeledTree, TreeError> {
    cur.expect('(')?;
    cur.expect('{')?;
    let mut labels = BTreeSet::new();
    let mut constants = BTreeSet::new();
    cur.skip_ws();
    if cur.peek() == Some('}') {
        cur.bump();
    } else {
        loop {
            cur.skip_ws();
            if cur.peek() == Some('@') {
                cur.bump();
                constants.insert(cur.name()?);
            } else {
                labels.insert(cur.name()?);
            }
            cur.skip_ws();
            match cur.bump() {
                Some(',') => continue,
                Some('}') => break,
                Some(c) => return Err(cur.err(format!("unexpected '{c}' in label set"))),
                None => return Err(cur.err("unterminated label set")),
            }
        }
    }
    cur.skip_ws();
    let mut id = None;
    if cur.peek() == Some('#') {
        cur.bump();
        let mut digits = String::new();
        while let Some(c) = cur.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                cur.bump();
            } else {
                break;
            }
        }
        id = Some(digits.parse::<u64>().map_err(|_| cur.err("expected a node id after '#'"))?);
    }
    let mut children = Vec::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some('(') => children.push(parse_node(cur)?),
            Some(')') => {
                cur.bump();
                break;
            }
            Some(c) => return Err(cur.err(format!("unexpected '{c}'"))),
            None => return Err(cur.err("unbalanced parentheses")),
        }
    }
    let mut t = LabeledTree::node(labels, children);
    t.nodes[0].id = id;
    t.nodes[0].constants = constants;
    Ok(t)
}

impl fmt::Display for LabeledTree {
    /// Canonical serialization: label entries sorted, constants after predicates.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &LabeledTree, i: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let n = &t.nodes[i];
            f.write_str("({")?;
            let mut first = true;
            for l in &n.labels {
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                f.write_str(l)?;
            }
            for c in &n.constants {
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                write!(f, "@{c}")?;
            }
            f.write_str("}")?;
            if let Some(id) = n.id {
                write!(f, " #{id}")?;
            }
            for &c in &n.children {
                f.write_str(" ")?;
                go(t, c, f)?;
            }
            f.write_str(")")
        }
        go(self, 0, f)
    }
}

pub fn serialize_tree(tree: &LabeledTree) -> String {
    tree.to_string()
}

// ---------------------------------------------------------------------------
// Enumeration

/// All tree shapes with exactly `nodes` nodes and at most `max_arity` children per node,
/// every node unlabeled.
pub fn shapes(nodes: usize, max_arity: usize) -> Vec<LabeledTree> {
    // forests[n][k]: ordered forests of exactly k trees with n nodes in total
    let mut trees: Vec<Vec<LabeledTree>> = vec![Vec::new(); nodes + 1];
    for n in 1..=nodes {
        let mut out = Vec::new();
        for k in 0..=max_arity.min(n - 1) {
            for forest in forests(n - 1, k, &trees) {
                out.push(LabeledTree::node(core::iter::empty::<String>(), forest));
            }
        }
        trees[n] = out;
    }
    core::mem::take(&mut trees[nodes])
}

fn forests(total: usize, k: usize, trees: &[Vec<LabeledTree>]) -> Vec<Vec<LabeledTree>> {
    if k == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(k - 1) {
        for t in &trees[first] {
            for mut rest in forests(total - first, k - 1, trees) {
                rest.insert(0, t.clone());
                out.push(rest);
            }
        }
    }
    out
}

/// Every labeling of `shape` where each node receives one of `label_sets`.
pub fn labelings(shape: &LabeledTree, label_sets: &[BTreeSet<String>]) -> Vec<LabeledTree> {
    let n = shape.len();
    let k = label_sets.len();
    let total = k.checked_pow(n as u32).expect("labeling count overflow");
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut t = shape.clone();
        for i in 0..n {
            t.nodes[i].labels = label_sets[code % k].clone();
            code /= k;
        }
        out.push(t);
    }
    out
}

/// All subsets of `preds`, in mask order.
pub fn powerset_labels(preds: &[&str]) -> Vec<BTreeSet<String>> {
    (0..1usize << preds.len())
        .map(|m| {
            preds
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, p)| p.to_string())
                .collect()
        })
        .collect()
}

/// All trees with `1..=max_nodes` nodes, arity at most `max_arity`, and node labels
/// drawn from `label_sets`.
pub fn all_trees(max_nodes: usize, max_arity: usize, label_sets: &[BTreeSet<String>]) -> Vec<LabeledTree> {
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        for s in shapes(n, max_arity) {
            out.extend(labelings(&s, label_sets));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(addrs: &[&[u32]]) -> BTreeSet<Address> {
        addrs.iter().map(|a| Address(a.to_vec())).collect()
    }

    #[test]
    fn domain_validation() {
        assert!(validate_domain(&dom(&[&[]])));
        assert!(validate_domain(&dom(&[&[], &[0], &[1], &[0, 0], &[0, 1], &[1, 0], &[1, 1]])));
        assert!(!validate_domain(&dom(&[&[], &[1]])));
        assert!(!validate_domain(&dom(&[])));
        assert!(!validate_domain(&dom(&[&[], &[0, 0]])));
    }

    #[test]
    fn relations_of_small_trees() {
        let t = parse_tree("({} ({}) ({}))", 8).unwrap();
        let r = induced_relations(&t);
        let expect: BTreeSet<_> =
            [(Address::root(), Address::from([0])), (Address::root(), Address::from([1]))].into();
        assert_eq!(r.parent, expect);
        assert!(r.left_of.contains(&(Address::from([0]), Address::from([1]))));
        assert!(!r.left_of.contains(&(Address::from([1]), Address::from([0]))));

        let t = parse_tree("({} ({} ({})))", 8).unwrap();
        let r = induced_relations(&t);
        assert!(r.dominance.contains(&(Address::root(), Address::from([0, 0]))));
        assert!(r.dominance.contains(&(Address::from([0, 0]), Address::from([0, 0]))));
    }

    #[test]
    fn parse_examples() {
        let t = parse_tree("({A} ({B}) ({C}))", 8).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.node_at(0).labels.contains("A"));
        let t = parse_tree("({A} #1 ({B} #2))", 8).unwrap();
        assert_eq!(t.node_at(0).id, Some(1));
        assert_eq!(t.index_of(&Address::from([0])), Some(1));
        assert_eq!(t.node_at(1).id, Some(2));
        assert!(matches!(parse_tree("({A} ({B}", 8), Err(TreeError::Syntax { .. })));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_tree("({A} #1 ({B} #1))", 8), Err(TreeError::DuplicateId(1)));
        assert!(matches!(
            parse_tree("({A} ({}) ({}) ({}))", 2),
            Err(TreeError::ArityExceeded { children: 3, bound: 2, .. })
        ));
        assert_eq!(
            parse_tree("({@c} ({@c}))", 2),
            Err(TreeError::DuplicateConstant("c".into()))
        );
        match parse_tree("({A}\n  ({B} x))", 2) {
            Err(TreeError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serialize_examples() {
        assert_eq!(LabeledTree::leaf(["A"]).to_string(), "({A})");
        assert_eq!(LabeledTree::leaf(core::iter::empty::<&str>()).to_string(), "({})");
        let fig1 = "({A} ({A} ({B}) ({a})) ({B} ({B}) ({D})))";
        let t = parse_tree(fig1, 8).unwrap();
        let once = t.to_string();
        assert_eq!(once, fig1);
        assert_eq!(parse_tree(&once, 8).unwrap().to_string(), once);
        let t = parse_tree("({ B , A,@k } #4)", 8).unwrap();
        assert_eq!(t.to_string(), "({A,B,@k} #4)");
    }

    #[test]
    fn shape_counts_are_motzkin() {
        // unary/binary ordered trees: Motzkin numbers M(n-1)
        let counts: Vec<usize> = (1..=7).map(|n| shapes(n, 2).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 21, 51]);
        // unbounded arity gives Catalan numbers C(n-1)
        let counts: Vec<usize> = (1..=6).map(|n| shapes(n, 8).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 14, 42]);
    }

    #[test]
    fn domain_round_trip() {
        for s in shapes(5, 3) {
            let d = s.domain();
            assert!(validate_domain(&d));
            let back = LabeledTree::from_domain(&d, &BTreeMap::new()).unwrap();
            assert_eq!(back, s);
        }
    }
}
