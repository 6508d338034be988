//! N-ary labeled trees over nonterminal nodes and terminal leaves.

use std::collections::BTreeMap;
use std::fmt;

/// A child of a tree node: either a nested tree or a bare terminal symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Child {
    Node(Tree),
    Leaf(String),
}

impl Child {
    /// The label of a node child or the symbol of a terminal child.
    pub fn symbol(&self) -> &str {
        match self {
            Child::Node(t) => &t.label,
            Child::Leaf(s) => s,
        }
    }

    pub fn as_node(&self) -> Option<&Tree> {
        match self {
            Child::Node(t) => Some(t),
            Child::Leaf(_) => None,
        }
    }
}

/// A parse tree node. Every node has at least one child; terminals occur
/// only as leaves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree {
    pub label: String,
    pub children: Vec<Child>,
}

impl Tree {
    pub fn new(label: impl Into<String>, children: Vec<Child>) -> Self {
        Tree { label: label.into(), children }
    }

    /// Preterminal constructor: a node with a single terminal child.
    pub fn leaf(label: impl Into<String>, terminal: impl Into<String>) -> Self {
        Tree { label: label.into(), children: vec![Child::Leaf(terminal.into())] }
    }

    pub fn node(label: impl Into<String>, children: Vec<Child>) -> Child {
        Child::Node(Tree::new(label, children))
    }

    /// Left-to-right terminal leaves.
    pub fn terminals(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_terminals(&mut out);
        out
    }

    fn collect_terminals(&self, out: &mut Vec<String>) {
        for c in &self.children {
            match c {
                Child::Node(t) => t.collect_terminals(out),
                Child::Leaf(s) => out.push(s.clone()),
            }
        }
    }

    /// Number of terminal leaves.
    pub fn yield_len(&self) -> usize {
        self.children
            .iter()
            .map(|c| match c {
                Child::Node(t) => t.yield_len(),
                Child::Leaf(_) => 1,
            })
            .sum()
    }

    /// Number of nonterminal nodes, this one included.
    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .filter_map(Child::as_node)
            .map(Tree::node_count)
            .sum::<usize>()
    }

    /// Labeled constituent spans `(start, end, label)` with 1-based
    /// inclusive positions, one entry per nonterminal node in preorder.
    pub fn spans(&self) -> Vec<(usize, usize, String)> {
        let mut out = Vec::new();
        self.collect_spans(1, &mut out);
        out
    }

    fn collect_spans(&self, start: usize, out: &mut Vec<(usize, usize, String)>) -> usize {
        let mut pos = start;
        let here = out.len();
        out.push((start, 0, self.label.clone()));
        for c in &self.children {
            match c {
                Child::Node(t) => pos = t.collect_spans(pos, out),
                Child::Leaf(_) => pos += 1,
            }
        }
        out[here].1 = pos - 1;
        pos
    }

    /// The production multiset of the tree: one `(label, child symbols)`
    /// entry per nonterminal node.
    pub fn productions(&self) -> BTreeMap<(String, Vec<String>), usize> {
        let mut out = BTreeMap::new();
        self.collect_productions(&mut out);
        out
    }

    fn collect_productions(&self, out: &mut BTreeMap<(String, Vec<String>), usize>) {
        let rhs: Vec<String> = self.children.iter().map(|c| c.symbol().to_string()).collect();
        *out.entry((self.label.clone(), rhs)).or_insert(0) += 1;
        for c in &self.children {
            if let Child::Node(t) = c {
                t.collect_productions(out);
            }
        }
    }

    /// True when every node has exactly two children or a single terminal
    /// child (the arity constraint the reduction requires).
    pub fn is_binary(&self) -> bool {
        let ok = match self.children.len() {
            1 => matches!(self.children[0], Child::Leaf(_)),
            2 => true,
            _ => false,
        };
        ok && self.children.iter().filter_map(Child::as_node).all(Tree::is_binary)
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.label)?;
        for c in &self.children {
            match c {
                Child::Node(t) => write!(f, " {t}")?,
                Child::Leaf(s) => write!(f, " {s}")?,
            }
        }
        write!(f, ")")
    }
}
