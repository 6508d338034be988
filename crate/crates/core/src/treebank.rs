//! Reading, cleaning, binarizing, and de-binarizing bracketed treebank trees.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::tree::{Child, Tree};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PennError {
    #[error("unbalanced parentheses at byte {0}")]
    UnbalancedParens(usize),
    #[error("empty or childless node at byte {0}")]
    EmptyNode(usize),
    #[error("label {1:?} at byte {0} contains the reserved character '*'")]
    ReservedLabel(usize, String),
    #[error("unexpected token at byte {0}")]
    UnexpectedToken(usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DebinarizeError {
    #[error("the Simple scheme reuses original labels; the n-ary structure cannot be recovered")]
    IrreversibleScheme,
}

/// How n-ary productions are converted to binary branching form.
///
/// `Correct` introduces one fresh nonterminal per remaining suffix of the
/// right-hand side (`*_DE`), so no overgeneration is possible. `Continued`
/// introduces a single fresh nonterminal per original label (`A_*`), which
/// overgenerates mildly. `Simple` reuses the original label and is not
/// invertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinarizationScheme {
    Correct,
    Continued,
    Simple,
}

impl BinarizationScheme {
    pub fn name(self) -> &'static str {
        match self {
            BinarizationScheme::Correct => "correct",
            BinarizationScheme::Continued => "continued",
            BinarizationScheme::Simple => "simple",
        }
    }
}

impl std::str::FromStr for BinarizationScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correct" => Ok(BinarizationScheme::Correct),
            "continued" => Ok(BinarizationScheme::Continued),
            "simple" => Ok(BinarizationScheme::Simple),
            other => Err(format!("unknown binarization scheme {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push(Token::Open(i));
                i += 1;
            }
            b')' => {
                out.push(Token::Close(i));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push(Token::Atom(start, &text[start..i]));
            }
        }
    }
    out
}

/// Parse a sequence of bracketed trees. Bare tokens are terminal leaves;
/// parenthesized expressions are nonterminal nodes. The Penn convention of
/// wrapping each tree in an extra pair of parentheses is accepted and
/// unwrapped. Nonterminal labels containing `*` are rejected: that character
/// is reserved for the fresh symbols introduced by binarization.
pub fn read_penn(text: &str) -> Result<Vec<Tree>, PennError> {
    let tokens = tokenize(text);
    let mut trees = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        match tokens[pos] {
            Token::Open(_) => {
                let (subtrees, next) = parse_group(&tokens, pos)?;
                trees.extend(subtrees);
                pos = next;
            }
            Token::Close(at) => return Err(PennError::UnbalancedParens(at)),
            Token::Atom(at, _) => return Err(PennError::UnexpectedToken(at)),
        }
    }
    Ok(trees)
}

/// Parse one parenthesized group starting at `tokens[pos]` (an Open).
/// Returns the trees it denotes: one tree for a labeled node, or the
/// contents of an anonymous wrapper group.
fn parse_group<'a>(
    tokens: &[Token<'a>],
    pos: usize,
) -> Result<(Vec<Tree>, usize), PennError> {
    let open_at = match tokens[pos] {
        Token::Open(at) => at,
        _ => unreachable!("parse_group called off an open paren"),
    };
    let mut pos = pos + 1;
    match tokens.get(pos) {
        None => Err(PennError::UnbalancedParens(open_at)),
        Some(Token::Close(at)) => Err(PennError::EmptyNode(*at)),
        Some(Token::Atom(at, label)) => {
            if label.contains('*') {
                return Err(PennError::ReservedLabel(*at, label.to_string()));
            }
            let label = label.to_string();
            pos += 1;
            let mut children = Vec::new();
            loop {
                match tokens.get(pos) {
                    None => return Err(PennError::UnbalancedParens(open_at)),
                    Some(Token::Close(at)) => {
                        if children.is_empty() {
                            return Err(PennError::EmptyNode(*at));
                        }
                        return Ok((vec![Tree::new(label, children)], pos + 1));
                    }
                    Some(Token::Atom(_, word)) => {
                        children.push(Child::Leaf(word.to_string()));
                        pos += 1;
                    }
                    Some(Token::Open(_)) => {
                        let (sub, next) = parse_group(tokens, pos)?;
                        children.extend(sub.into_iter().map(Child::Node));
                        pos = next;
                    }
                }
            }
        }
        Some(Token::Open(_)) => {
            // Anonymous wrapper "( (S ...) )": splice its subtrees.
            let mut inner = Vec::new();
            loop {
                match tokens.get(pos) {
                    None => return Err(PennError::UnbalancedParens(open_at)),
                    Some(Token::Close(at)) => {
                        if inner.is_empty() {
                            return Err(PennError::EmptyNode(*at));
                        }
                        return Ok((inner, pos + 1));
                    }
                    Some(Token::Atom(at, _)) => return Err(PennError::UnexpectedToken(*at)),
                    Some(Token::Open(_)) => {
                        let (sub, next) = parse_group(tokens, pos)?;
                        inner.extend(sub);
                        pos = next;
                    }
                }
            }
        }
    }
}

/// Single-line bracketed form; inverse of [`read_penn`] on valid trees.
pub fn write_penn(tree: &Tree) -> String {
    tree.to_string()
}

/// Delete every subtree whose yield consists solely of empty-element
/// markers (and every preterminal labeled with a marker), recursively
/// removing nodes left childless. Returns `None` if the whole tree
/// vanishes.
pub fn strip_epsilon(tree: &Tree, markers: &BTreeSet<String>) -> Option<Tree> {
    let children: Vec<Child> = tree
        .children
        .iter()
        .filter_map(|c| match c {
            Child::Leaf(s) => {
                if markers.contains(s) {
                    None
                } else {
                    Some(Child::Leaf(s.clone()))
                }
            }
            Child::Node(t) => {
                if markers.contains(&t.label) {
                    None
                } else {
                    strip_epsilon(t, markers).map(Child::Node)
                }
            }
        })
        .collect();
    if children.is_empty() {
        None
    } else {
        Some(Tree::new(tree.label.clone(), children))
    }
}

/// Default empty-element markers.
pub fn default_epsilon_markers() -> BTreeSet<String> {
    ["-NONE-".to_string()].into_iter().collect()
}

/// Remove unary nonterminal-over-nonterminal nodes, bottom-up to fixpoint.
/// The child's label wins. Preterminals (a single terminal child) are kept.
pub fn collapse_unary(tree: &Tree) -> Tree {
    let children: Vec<Child> = tree
        .children
        .iter()
        .map(|c| match c {
            Child::Leaf(s) => Child::Leaf(s.clone()),
            Child::Node(t) => Child::Node(collapse_unary(t)),
        })
        .collect();
    if children.len() == 1 {
        if let Child::Node(inner) = &children[0] {
            return inner.clone();
        }
    }
    Tree::new(tree.label.clone(), children)
}

/// Replace every preterminal node (single terminal child) by a terminal
/// bearing the node's label, turning a word-level tree into a POS-string
/// tree. Applying it to a preterminal root returns `None` since a bare
/// terminal is not a tree.
pub fn strip_words(tree: &Tree) -> Option<Tree> {
    fn child_of(tree: &Tree) -> Child {
        if tree.children.len() == 1 {
            if let Child::Leaf(_) = tree.children[0] {
                return Child::Leaf(tree.label.clone());
            }
        }
        Child::Node(map_node(tree))
    }
    fn map_node(tree: &Tree) -> Tree {
        let children = tree
            .children
            .iter()
            .map(|c| match c {
                Child::Leaf(s) => Child::Leaf(s.clone()),
                Child::Node(t) => child_of(t),
            })
            .collect();
        Tree::new(tree.label.clone(), children)
    }
    match child_of(tree) {
        Child::Node(t) => Some(t),
        Child::Leaf(_) => None,
    }
}

fn fresh_label(scheme: BinarizationScheme, parent: &str, suffix: &[Child]) -> String {
    match scheme {
        BinarizationScheme::Correct => {
            let mut s = String::from("*_");
            for c in suffix {
                s.push_str(c.symbol());
            }
            s
        }
        BinarizationScheme::Continued => format!("{parent}_*"),
        BinarizationScheme::Simple => parent.to_string(),
    }
}

/// Convert n-ary productions to a right-branching binary cascade. Nodes
/// that are already binary (or preterminal) are unchanged; unary
/// nonterminal nodes are left as-is, so callers wanting the strict
/// two-children-or-terminal arity must run [`collapse_unary`] first.
pub fn binarize(tree: &Tree, scheme: BinarizationScheme) -> Tree {
    let children: Vec<Child> = tree
        .children
        .iter()
        .map(|c| match c {
            Child::Leaf(s) => Child::Leaf(s.clone()),
            Child::Node(t) => Child::Node(binarize(t, scheme)),
        })
        .collect();
    if children.len() <= 2 {
        return Tree::new(tree.label.clone(), children);
    }
    fn cascade(parent: &str, scheme: BinarizationScheme, rest: &[Child]) -> Child {
        if rest.len() == 2 {
            Tree::node(fresh_label(scheme, parent, rest), rest.to_vec())
        } else {
            let tail = cascade(parent, scheme, &rest[1..]);
            Tree::node(fresh_label(scheme, parent, rest), vec![rest[0].clone(), tail])
        }
    }
    let tail = cascade(&tree.label, scheme, &children[1..]);
    Tree::new(tree.label.clone(), vec![children[0].clone(), tail])
}

fn is_introduced(label: &str, scheme: BinarizationScheme) -> bool {
    match scheme {
        BinarizationScheme::Correct => label.starts_with("*_"),
        BinarizationScheme::Continued => label.ends_with("_*"),
        BinarizationScheme::Simple => false,
    }
}

/// Splice out the nonterminals introduced by [`binarize`], restoring the
/// flat right-hand sides. The Simple scheme is not invertible.
pub fn debinarize(tree: &Tree, scheme: BinarizationScheme) -> Result<Tree, DebinarizeError> {
    if scheme == BinarizationScheme::Simple {
        return Err(DebinarizeError::IrreversibleScheme);
    }
    Ok(splice_introduced(tree, &|label| is_introduced(label, scheme)))
}

/// Splice out every node whose label matches either introduced-symbol
/// shape, regardless of scheme. Used by the loose exact-match mode.
pub fn splice_any_introduced(tree: &Tree) -> Tree {
    splice_introduced(tree, &|label| label.starts_with("*_") || label.ends_with("_*"))
}

fn splice_introduced(tree: &Tree, marked: &dyn Fn(&str) -> bool) -> Tree {
    let mut children = Vec::new();
    for c in &tree.children {
        match c {
            Child::Leaf(s) => children.push(Child::Leaf(s.clone())),
            Child::Node(t) => {
                let t = splice_introduced(t, marked);
                if marked(&t.label) {
                    children.extend(t.children);
                } else {
                    children.push(Child::Node(t));
                }
            }
        }
    }
    Tree::new(tree.label.clone(), children)
}
