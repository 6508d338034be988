//! Synthetic trees and corpora: seeded generators for tests, the bundled
//! experiment treebank, and fixed demo grammars.

use rand_core::RngCore;

use crate::rng;
use crate::tree::{Child, Tree};

const NODE_LABELS: &[&str] = &["S", "NP", "VP", "PP", "A", "B", "C", "D", "E"];
const TERMINALS: &[&str] = &["x", "y", "z", "w"];

/// The single-tree demo corpus: a five-word sentence over POS terminals
/// whose subtree grammar has exactly ten fragments.
pub fn demo_tree() -> Tree {
    crate::treebank::read_penn("(S (NP PN PN) (VP V (NP DET N)))")
        .expect("demo tree parses")
        .remove(0)
}

/// A small ambiguous subtree grammar over the one-symbol vocabulary `x`,
/// given directly in the `<weight> <tree>` text format. Its most probable
/// derivation and most probable parse select different trees for `x x`.
pub fn demo_stsg_text() -> &'static str {
    "3 (S (A x) (C x))\n\
     2 (S (A x) (D x))\n\
     2 (S (E x) (B x))\n\
     2 (S (E x) B)\n\
     1 (B x)\n"
}

/// Random n-ary tree for reader/transform tests: arbitrary arity up to
/// `max_children`, unary chains allowed, depth bounded by `max_depth`.
pub fn random_nary_tree(rng: &mut impl RngCore, max_children: usize, max_depth: usize) -> Tree {
    let label = NODE_LABELS[rng::below(rng, NODE_LABELS.len())];
    let arity = 1 + rng::below(rng, max_children);
    let children = (0..arity)
        .map(|_| {
            let make_leaf = max_depth == 0 || rng::below(rng, 3) > 0;
            if make_leaf {
                Child::Leaf(TERMINALS[rng::below(rng, TERMINALS.len())].to_string())
            } else {
                Child::Node(random_nary_tree(rng, max_children, max_depth - 1))
            }
        })
        .collect();
    Tree::new(label, children)
}

/// Random tree already in binary shape (two children or a single
/// terminal), over deliberately small alphabets so that fragments repeat.
pub fn random_binary_tree(
    rng: &mut (impl RngCore + ?Sized),
    labels: &[&str],
    terminals: &[&str],
    max_depth: usize,
) -> Tree {
    fn child(
        rng: &mut (impl RngCore + ?Sized),
        labels: &[&str],
        terminals: &[&str],
        depth: usize,
    ) -> Child {
        if rng::below(rng, 3) == 0 {
            Child::Leaf(terminals[rng::below(rng, terminals.len())].to_string())
        } else {
            Child::Node(random_binary_tree(rng, labels, terminals, depth))
        }
    }
    let label = labels[rng::below(rng, labels.len())];
    if max_depth == 0 || rng::below(rng, 4) == 0 {
        return Tree::leaf(label, terminals[rng::below(rng, terminals.len())]);
    }
    let left = child(rng, labels, terminals, max_depth - 1);
    let right = child(rng, labels, terminals, max_depth - 1);
    Tree::new(label, vec![left, right])
}

/// Random binarized corpus for the reduction-equivalence checks. All trees
/// share the root label `S` unless `multi_root` is set, in which case a
/// second root label appears.
pub fn random_binary_corpus(rng: &mut impl RngCore, trees: usize, multi_root: bool) -> Vec<Tree> {
    let terminals = ["x", "y"];
    let labels = ["A", "B"];
    (0..trees)
        .map(|i| {
            let root = if multi_root && i % 2 == 1 { "T" } else { "S" };
            let body = random_binary_tree(rng, &labels, &terminals, 3);
            let other = if rng::below(rng, 2) == 0 {
                Child::Leaf(terminals[rng::below(rng, 2)].to_string())
            } else {
                Child::Node(random_binary_tree(rng, &labels, &terminals, 2))
            };
            Tree::new(root, vec![Child::Node(body), other])
        })
        .collect()
}

/// Weighted CFG used to sample the bundled experiment treebank. POS tags
/// are the terminals; about half the sentences end in a period.
struct MasterGrammar;

impl MasterGrammar {
    fn sentence(rng: &mut impl RngCore) -> Tree {
        let mut children = vec![
            Child::Node(Self::np(rng, 2)),
            Child::Node(Self::vp(rng, 2)),
        ];
        if rng::below(rng, 2) == 0 {
            children.push(Child::Leaf(".".to_string()));
        }
        Tree::new("S", children)
    }

    fn np(rng: &mut impl RngCore, depth: usize) -> Tree {
        let choice = if depth == 0 {
            rng::below(rng, 4) // non-recursive alternatives only
        } else {
            rng::weighted(rng, &[0.35, 0.15, 0.2, 0.1, 0.2])
        };
        match choice {
            0 => Tree::new("NP", vec![Child::Leaf("DET".into()), Child::Leaf("N".into())]),
            1 => Tree::new(
                "NP",
                vec![Child::Leaf("DET".into()), Child::Leaf("ADJ".into()), Child::Leaf("N".into())],
            ),
            2 => Tree::leaf("NP", "PN"),
            3 => Tree::new("NP", vec![Child::Leaf("PN".into()), Child::Leaf("PN".into())]),
            _ => Tree::new(
                "NP",
                vec![Child::Node(Self::np(rng, depth - 1)), Child::Node(Self::pp(rng, depth - 1))],
            ),
        }
    }

    fn pp(rng: &mut impl RngCore, depth: usize) -> Tree {
        Tree::new("PP", vec![Child::Leaf("P".into()), Child::Node(Self::np(rng, depth))])
    }

    fn vp(rng: &mut impl RngCore, depth: usize) -> Tree {
        let choice = if depth == 0 {
            rng::below(rng, 2)
        } else {
            rng::weighted(rng, &[0.45, 0.15, 0.15, 0.1, 0.15])
        };
        match choice {
            0 => Tree::new("VP", vec![Child::Leaf("V".into()), Child::Node(Self::np(rng, depth.saturating_sub(1)))]),
            1 => Tree::leaf("VP", "V"),
            2 => Tree::new(
                "VP",
                vec![
                    Child::Leaf("V".into()),
                    Child::Node(Self::np(rng, depth - 1)),
                    Child::Node(Self::pp(rng, depth - 1)),
                ],
            ),
            3 => Tree::new(
                "VP",
                vec![Child::Leaf("AUX".into()), Child::Leaf("V".into()), Child::Node(Self::np(rng, depth - 1))],
            ),
            _ => Tree::new(
                "VP",
                vec![
                    Child::Leaf("V".into()),
                    Child::Node(Tree::new(
                        "SBAR",
                        vec![Child::Leaf("COMP".into()), Child::Node(Self::sentence_inner(rng, depth - 1))],
                    )),
                ],
            ),
        }
    }

    fn sentence_inner(rng: &mut impl RngCore, depth: usize) -> Tree {
        Tree::new(
            "S",
            vec![Child::Node(Self::np(rng, depth)), Child::Node(Self::vp(rng, depth))],
        )
    }
}

/// Deterministic synthetic treebank: `count` sentences sampled from the
/// master grammar under the given seed.
pub fn synthetic_treebank(seed: u64, count: usize) -> Vec<Tree> {
    let mut rng = rng::seeded(seed, 0);
    (0..count).map(|_| MasterGrammar::sentence(&mut rng)).collect()
}

/// The bundled 200-sentence treebank, as Penn-bracketed text (one tree
/// per line). A checked-in copy lives at `data/synthetic_200.mrg`; the
/// two must stay byte-identical.
pub fn bundled_corpus_text() -> String {
    let mut out = String::new();
    for tree in synthetic_treebank(20_108, 200) {
        out.push_str(&tree.to_string());
        out.push('\n');
    }
    out
}

/// The experiment configuration that produces the bundled golden report.
pub fn bundled_experiment_options() -> crate::evalx::ExperimentOptions {
    crate::evalx::ExperimentOptions {
        split: crate::evalx::SplitConfig {
            train: 120,
            test: 40,
            max_len: Some(30),
            runs: 10,
            seed: 42,
        },
        with_gold_oracle: true,
        ..Default::default()
    }
}

/// Right-spine trees whose internal nodes all have two nonterminal
/// children, so the reduced grammar carries binary rules and the chart's
/// split loop does the work. The grammar parses `x^n` for every even n,
/// which makes it a clean fixture for runtime scaling measurements.
pub fn scaling_corpus(min_nodes: usize) -> Vec<Tree> {
    fn base() -> Tree {
        Tree::new("S", vec![Child::Leaf("x".into()), Child::Leaf("x".into())])
    }
    fn spine(depth: usize) -> Tree {
        if depth == 1 {
            base()
        } else {
            Tree::new("S", vec![Child::Node(base()), Child::Node(spine(depth - 1))])
        }
    }
    let mut trees = Vec::new();
    let mut nodes = 0;
    let mut depth = 2;
    while nodes < min_nodes {
        let t = spine(depth);
        nodes += t.node_count();
        trees.push(t);
        depth += 1;
        if depth > 10 {
            depth = 2;
        }
    }
    trees
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_tree_has_expected_yield() {
        assert_eq!(demo_tree().terminals(), ["PN", "PN", "V", "DET", "N"]);
    }

    #[test]
    fn synthetic_treebank_is_deterministic() {
        let a = synthetic_treebank(42, 50);
        let b = synthetic_treebank(42, 50);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|t| t.label == "S"));
    }

    #[test]
    fn scaling_corpus_is_binary_and_large_enough() {
        let corpus = scaling_corpus(300);
        let total: usize = corpus.iter().map(Tree::node_count).sum();
        assert!(total >= 300);
        assert!(corpus.iter().all(Tree::is_binary));
    }

    #[test]
    fn random_binary_corpus_is_binary() {
        let mut rng = rng::seeded(5, 0);
        for tree in random_binary_corpus(&mut rng, 20, true) {
            assert!(tree.is_binary(), "{tree}");
        }
    }
}
