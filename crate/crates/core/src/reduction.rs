//! Reduction of the all-subtrees model to a linear-size PCFG: address
//! assignment, per-node subtree counting, and the eight-rule schema.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::pcfg::{Pcfg, PcfgBuilder, Rhs, SymbolId, TermId};
use crate::tree::{Child, Tree};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("node {label:?} has {arity} children; expected two children or a single terminal")]
    ArityViolation { label: String, arity: usize },
}

#[derive(Debug, Clone)]
pub enum AddressedChild {
    Node(AddressedNode),
    Terminal(String),
}

/// A corpus node with its globally unique address and subtree count
/// `a_j = Π (child count + 1)`, terminal children contributing factor 1.
#[derive(Debug, Clone)]
pub struct AddressedNode {
    pub label: String,
    pub address: usize,
    pub children: Vec<AddressedChild>,
    pub count: BigUint,
}

/// Binarized corpus trees with addresses assigned depth-first,
/// left-to-right, in corpus order, starting at 1.
#[derive(Debug, Clone)]
pub struct AddressedCorpus {
    pub trees: Vec<AddressedNode>,
    pub node_total: usize,
    label_totals: BTreeMap<String, BigUint>,
}

/// Per-node and per-label subtree count tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeCounts {
    /// address → (label, count)
    pub per_node: BTreeMap<usize, (String, BigUint)>,
    /// label → Σ counts over nodes with that label
    pub per_label: BTreeMap<String, BigUint>,
}

/// Number every node and compute the subtree counts bottom-up.
pub fn assign_addresses(corpus: &[Tree]) -> Result<AddressedCorpus, ReductionError> {
    fn convert(tree: &Tree, next: &mut usize) -> Result<AddressedNode, ReductionError> {
        let ok = match tree.children.len() {
            1 => matches!(tree.children[0], Child::Leaf(_)),
            2 => true,
            _ => false,
        };
        if !ok {
            return Err(ReductionError::ArityViolation {
                label: tree.label.clone(),
                arity: tree.children.len(),
            });
        }
        let address = *next;
        *next += 1;
        let mut children = Vec::with_capacity(tree.children.len());
        let mut count = BigUint::one();
        for c in &tree.children {
            match c {
                Child::Leaf(s) => children.push(AddressedChild::Terminal(s.clone())),
                Child::Node(t) => {
                    let node = convert(t, next)?;
                    count *= &node.count + 1u32;
                    children.push(AddressedChild::Node(node));
                }
            }
        }
        Ok(AddressedNode { label: tree.label.clone(), address, children, count })
    }

    let mut next = 1;
    let trees = corpus
        .iter()
        .map(|t| convert(t, &mut next))
        .collect::<Result<Vec<_>, _>>()?;
    let mut label_totals = BTreeMap::new();
    for tree in &trees {
        accumulate_totals(tree, &mut label_totals);
    }
    Ok(AddressedCorpus { trees, node_total: next - 1, label_totals })
}

fn accumulate_totals(node: &AddressedNode, totals: &mut BTreeMap<String, BigUint>) {
    *totals.entry(node.label.clone()).or_insert_with(BigUint::zero) += &node.count;
    for c in &node.children {
        if let AddressedChild::Node(n) = c {
            accumulate_totals(n, totals);
        }
    }
}

impl AddressedCorpus {
    /// Total subtree count for a label (the per-root normalizer `a`).
    pub fn label_total(&self, label: &str) -> Option<&BigUint> {
        self.label_totals.get(label)
    }

    /// Root labels with the number of corpus trees rooted there.
    pub fn root_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for t in &self.trees {
            *out.entry(t.label.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Extract the per-node and per-label count tables.
pub fn count_subtrees(corpus: &AddressedCorpus) -> SubtreeCounts {
    fn walk(node: &AddressedNode, per_node: &mut BTreeMap<usize, (String, BigUint)>) {
        per_node.insert(node.address, (node.label.clone(), node.count.clone()));
        for c in &node.children {
            if let AddressedChild::Node(n) = c {
                walk(n, per_node);
            }
        }
    }
    let mut per_node = BTreeMap::new();
    for t in &corpus.trees {
        walk(t, &mut per_node);
    }
    SubtreeCounts { per_node, per_label: corpus.label_totals.clone() }
}

/// Convert a count ratio to double precision, safe for counts wider than
/// the f64 range.
pub(crate) fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    let nb = num.bits();
    let db = den.bits();
    if nb == 0 {
        return 0.0;
    }
    if nb <= 52 && db <= 52 {
        return num.to_f64().unwrap() / den.to_f64().unwrap();
    }
    let sn = nb.saturating_sub(64) as usize;
    let sd = db.saturating_sub(64) as usize;
    let n_top = (num >> sn).to_f64().unwrap();
    let d_top = (den >> sd).to_f64().unwrap();
    (n_top / d_top) * (sn as f64 - sd as f64).exp2()
}

/// Emit the reduced grammar: for a node `A@j` with children `B@k`, `C@l`,
/// the eight rules
///
/// ```text
/// A@j → B C    (1/a_j)        A → B C      (1/a)
/// A@j → B@k C  (b_k/a_j)      A → B@k C    (b_k/a)
/// A@j → B C@l  (c_l/a_j)      A → B C@l    (c_l/a)
/// A@j → B@k C@l (b_k c_l/a_j) A → B@k C@l  (b_k c_l/a)
/// ```
///
/// Terminal children have no interior variant, so their rules are omitted
/// and the terminal appears literally; a preterminal node emits exactly
/// `A@j → t (1)` and `A → t (1/a)`. Duplicate exterior rules merge by
/// summing. When more than one root label occurs, a synthetic `TOP` start
/// distribution weights each root label by its share of corpus trees.
pub fn build_pcfg(corpus: &AddressedCorpus) -> Pcfg {
    enum Opt {
        Sym(SymbolId, BigUint),
        Term(TermId),
    }
    let mut b = PcfgBuilder::new();

    fn emit(node: &AddressedNode, b: &mut PcfgBuilder, totals: &BTreeMap<String, BigUint>) {
        let ext = b.exterior(&node.label);
        let int = b.interior(&node.label, node.address);
        let child_opts: Vec<Vec<Opt>> = node
            .children
            .iter()
            .map(|c| match c {
                AddressedChild::Terminal(t) => vec![Opt::Term(b.terminal(t))],
                AddressedChild::Node(n) => vec![
                    Opt::Sym(b.exterior(&n.label), BigUint::one()),
                    Opt::Sym(b.interior(&n.label, n.address), n.count.clone()),
                ],
            })
            .collect();
        let a_j = &node.count;
        let a = &totals[&node.label];
        let mut combos: Vec<(BigUint, Rhs)> = Vec::with_capacity(8);
        match child_opts.len() {
            1 => {
                for o in &child_opts[0] {
                    match o {
                        Opt::Term(t) => combos.push((BigUint::one(), Rhs::Lexical(*t))),
                        Opt::Sym(..) => unreachable!("unary nonterminal child"),
                    }
                }
            }
            2 => {
                for left in &child_opts[0] {
                    for right in &child_opts[1] {
                        combos.push(match (left, right) {
                            (Opt::Term(t), Opt::Term(u)) => (BigUint::one(), Rhs::Terms(*t, *u)),
                            (Opt::Term(t), Opt::Sym(s, w)) => (w.clone(), Rhs::TermNonterm(*t, *s)),
                            (Opt::Sym(s, w), Opt::Term(t)) => (w.clone(), Rhs::NontermTerm(*s, *t)),
                            (Opt::Sym(s, w), Opt::Sym(s2, w2)) => (w * w2, Rhs::Binary(*s, *s2)),
                        });
                    }
                }
            }
            _ => unreachable!("arity checked at assignment"),
        }
        for (w, rhs) in combos {
            b.rule(int, rhs, ratio_to_f64(&w, a_j));
            b.rule(ext, rhs, ratio_to_f64(&w, a));
        }
        for c in &node.children {
            if let AddressedChild::Node(n) = c {
                emit(n, b, totals);
            }
        }
    }

    for tree in &corpus.trees {
        emit(tree, &mut b, &corpus.label_totals);
    }

    let roots = corpus.root_counts();
    let total: usize = roots.values().sum();
    if roots.len() == 1 {
        let name = roots.keys().next().unwrap().clone();
        b.finish(&name, &[(name.clone(), 1.0)]).expect("root label has rules")
    } else {
        let dist: Vec<(String, f64)> = roots
            .iter()
            .map(|(label, n)| (label.clone(), *n as f64 / total as f64))
            .collect();
        b.finish("TOP", &dist).expect("root labels have rules")
    }
}

/// Descriptive figures for a reduced grammar. Every corpus node owns one
/// interior symbol, so the node count is recoverable from the grammar.
#[derive(Debug, Clone, PartialEq)]
pub struct GrammarStats {
    pub nodes: usize,
    pub rules: usize,
    pub exterior_symbols: usize,
    pub interior_symbols: usize,
    pub terminals: usize,
    pub rules_per_node: f64,
}

pub fn grammar_stats(pcfg: &Pcfg) -> GrammarStats {
    let interior = pcfg.symbols().filter(|(_, s)| s.is_interior()).count();
    let exterior = pcfg.symbol_count() - interior;
    GrammarStats {
        nodes: interior,
        rules: pcfg.rules.len(),
        exterior_symbols: exterior,
        interior_symbols: interior,
        terminals: pcfg.terminal_count(),
        rules_per_node: if interior == 0 {
            0.0
        } else {
            pcfg.rules.len() as f64 / interior as f64
        },
    }
}

impl std::fmt::Display for GrammarStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "nodes\t{}", self.nodes)?;
        writeln!(f, "rules\t{}", self.rules)?;
        writeln!(f, "exterior symbols\t{}", self.exterior_symbols)?;
        writeln!(f, "interior symbols\t{}", self.interior_symbols)?;
        writeln!(f, "terminals\t{}", self.terminals)?;
        write!(f, "rules per node\t{:.3}", self.rules_per_node)
    }
}
