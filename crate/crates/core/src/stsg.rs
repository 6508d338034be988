//! Explicit subtree-substitution grammars, enumerated exactly.
//!
//! This is the brute-force side of the toolkit: every fragment is
//! materialized, every derivation is enumerated, and all arithmetic is
//! exact rational. It exists to pin down ground truth for the reduced
//! grammar and for the worked examples. Exponential, desk scale only.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::pcfg::{Pcfg, PcfgBuilder, Rhs, SymbolId, TermId};
use crate::tree::{Child, Tree};

/// Default cap on the total number of extracted fragments.
pub const DEFAULT_SUBTREE_CAP: usize = 1_000_000;

/// Default cap on derivation-enumeration work (states visited and
/// derivations produced). Enumeration is exponential; sentences beyond
/// roughly ten terminals are rarely enumerable at desk scale.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum StsgError {
    #[error("subtree extraction exceeded the cap at {0} fragments")]
    SubtreeCapExceeded(usize),
    #[error("derivation enumeration exceeded the cap")]
    EnumerationCapExceeded,
    #[error("no derivation yields the sentence")]
    NoParse,
    #[error("malformed grammar line {0}")]
    Malformed(usize),
    #[error("fragment is not in binary/preterminal shape: {0}")]
    NotBinary(String),
}

/// A fragment node: internal structure, terminal leaf, or substitution
/// site (a frontier nonterminal).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Frag {
    Node { label: String, children: Vec<Frag> },
    Terminal(String),
    Site(String),
}

impl Frag {
    pub fn label(&self) -> &str {
        match self {
            Frag::Node { label, .. } => label,
            Frag::Terminal(s) | Frag::Site(s) => s,
        }
    }

    fn write_into(&self, out: &mut String) {
        match self {
            Frag::Node { label, children } => {
                out.push('(');
                out.push_str(label);
                for c in children {
                    out.push(' ');
                    c.write_into(out);
                }
                out.push(')');
            }
            Frag::Terminal(s) | Frag::Site(s) => out.push_str(s),
        }
    }

    fn to_tree(&self) -> Tree {
        match self {
            Frag::Node { label, children } => Tree::new(
                label.clone(),
                children
                    .iter()
                    .map(|c| match c {
                        Frag::Terminal(s) => Child::Leaf(s.clone()),
                        node @ Frag::Node { .. } => Child::Node(node.to_tree()),
                        Frag::Site(s) => panic!("open site {s} in a complete fragment"),
                    })
                    .collect(),
            ),
            _ => panic!("fragment root must be a node"),
        }
    }

    /// Frontier symbols left to right: `Ok(terminal)` or `Err(site label)`.
    fn frontier<'a>(&'a self, out: &mut Vec<Result<&'a str, &'a str>>) {
        match self {
            Frag::Node { children, .. } => {
                for c in children {
                    c.frontier(out);
                }
            }
            Frag::Terminal(s) => out.push(Ok(s)),
            Frag::Site(s) => out.push(Err(s)),
        }
    }

    /// Substitute `replacement` at the leftmost site; returns the site
    /// label. Panics if no site is open.
    fn substitute_leftmost(&mut self, replacement: &Frag) -> bool {
        match self {
            Frag::Node { children, .. } => {
                for c in children.iter_mut() {
                    match c {
                        Frag::Site(_) => {
                            *c = replacement.clone();
                            return true;
                        }
                        Frag::Node { .. } => {
                            if c.substitute_leftmost(replacement) {
                                return true;
                            }
                        }
                        Frag::Terminal(_) => {}
                    }
                }
                false
            }
            _ => false,
        }
    }

    fn leftmost_site(&self) -> Option<&str> {
        match self {
            Frag::Node { children, .. } => children.iter().find_map(Frag::leftmost_site),
            Frag::Terminal(_) => None,
            Frag::Site(s) => Some(s),
        }
    }
}

impl std::fmt::Display for Frag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        self.write_into(&mut s);
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryTree {
    pub frag: Frag,
    pub weight: BigRational,
}

impl ElementaryTree {
    pub fn root(&self) -> &str {
        self.frag.label()
    }
}

/// Fragments grouped by root label with per-root normalizers, plus a start
/// distribution over root labels. Fragment probabilities are exact
/// rationals `weight / normalizer(root)`.
#[derive(Debug, Clone)]
pub struct ExplicitStsg {
    pub trees: Vec<ElementaryTree>,
    by_root: BTreeMap<String, Vec<usize>>,
    pub normalizers: BTreeMap<String, BigRational>,
    pub start: BTreeMap<String, BigRational>,
}

impl ExplicitStsg {
    fn assemble(
        trees: Vec<ElementaryTree>,
        start: BTreeMap<String, BigRational>,
    ) -> ExplicitStsg {
        let mut by_root: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut normalizers: BTreeMap<String, BigRational> = BTreeMap::new();
        for (i, t) in trees.iter().enumerate() {
            by_root.entry(t.root().to_string()).or_default().push(i);
            *normalizers
                .entry(t.root().to_string())
                .or_insert_with(BigRational::zero) += &t.weight;
        }
        ExplicitStsg { trees, by_root, normalizers, start }
    }

    pub fn probability(&self, idx: usize) -> BigRational {
        let t = &self.trees[idx];
        &t.weight / &self.normalizers[t.root()]
    }

    pub fn fragment_count(&self) -> usize {
        self.trees.len()
    }

    /// All nonterminal labels mentioned anywhere in the grammar.
    pub fn labels(&self) -> Vec<String> {
        fn collect(frag: &Frag, out: &mut Vec<String>) {
            match frag {
                Frag::Node { label, children } => {
                    out.push(label.clone());
                    for c in children {
                        collect(c, out);
                    }
                }
                Frag::Site(s) => out.push(s.clone()),
                Frag::Terminal(_) => {}
            }
        }
        let mut out = Vec::new();
        for t in &self.trees {
            collect(&t.frag, &mut out);
        }
        out.sort();
        out.dedup();
        out
    }

    /// One fragment per line: `<weight> <bracketed form>`, substitution
    /// sites written as bare nonterminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.trees {
            out.push_str(&t.weight.to_string());
            out.push(' ');
            out.push_str(&t.frag.to_string());
            out.push('\n');
        }
        out
    }

    /// Parse the `<weight> <tree>` format. A bare frontier token is a
    /// substitution site iff it occurs as some fragment's root label.
    /// `start` is the root label derivations begin from.
    pub fn from_text(text: &str, start: &str) -> Result<ExplicitStsg, StsgError> {
        let mut raw: Vec<(BigRational, Tree)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (w, rest) = line.split_once(char::is_whitespace).ok_or(StsgError::Malformed(no + 1))?;
            let weight = parse_rational(w).ok_or(StsgError::Malformed(no + 1))?;
            let mut trees =
                crate::treebank::read_penn(rest).map_err(|_| StsgError::Malformed(no + 1))?;
            if trees.len() != 1 {
                return Err(StsgError::Malformed(no + 1));
            }
            raw.push((weight, trees.remove(0)));
        }
        let roots: std::collections::BTreeSet<String> =
            raw.iter().map(|(_, t)| t.label.clone()).collect();
        fn convert(tree: &Tree, roots: &std::collections::BTreeSet<String>) -> Frag {
            Frag::Node {
                label: tree.label.clone(),
                children: tree
                    .children
                    .iter()
                    .map(|c| match c {
                        Child::Node(t) => convert(t, roots),
                        Child::Leaf(s) => {
                            if roots.contains(s) {
                                Frag::Site(s.clone())
                            } else {
                                Frag::Terminal(s.clone())
                            }
                        }
                    })
                    .collect(),
            }
        }
        let trees: Vec<ElementaryTree> = raw
            .iter()
            .map(|(w, t)| ElementaryTree { frag: convert(t, &roots), weight: w.clone() })
            .collect();
        let start_dist = [(start.to_string(), BigRational::one())].into_iter().collect();
        Ok(ExplicitStsg::assemble(trees, start_dist))
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((n, d)) => Some(BigRational::new(n.parse::<BigInt>().ok()?, d.parse::<BigInt>().ok()?)),
        None => Some(BigRational::from_integer(s.parse::<BigInt>().ok()?)),
    }
}

/// Extract every subtree of depth ≥ 1 from a binarized corpus. With
/// `merge` set (the standard model), identical fragments share one entry
/// whose weight is the occurrence count; unmerged mode keeps one
/// weight-1 entry per occurrence. The start distribution weights each
/// root label by its share of corpus trees.
pub fn extract_all_subtrees(
    corpus: &[Tree],
    merge: bool,
    cap: usize,
) -> Result<ExplicitStsg, StsgError> {
    /// Fragments headed at this node, computed bottom-up so each node's
    /// set is materialized exactly once; `used` tracks the corpus total
    /// against the cap.
    fn fragments(
        tree: &Tree,
        cap: usize,
        used: &mut usize,
        sink: &mut dyn FnMut(Frag),
    ) -> Result<Vec<Frag>, StsgError> {
        let mut options: Vec<Vec<Frag>> = Vec::with_capacity(tree.children.len());
        for c in &tree.children {
            match c {
                Child::Leaf(s) => options.push(vec![Frag::Terminal(s.clone())]),
                Child::Node(t) => {
                    let mut opts = vec![Frag::Site(t.label.clone())];
                    opts.extend(fragments(t, cap, used, sink)?);
                    options.push(opts);
                }
            }
        }
        let mut combos: Vec<Vec<Frag>> = vec![Vec::new()];
        for opts in &options {
            if combos.len().saturating_mul(opts.len()) > cap - *used {
                return Err(StsgError::SubtreeCapExceeded(cap + 1));
            }
            let mut next = Vec::with_capacity(combos.len() * opts.len());
            for prefix in &combos {
                for o in opts {
                    let mut row = prefix.clone();
                    row.push(o.clone());
                    next.push(row);
                }
            }
            combos = next;
        }
        let out: Vec<Frag> = combos
            .into_iter()
            .map(|children| Frag::Node { label: tree.label.clone(), children })
            .collect();
        *used += out.len();
        for f in &out {
            sink(f.clone());
        }
        Ok(out)
    }

    let mut used = 0;
    let mut merged: BTreeMap<(String, String), (Frag, BigRational)> = BTreeMap::new();
    let mut unmerged: Vec<ElementaryTree> = Vec::new();
    {
        let mut sink = |frag: Frag| {
            if merge {
                let key = (frag.label().to_string(), frag.to_string());
                merged
                    .entry(key)
                    .and_modify(|(_, w)| *w += BigRational::one())
                    .or_insert((frag, BigRational::one()));
            } else {
                unmerged.push(ElementaryTree { frag, weight: BigRational::one() });
            }
        };
        for t in corpus {
            fragments(t, cap, &mut used, &mut sink)?;
        }
    }
    let trees = if merge {
        merged
            .into_values()
            .map(|(frag, weight)| ElementaryTree { frag, weight })
            .collect()
    } else {
        unmerged
    };
    let mut start: BTreeMap<String, BigRational> = BTreeMap::new();
    let total = BigRational::from_integer(BigInt::from(corpus.len()));
    for t in corpus {
        *start.entry(t.label.clone()).or_insert_with(BigRational::zero) +=
            BigRational::one() / &total;
    }
    Ok(ExplicitStsg::assemble(trees, start))
}

/// One leftmost-substitution derivation: the fragment sequence, the tree
/// it assembles, and its exact probability (start weight times fragment
/// probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub fragments: Vec<usize>,
    pub tree: Tree,
    pub prob: BigRational,
}

/// All complete derivations of `sentence`, leftmost-first. `cap` bounds
/// both the number of derivations and the search states visited.
pub fn enumerate_derivations(
    stsg: &ExplicitStsg,
    sentence: &[String],
    cap: usize,
) -> Result<Vec<Derivation>, StsgError> {
    struct Search<'a> {
        stsg: &'a ExplicitStsg,
        sentence: &'a [String],
        out: Vec<Derivation>,
        states: usize,
        cap: usize,
    }
    impl Search<'_> {
        fn viable(&self, frag: &Frag) -> bool {
            let mut frontier = Vec::new();
            frag.frontier(&mut frontier);
            let terminals = frontier.iter().filter(|f| f.is_ok()).count();
            let sites = frontier.len() - terminals;
            if terminals + sites > self.sentence.len() {
                return false;
            }
            if sites == 0 && terminals != self.sentence.len() {
                return false;
            }
            // terminals before the first site must prefix the sentence,
            // terminals after the last site must suffix it
            let prefix = frontier.iter().take_while(|f| f.is_ok()).filter_map(|f| f.ok());
            if !prefix.zip(self.sentence).all(|(a, b)| a == b) {
                return false;
            }
            if sites > 0 {
                let suffix = frontier.iter().rev().take_while(|f| f.is_ok()).filter_map(|f| f.ok());
                if !suffix.zip(self.sentence.iter().rev()).all(|(a, b)| a == b) {
                    return false;
                }
            }
            true
        }

        fn expand(
            &mut self,
            frag: Frag,
            seq: Vec<usize>,
            prob: BigRational,
        ) -> Result<(), StsgError> {
            self.states += 1;
            if self.states > self.cap {
                return Err(StsgError::EnumerationCapExceeded);
            }
            if !self.viable(&frag) {
                return Ok(());
            }
            let site = match frag.leftmost_site() {
                None => {
                    if self.out.len() >= self.cap {
                        return Err(StsgError::EnumerationCapExceeded);
                    }
                    self.out.push(Derivation { tree: frag.to_tree(), fragments: seq, prob });
                    return Ok(());
                }
                Some(s) => s.to_string(),
            };
            let Some(candidates) = self.stsg.by_root.get(&site) else {
                return Ok(());
            };
            for &idx in candidates {
                let mut next = frag.clone();
                let ok = next.substitute_leftmost(&self.stsg.trees[idx].frag);
                debug_assert!(ok);
                let mut seq = seq.clone();
                seq.push(idx);
                self.expand(next, seq, &prob * self.stsg.probability(idx))?;
            }
            Ok(())
        }
    }

    let mut search = Search { stsg, sentence, out: Vec::new(), states: 0, cap };
    for (root, weight) in &stsg.start {
        if weight.is_zero() {
            continue;
        }
        let Some(candidates) = stsg.by_root.get(root) else { continue };
        for &idx in candidates {
            search.expand(
                stsg.trees[idx].frag.clone(),
                vec![idx],
                weight * stsg.probability(idx),
            )?;
        }
    }
    Ok(search.out)
}

/// Group derivation mass by resulting tree. Values sum to the total
/// derivation mass of the sentence (not normalized).
pub fn tree_distribution(derivations: &[Derivation]) -> BTreeMap<Tree, BigRational> {
    let mut out: BTreeMap<Tree, BigRational> = BTreeMap::new();
    for d in derivations {
        *out.entry(d.tree.clone()).or_insert_with(BigRational::zero) += &d.prob;
    }
    out
}

/// Posterior probability of each labeled span: the share of tree mass
/// containing a `label` node over `(start, end)` (1-based inclusive).
pub fn oracle_posteriors(
    stsg: &ExplicitStsg,
    sentence: &[String],
    cap: usize,
) -> Result<BTreeMap<(usize, usize, String), BigRational>, StsgError> {
    let derivations = enumerate_derivations(stsg, sentence, cap)?;
    if derivations.is_empty() {
        return Err(StsgError::NoParse);
    }
    let dist = tree_distribution(&derivations);
    let total: BigRational = dist.values().sum();
    let mut out: BTreeMap<(usize, usize, String), BigRational> = BTreeMap::new();
    for (tree, mass) in &dist {
        for (s, t, label) in tree.spans() {
            *out.entry((s, t, label)).or_insert_with(BigRational::zero) += mass;
        }
    }
    for v in out.values_mut() {
        *v /= &total;
    }
    Ok(out)
}

/// Oracle posteriors packaged as a [`crate::chart::PosteriorMatrix`] over the grammar's
/// labels, for the exact-rational maximum-constituents path.
pub fn posterior_matrix(
    stsg: &ExplicitStsg,
    sentence: &[String],
    cap: usize,
) -> Result<crate::chart::PosteriorMatrix<BigRational>, StsgError> {
    let g = oracle_posteriors(stsg, sentence, cap)?;
    let mut pm = crate::chart::PosteriorMatrix::new(sentence.len(), stsg.labels());
    for ((s, t, label), v) in g {
        pm.add(s, t, &label, v);
    }
    Ok(pm)
}

/// The single most probable derivation; ties break toward the
/// lexicographically smallest written tree.
pub fn oracle_mpd(
    stsg: &ExplicitStsg,
    sentence: &[String],
    cap: usize,
) -> Result<Derivation, StsgError> {
    let derivations = enumerate_derivations(stsg, sentence, cap)?;
    derivations
        .into_iter()
        .map(|d| (d.tree.to_string(), d))
        .max_by(|(ka, a), (kb, b)| a.prob.cmp(&b.prob).then_with(|| kb.cmp(ka)))
        .map(|(_, d)| d)
        .ok_or(StsgError::NoParse)
}

/// The most probable parse: the tree with the largest summed derivation
/// mass; same tie-break as [`oracle_mpd`].
pub fn oracle_mpp(
    stsg: &ExplicitStsg,
    sentence: &[String],
    cap: usize,
) -> Result<(Tree, BigRational), StsgError> {
    let derivations = enumerate_derivations(stsg, sentence, cap)?;
    tree_distribution(&derivations)
        .into_iter()
        .max_by(|(ta, pa), (tb, pb)| {
            pa.cmp(pb).then_with(|| tb.to_string().cmp(&ta.to_string()))
        })
        .ok_or(StsgError::NoParse)
}

impl ExplicitStsg {
    /// Encode the grammar as an equivalent PCFG: each internal fragment
    /// node becomes a fresh interior symbol with probability-1 rules, the
    /// root rule carries the fragment probability, and substitution sites
    /// map to exterior symbols. Derivations correspond one to one with
    /// equal probability. Fragments must be in binary/preterminal shape.
    pub fn to_pcfg(&self) -> Result<Pcfg, StsgError> {
        enum Enc {
            Sym(SymbolId),
            Term(TermId),
        }
        let mut b = PcfgBuilder::new();
        let mut next_addr = 1usize;

        fn encode(
            frag: &Frag,
            b: &mut PcfgBuilder,
            next_addr: &mut usize,
            root_prob: Option<(SymbolId, f64)>,
        ) -> Result<Enc, StsgError> {
            match frag {
                Frag::Site(s) => Ok(Enc::Sym(b.exterior(s))),
                Frag::Terminal(t) => Ok(Enc::Term(b.terminal(t))),
                Frag::Node { label, children } => {
                    let (lhs, prob) = match root_prob {
                        Some((sym, p)) => (sym, p),
                        None => {
                            let sym = b.interior(label, *next_addr);
                            *next_addr += 1;
                            (sym, 1.0)
                        }
                    };
                    let encoded: Vec<Enc> = children
                        .iter()
                        .map(|c| encode(c, b, next_addr, None))
                        .collect::<Result<_, _>>()?;
                    let rhs = match encoded.as_slice() {
                        [Enc::Term(t)] => Rhs::Lexical(*t),
                        [Enc::Sym(x), Enc::Sym(y)] => Rhs::Binary(*x, *y),
                        [Enc::Sym(x), Enc::Term(t)] => Rhs::NontermTerm(*x, *t),
                        [Enc::Term(t), Enc::Sym(x)] => Rhs::TermNonterm(*t, *x),
                        [Enc::Term(t), Enc::Term(u)] => Rhs::Terms(*t, *u),
                        _ => return Err(StsgError::NotBinary(frag.to_string())),
                    };
                    b.rule(lhs, rhs, prob);
                    Ok(Enc::Sym(lhs))
                }
            }
        }

        for (i, tree) in self.trees.iter().enumerate() {
            let root = b.exterior(tree.root());
            let p = self.probability(i).to_f64().unwrap_or(0.0);
            encode(&tree.frag, &mut b, &mut next_addr, Some((root, p)))?;
        }
        let start_dist: Vec<(String, f64)> = self
            .start
            .iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|(label, w)| (label.clone(), w.to_f64().unwrap_or(0.0)))
            .collect();
        let (name, dist) = if start_dist.len() == 1 {
            (start_dist[0].0.clone(), start_dist)
        } else {
            ("TOP".to_string(), start_dist)
        };
        b.finish(&name, &dist).map_err(StsgError::NotBinary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn demo_stsg() -> ExplicitStsg {
        ExplicitStsg::from_text(synth::demo_stsg_text(), "S").unwrap()
    }

    fn sentence(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn extraction_on_the_demo_corpus() {
        let stsg = extract_all_subtrees(&[synth::demo_tree()], true, 1_000_000).unwrap();
        assert_eq!(stsg.fragment_count(), 10);
        let by_root: BTreeMap<&str, usize> = stsg
            .by_root
            .iter()
            .map(|(k, v)| (k.as_str(), v.len()))
            .collect();
        assert_eq!(by_root, BTreeMap::from([("S", 6), ("NP", 2), ("VP", 2)]));
        for i in 0..stsg.fragment_count() {
            let p = stsg.probability(i);
            let expected = match stsg.trees[i].root() {
                "S" => ratio(1, 6),
                _ => ratio(1, 2),
            };
            assert_eq!(p, expected, "{}", stsg.trees[i].frag);
        }
    }

    #[test]
    fn extraction_of_single_preterminal() {
        let corpus = crate::treebank::read_penn("(A x)").unwrap();
        let stsg = extract_all_subtrees(&corpus, true, 100).unwrap();
        assert_eq!(stsg.fragment_count(), 1);
        assert_eq!(stsg.probability(0), BigRational::one());
    }

    #[test]
    fn duplicated_corpus_keeps_probabilities() {
        let stsg =
            extract_all_subtrees(&[synth::demo_tree(), synth::demo_tree()], true, 1_000_000)
                .unwrap();
        assert_eq!(stsg.fragment_count(), 10);
        for i in 0..10 {
            let expected = match stsg.trees[i].root() {
                "S" => ratio(1, 6),
                _ => ratio(1, 2),
            };
            assert_eq!(stsg.probability(i), expected);
            assert_eq!(stsg.trees[i].weight, ratio(2, 1));
        }
    }

    #[test]
    fn subtree_cap_is_enforced() {
        let err = extract_all_subtrees(&[synth::demo_tree()], true, 5);
        assert!(matches!(err, Err(StsgError::SubtreeCapExceeded(_))));
    }

    #[test]
    fn demo_stsg_round_trips_text() {
        let stsg = demo_stsg();
        assert_eq!(stsg.fragment_count(), 5);
        assert_eq!(stsg.normalizers["S"], ratio(9, 1));
        assert_eq!(stsg.normalizers["B"], ratio(1, 1));
        let again = ExplicitStsg::from_text(&stsg.to_text(), "S").unwrap();
        assert_eq!(again.to_text(), stsg.to_text());
    }

    #[test]
    fn site_detection_uses_root_labels() {
        let stsg = demo_stsg();
        // fragment "(S (E x) B)": B is a bare token and a root label → site
        let with_site = stsg
            .trees
            .iter()
            .find(|t| t.frag.to_string() == "(S (E x) B)")
            .expect("fragment present");
        match &with_site.frag {
            Frag::Node { children, .. } => assert_eq!(children[1], Frag::Site("B".into())),
            _ => unreachable!(),
        }
    }

    #[test]
    fn four_derivations_of_xx() {
        let stsg = demo_stsg();
        let derivs = enumerate_derivations(&stsg, &sentence("x x"), 10_000).unwrap();
        assert_eq!(derivs.len(), 4);
        let mut probs: Vec<BigRational> = derivs.iter().map(|d| d.prob.clone()).collect();
        probs.sort();
        assert_eq!(probs, vec![ratio(2, 9), ratio(2, 9), ratio(2, 9), ratio(3, 9)]);
        let total: BigRational = derivs.iter().map(|d| &d.prob).sum();
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn empty_grammar_has_no_derivations() {
        let stsg = ExplicitStsg::from_text("", "S").unwrap();
        assert_eq!(enumerate_derivations(&stsg, &sentence("x"), 100).unwrap(), vec![]);
    }

    #[test]
    fn tree_distribution_of_xx() {
        let stsg = demo_stsg();
        let derivs = enumerate_derivations(&stsg, &sentence("x x"), 10_000).unwrap();
        let dist = tree_distribution(&derivs);
        let by_form: BTreeMap<String, BigRational> =
            dist.iter().map(|(t, p)| (t.to_string(), p.clone())).collect();
        assert_eq!(
            by_form,
            BTreeMap::from([
                ("(S (A x) (C x))".to_string(), ratio(3, 9)),
                ("(S (A x) (D x))".to_string(), ratio(2, 9)),
                ("(S (E x) (B x))".to_string(), ratio(4, 9)),
            ])
        );
    }

    #[test]
    fn posteriors_of_xx() {
        let stsg = demo_stsg();
        let g = oracle_posteriors(&stsg, &sentence("x x"), 10_000).unwrap();
        assert_eq!(g[&(1, 2, "S".to_string())], BigRational::one());
        assert_eq!(g[&(1, 1, "A".to_string())], ratio(5, 9));
        assert_eq!(g[&(2, 2, "B".to_string())], ratio(4, 9));
        assert_eq!(g[&(1, 1, "E".to_string())], ratio(4, 9));
        assert_eq!(g[&(2, 2, "C".to_string())], ratio(3, 9));
        assert_eq!(g[&(2, 2, "D".to_string())], ratio(2, 9));
    }

    #[test]
    fn single_tree_grammar_posteriors_are_one() {
        let stsg = extract_all_subtrees(&[synth::demo_tree()], true, 1_000_000).unwrap();
        let words = synth::demo_tree().terminals();
        let g = oracle_posteriors(&stsg, &words, 1_000_000).unwrap();
        for (s, t, label) in synth::demo_tree().spans() {
            assert_eq!(g[&(s, t, label)], BigRational::one());
        }
    }

    #[test]
    fn mpd_and_mpp_diverge_on_the_demo_grammar() {
        let stsg = demo_stsg();
        let mpd = oracle_mpd(&stsg, &sentence("x x"), 10_000).unwrap();
        assert_eq!(mpd.tree.to_string(), "(S (A x) (C x))");
        assert_eq!(mpd.prob, ratio(3, 9));
        let (mpp, p) = oracle_mpp(&stsg, &sentence("x x"), 10_000).unwrap();
        assert_eq!(mpp.to_string(), "(S (E x) (B x))");
        assert_eq!(p, ratio(4, 9));
    }

    #[test]
    fn singleton_grammar_mpd_equals_mpp() {
        let stsg = ExplicitStsg::from_text("1 (A x)", "A").unwrap();
        let mpd = oracle_mpd(&stsg, &sentence("x"), 100).unwrap();
        let (mpp, p) = oracle_mpp(&stsg, &sentence("x"), 100).unwrap();
        assert_eq!(mpd.tree, mpp);
        assert_eq!(p, BigRational::one());
        assert!(matches!(
            oracle_mpd(&stsg, &sentence("y"), 100),
            Err(StsgError::NoParse)
        ));
    }

    #[test]
    fn unmerged_mode_preserves_tree_distribution() {
        // Counts kept separate change derivation probabilities but not
        // the per-tree mass.
        let corpus = vec![synth::demo_tree(), synth::demo_tree()];
        let merged = extract_all_subtrees(&corpus, true, 1_000_000).unwrap();
        let unmerged = extract_all_subtrees(&corpus, false, 1_000_000).unwrap();
        assert_eq!(unmerged.fragment_count(), 20);
        let words = synth::demo_tree().terminals();
        let dm = tree_distribution(&enumerate_derivations(&merged, &words, 100_000).unwrap());
        let du = tree_distribution(&enumerate_derivations(&unmerged, &words, 100_000).unwrap());
        assert_eq!(dm, du);
    }

    #[test]
    fn unmerged_count_matches_product_formula() {
        let corpus = [synth::demo_tree()];
        let unmerged = extract_all_subtrees(&corpus, false, 1_000_000).unwrap();
        let addressed = crate::reduction::assign_addresses(&corpus).unwrap();
        let counts = crate::reduction::count_subtrees(&addressed);
        let mut by_label: BTreeMap<String, usize> = BTreeMap::new();
        for t in &unmerged.trees {
            *by_label.entry(t.root().to_string()).or_insert(0) += 1;
        }
        for (label, total) in &counts.per_label {
            assert_eq!(BigInt::from(by_label[label]), BigInt::from(total.clone()));
        }
    }

    #[test]
    fn normalization_holds_per_root() {
        let mut rng = crate::rng::seeded(31, 0);
        for _ in 0..20 {
            let corpus = synth::random_binary_corpus(&mut rng, 2, false);
            let stsg = extract_all_subtrees(&corpus, true, 1_000_000).unwrap();
            let mut mass: BTreeMap<&str, BigRational> = BTreeMap::new();
            for i in 0..stsg.fragment_count() {
                *mass
                    .entry(stsg.trees[i].root())
                    .or_insert_with(BigRational::zero) += stsg.probability(i);
            }
            for (_, m) in mass {
                assert_eq!(m, BigRational::one());
            }
        }
    }
}
