//! Brute-force enumeration used to validate the fast paths: explicit
//! PCFG parse-forest expansion and exhaustive binary bracketings. These
//! stay independent of the chart implementation on purpose.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chart::PosteriorMatrix;
use crate::maxcons::Score;
use crate::pcfg::{DerivChild, DerivTree, Pcfg, Rhs, SymbolId};
use crate::tree::Tree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExhaustiveError {
    #[error("parse enumeration exceeded the cap")]
    CapExceeded,
}

/// Enumerate every derivation of the sentence with its probability
/// (start weight included).
pub fn enumerate_pcfg_derivations(
    g: &Pcfg,
    sentence: &[String],
    cap: usize,
) -> Result<Vec<(DerivTree, f64)>, ExhaustiveError> {
    let n = sentence.len();
    let words: Vec<Option<crate::pcfg::TermId>> =
        sentence.iter().map(|w| g.lookup_terminal(w)).collect();

    struct Enumerator<'g> {
        g: &'g Pcfg,
        words: Vec<Option<crate::pcfg::TermId>>,
        memo: BTreeMap<(u32, usize, usize), std::rc::Rc<Vec<(DerivTree, f64)>>>,
        produced: usize,
        cap: usize,
    }

    impl Enumerator<'_> {
        fn parses(
            &mut self,
            x: SymbolId,
            s: usize,
            t: usize,
        ) -> Result<std::rc::Rc<Vec<(DerivTree, f64)>>, ExhaustiveError> {
            if let Some(hit) = self.memo.get(&(x.0, s, t)) {
                return Ok(hit.clone());
            }
            let mut out: Vec<(DerivTree, f64)> = Vec::new();
            let len = t - s + 1;
            let rules: Vec<(Rhs, f64)> = self
                .g
                .rules
                .iter()
                .filter(|r| r.lhs == x)
                .map(|r| (r.rhs, r.prob))
                .collect();
            for (rhs, p) in rules {
                match rhs {
                    Rhs::Lexical(w) => {
                        if len == 1 && self.words[s] == Some(w) {
                            out.push((
                                DerivTree { sym: x, children: vec![DerivChild::Leaf(w)] },
                                p,
                            ));
                        }
                    }
                    Rhs::Terms(w1, w2) => {
                        if len == 2 && self.words[s] == Some(w1) && self.words[t] == Some(w2) {
                            out.push((
                                DerivTree {
                                    sym: x,
                                    children: vec![DerivChild::Leaf(w1), DerivChild::Leaf(w2)],
                                },
                                p,
                            ));
                        }
                    }
                    Rhs::NontermTerm(a, w) => {
                        if len >= 2 && self.words[t] == Some(w) {
                            for (sub, q) in self.parses(a, s, t - 1)?.iter() {
                                out.push((
                                    DerivTree {
                                        sym: x,
                                        children: vec![
                                            DerivChild::Node(sub.clone()),
                                            DerivChild::Leaf(w),
                                        ],
                                    },
                                    p * q,
                                ));
                            }
                        }
                    }
                    Rhs::TermNonterm(w, a) => {
                        if len >= 2 && self.words[s] == Some(w) {
                            for (sub, q) in self.parses(a, s + 1, t)?.iter() {
                                out.push((
                                    DerivTree {
                                        sym: x,
                                        children: vec![
                                            DerivChild::Leaf(w),
                                            DerivChild::Node(sub.clone()),
                                        ],
                                    },
                                    p * q,
                                ));
                            }
                        }
                    }
                    Rhs::Binary(a, b) => {
                        for r in s..t {
                            let left = self.parses(a, s, r)?;
                            if left.is_empty() {
                                continue;
                            }
                            let right = self.parses(b, r + 1, t)?;
                            for (lt, lp) in left.iter() {
                                for (rt, rp) in right.iter() {
                                    out.push((
                                        DerivTree {
                                            sym: x,
                                            children: vec![
                                                DerivChild::Node(lt.clone()),
                                                DerivChild::Node(rt.clone()),
                                            ],
                                        },
                                        p * lp * rp,
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            self.produced += out.len();
            if self.produced > self.cap {
                return Err(ExhaustiveError::CapExceeded);
            }
            let rc = std::rc::Rc::new(out);
            self.memo.insert((x.0, s, t), rc.clone());
            Ok(rc)
        }
    }

    let mut en = Enumerator { g, words, memo: BTreeMap::new(), produced: 0, cap };
    let mut out = Vec::new();
    for (sym, weight) in &g.start {
        for (deriv, p) in en.parses(*sym, 0, n - 1)?.iter() {
            out.push((deriv.clone(), weight * p));
        }
    }
    Ok(out)
}

/// Derivation mass grouped by exterior tree. Values are not normalized:
/// they sum to the total sentence probability.
pub fn enumerate_pcfg_parses(
    g: &Pcfg,
    sentence: &[String],
    cap: usize,
) -> Result<BTreeMap<Tree, f64>, ExhaustiveError> {
    let mut grouped: BTreeMap<Tree, f64> = BTreeMap::new();
    for (deriv, p) in enumerate_pcfg_derivations(g, sentence, cap)? {
        *grouped.entry(g.erase_interior(&deriv)).or_insert(0.0) += p;
    }
    Ok(grouped)
}

/// All full binary bracketings of `1..=n` as span lists (1-based,
/// inclusive, including length-1 spans and the root).
pub fn all_binary_bracketings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(s: usize, t: usize) -> Vec<Vec<(usize, usize)>> {
        if s == t {
            return vec![vec![(s, s)]];
        }
        let mut out = Vec::new();
        for r in s..t {
            for left in rec(s, r) {
                for right in rec(r + 1, t) {
                    let mut spans = left.clone();
                    spans.extend(right.iter().cloned());
                    spans.push((s, t));
                    out.push(spans);
                }
            }
        }
        out
    }
    rec(1, n)
}

/// The maximum, over every binary bracketing, of the summed best
/// per-span posteriors. Independent check for the maxcons dynamic
/// program.
pub fn best_bracketing_score<T: Score>(g: &PosteriorMatrix<T>) -> T {
    let mut best: Option<T> = None;
    for spans in all_binary_bracketings(g.n()) {
        let mut score = T::zero();
        for (s, t) in spans {
            if let Some((_, v)) = g.best(s, t) {
                score = score + v;
            }
        }
        if best.as_ref().is_none_or(|b| &score > b) {
            best = Some(score);
        }
    }
    best.expect("n >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{assign_addresses, build_pcfg};
    use crate::synth;

    #[test]
    fn catalan_counts() {
        assert_eq!(all_binary_bracketings(1).len(), 1);
        assert_eq!(all_binary_bracketings(2).len(), 1);
        assert_eq!(all_binary_bracketings(3).len(), 2);
        assert_eq!(all_binary_bracketings(4).len(), 5);
        assert_eq!(all_binary_bracketings(8).len(), 429);
    }

    #[test]
    fn point_mass_language_enumerates_to_one_tree() {
        let g = build_pcfg(&assign_addresses(&[synth::demo_tree()]).unwrap());
        let parses =
            enumerate_pcfg_parses(&g, &synth::demo_tree().terminals(), 100_000).unwrap();
        assert_eq!(parses.len(), 1);
        let (tree, mass) = parses.into_iter().next().unwrap();
        assert_eq!(tree, synth::demo_tree());
        // six root fragments, summed by hand: 1/6 + 1/12 + 1/8 + 1/12 +
        // 1/24 + 1/16 = 9/16 (the rest of the mass covers other strings)
        assert!((mass - 0.5625).abs() < 1e-12, "{mass}");
        // and the oracle agrees
        let grammar =
            crate::stsg::extract_all_subtrees(&[synth::demo_tree()], true, 100_000).unwrap();
        let derivs = crate::stsg::enumerate_derivations(
            &grammar,
            &synth::demo_tree().terminals(),
            100_000,
        )
        .unwrap();
        let oracle_mass: f64 = derivs
            .iter()
            .map(|d| num_traits::ToPrimitive::to_f64(&d.prob).unwrap())
            .sum();
        assert!((mass - oracle_mass).abs() < 1e-12);
    }

    #[test]
    fn cap_trips() {
        let g = build_pcfg(&assign_addresses(&[synth::demo_tree()]).unwrap());
        assert_eq!(
            enumerate_pcfg_parses(&g, &synth::demo_tree().terminals(), 1).unwrap_err(),
            ExhaustiveError::CapExceeded
        );
    }
}
