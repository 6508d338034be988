//! CKY-style inside/outside computation on the reduced grammar:
//! constituent posteriors, max-probability derivations, and exact
//! conditional derivation sampling.
//!
//! Reduced-grammar probabilities like `1/a_j` underflow double precision
//! on realistic corpora, so every chart cell stores mantissas plus one
//! shared base-2 exponent, renormalized so the largest mantissa sits in
//! `[0.5, 1)`. Scale factors are exact powers of two, so rescaling adds no
//! rounding error.

use std::ops::Add;

use num_traits::Zero;
use rand_core::RngCore;
use thiserror::Error;

use crate::pcfg::{DerivChild, DerivTree, Pcfg, Rhs, SymbolId, TermId};
use crate::rng;
use crate::tree::Tree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChartError {
    #[error("the sentence has no parse under the grammar")]
    NoParse,
    #[error("zero-length sentence")]
    ZeroLength,
}

const NO_EXP: i64 = i64::MIN;

/// 2^d as an exact f64 (0 below the subnormal range).
fn pow2(d: i64) -> f64 {
    if d < -1074 {
        0.0
    } else if d < -1022 {
        f64::from_bits(1u64 << (d + 1074) as u64)
    } else if d <= 1023 {
        f64::from_bits(((d + 1023) as u64) << 52)
    } else {
        f64::INFINITY
    }
}

/// floor(log2(x)) for x > 0.
fn floor_log2(x: f64) -> i64 {
    if x >= f64::MIN_POSITIVE {
        (((x.to_bits() >> 52) & 0x7ff) as i64) - 1023
    } else {
        x.log2().floor() as i64
    }
}

/// Triangular table of per-cell mantissa arrays with one shared exponent
/// per cell. An empty cell carries `NO_EXP`.
struct Cells {
    n: usize,
    syms: usize,
    m: Vec<f64>,
    exp: Vec<i64>,
}

impl Cells {
    fn new(n: usize, syms: usize) -> Cells {
        Cells { n, syms, m: vec![0.0; n * n * syms], exp: vec![NO_EXP; n * n] }
    }

    fn cell(&self, s: usize, t: usize) -> usize {
        s * self.n + t
    }

    fn slice(&self, s: usize, t: usize) -> &[f64] {
        let c = self.cell(s, t) * self.syms;
        &self.m[c..c + self.syms]
    }

    fn exp(&self, s: usize, t: usize) -> i64 {
        self.exp[self.cell(s, t)]
    }

    fn store(&mut self, s: usize, t: usize, acc: &[f64], exp: i64) {
        let c = self.cell(s, t) * self.syms;
        self.m[c..c + self.syms].copy_from_slice(acc);
        let cell = self.cell(s, t);
        self.exp[cell] = exp;
        // renormalize the largest mantissa into [0.5, 1)
        let mx = self.m[c..c + self.syms].iter().cloned().fold(0.0f64, f64::max);
        if mx == 0.0 {
            self.exp[cell] = NO_EXP;
            return;
        }
        let k = floor_log2(mx) + 1;
        if k != 0 {
            let factor = pow2(-k);
            for v in &mut self.m[c..c + self.syms] {
                *v *= factor;
            }
            self.exp[cell] += k;
        }
    }

    /// Descaled value; 0 for empty cells.
    fn value(&self, s: usize, t: usize, x: SymbolId) -> f64 {
        let e = self.exp(s, t);
        if e == NO_EXP {
            0.0
        } else {
            self.slice(s, t)[x.0 as usize] * pow2(e)
        }
    }
}

/// Rules partitioned by shape, preserving canonical rule indices.
struct View {
    nn: Vec<(u32, u32, u32, f64, u32)>,
    nt: Vec<(u32, u32, u32, f64, u32)>,
    tn: Vec<(u32, u32, u32, f64, u32)>,
    tt: Vec<(u32, u32, u32, f64, u32)>,
    lex: Vec<(u32, u32, f64, u32)>,
}

impl View {
    fn build(g: &Pcfg) -> View {
        let mut v = View { nn: vec![], nt: vec![], tn: vec![], tt: vec![], lex: vec![] };
        for (i, r) in g.rules.iter().enumerate() {
            let i = i as u32;
            match r.rhs {
                Rhs::Binary(a, b) => v.nn.push((r.lhs.0, a.0, b.0, r.prob, i)),
                Rhs::NontermTerm(a, t) => v.nt.push((r.lhs.0, a.0, t.0, r.prob, i)),
                Rhs::TermNonterm(t, a) => v.tn.push((r.lhs.0, t.0, a.0, r.prob, i)),
                Rhs::Terms(t, u) => v.tt.push((r.lhs.0, t.0, u.0, r.prob, i)),
                Rhs::Lexical(t) => v.lex.push((r.lhs.0, t.0, r.prob, i)),
            }
        }
        v
    }
}

/// Inside probabilities e(s,t,X) for one sentence.
pub struct InsideChart<'g> {
    g: &'g Pcfg,
    view: View,
    words: Vec<Option<TermId>>,
    n: usize,
    e: Cells,
}

impl<'g> InsideChart<'g> {
    /// Run the inside recursion. Unknown terminals are allowed; they
    /// simply leave their cells empty, so unparsable sentences end with
    /// total probability 0 rather than an error.
    pub fn build(g: &'g Pcfg, sentence: &[String]) -> Result<InsideChart<'g>, ChartError> {
        let n = sentence.len();
        if n == 0 {
            return Err(ChartError::ZeroLength);
        }
        let words: Vec<Option<TermId>> = sentence.iter().map(|w| g.lookup_terminal(w)).collect();
        let view = View::build(g);
        let syms = g.symbol_count();
        let mut e = Cells::new(n, syms);
        let mut acc = vec![0.0f64; syms];

        for len in 1..=n {
            for s in 0..=(n - len) {
                let t = s + len - 1;
                let mut cx = NO_EXP;
                if len == 1 && words[s].is_some() && !view.lex.is_empty() {
                    cx = cx.max(0);
                }
                if len == 2 && words[s].is_some() && words[t].is_some() && !view.tt.is_empty() {
                    cx = cx.max(0);
                }
                if len >= 2 {
                    if words[t].is_some() && !view.nt.is_empty() && e.exp(s, t - 1) != NO_EXP {
                        cx = cx.max(e.exp(s, t - 1));
                    }
                    if words[s].is_some() && !view.tn.is_empty() && e.exp(s + 1, t) != NO_EXP {
                        cx = cx.max(e.exp(s + 1, t));
                    }
                    if !view.nn.is_empty() {
                        for r in s..t {
                            let (x1, x2) = (e.exp(s, r), e.exp(r + 1, t));
                            if x1 != NO_EXP && x2 != NO_EXP {
                                cx = cx.max(x1 + x2);
                            }
                        }
                    }
                }
                if cx == NO_EXP {
                    continue;
                }
                acc.fill(0.0);
                if len == 1 {
                    let w = words[s].unwrap().0;
                    for &(lhs, term, p, _) in &view.lex {
                        if term == w {
                            acc[lhs as usize] += p;
                        }
                    }
                }
                if len == 2 {
                    if let (Some(w1), Some(w2)) = (words[s], words[t]) {
                        let factor = pow2(-cx);
                        if factor > 0.0 {
                            for &(lhs, t1, t2, p, _) in &view.tt {
                                if t1 == w1.0 && t2 == w2.0 {
                                    acc[lhs as usize] += p * factor;
                                }
                            }
                        }
                    }
                }
                if len >= 2 {
                    if let Some(w) = words[t] {
                        if e.exp(s, t - 1) != NO_EXP {
                            let factor = pow2(e.exp(s, t - 1) - cx);
                            if factor > 0.0 {
                                let left = e.slice(s, t - 1);
                                for &(lhs, a, term, p, _) in &view.nt {
                                    if term == w.0 {
                                        acc[lhs as usize] += p * left[a as usize] * factor;
                                    }
                                }
                            }
                        }
                    }
                    if let Some(w) = words[s] {
                        if e.exp(s + 1, t) != NO_EXP {
                            let factor = pow2(e.exp(s + 1, t) - cx);
                            if factor > 0.0 {
                                let right = e.slice(s + 1, t);
                                for &(lhs, term, a, p, _) in &view.tn {
                                    if term == w.0 {
                                        acc[lhs as usize] += p * right[a as usize] * factor;
                                    }
                                }
                            }
                        }
                    }
                    for r in s..t {
                        let (x1, x2) = (e.exp(s, r), e.exp(r + 1, t));
                        if x1 == NO_EXP || x2 == NO_EXP {
                            continue;
                        }
                        let factor = pow2(x1 + x2 - cx);
                        if factor == 0.0 {
                            continue;
                        }
                        let left = e.slice(s, r);
                        let right = e.slice(r + 1, t);
                        for &(lhs, a, b, p, _) in &view.nn {
                            let v = left[a as usize] * right[b as usize];
                            if v > 0.0 {
                                acc[lhs as usize] += p * v * factor;
                            }
                        }
                    }
                }
                e.store(s, t, &acc, cx);
            }
        }
        Ok(InsideChart { g, view, words, n, e })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grammar(&self) -> &Pcfg {
        self.g
    }

    /// Inside probability for a 1-based inclusive span and symbol name.
    pub fn e(&self, s: usize, t: usize, symbol: &str) -> f64 {
        match self.g.lookup_symbol(symbol) {
            Some(id) => self.e.value(s - 1, t - 1, id),
            None => 0.0,
        }
    }

    fn sentence_prob_scaled(&self) -> (f64, i64) {
        let x = self.e.exp(0, self.n - 1);
        if x == NO_EXP {
            return (0.0, NO_EXP);
        }
        let root = self.e.slice(0, self.n - 1);
        let m: f64 = self.g.start.iter().map(|(sym, p)| p * root[sym.0 as usize]).sum();
        (m, x)
    }

    /// Total sentence probability under the start distribution.
    pub fn sentence_prob(&self) -> f64 {
        let (m, x) = self.sentence_prob_scaled();
        if x == NO_EXP {
            0.0
        } else {
            m * pow2(x)
        }
    }

    /// True when at least one derivation yields the sentence (checked on
    /// the scaled mantissa, so extreme underflow cannot mask a parse).
    pub fn has_parse(&self) -> bool {
        self.sentence_prob_scaled().0 > 0.0
    }

    /// Run the outside recursion on top of this chart.
    pub fn outside(&self) -> OutsideChart<'_, 'g> {
        let syms = self.g.symbol_count();
        let n = self.n;
        let mut f = Cells::new(n, syms);
        let mut acc = vec![0.0f64; syms];

        acc.fill(0.0);
        for (sym, p) in &self.g.start {
            acc[sym.0 as usize] = *p;
        }
        f.store(0, n - 1, &acc, 0);

        for len in (1..n).rev() {
            for s in 0..=(n - len) {
                let t = s + len - 1;
                let mut cx = NO_EXP;
                if !self.view.nn.is_empty() {
                    for t2 in t + 1..n {
                        if f.exp(s, t2) != NO_EXP && self.e.exp(t + 1, t2) != NO_EXP {
                            cx = cx.max(f.exp(s, t2) + self.e.exp(t + 1, t2));
                        }
                    }
                    for s2 in 0..s {
                        if f.exp(s2, t) != NO_EXP && self.e.exp(s2, s - 1) != NO_EXP {
                            cx = cx.max(f.exp(s2, t) + self.e.exp(s2, s - 1));
                        }
                    }
                }
                if !self.view.nt.is_empty()
                    && t + 1 < n
                    && self.words[t + 1].is_some()
                    && f.exp(s, t + 1) != NO_EXP
                {
                    cx = cx.max(f.exp(s, t + 1));
                }
                if !self.view.tn.is_empty()
                    && s >= 1
                    && self.words[s - 1].is_some()
                    && f.exp(s - 1, t) != NO_EXP
                {
                    cx = cx.max(f.exp(s - 1, t));
                }
                if cx == NO_EXP {
                    continue;
                }
                acc.fill(0.0);
                for t2 in t + 1..n {
                    if f.exp(s, t2) == NO_EXP || self.e.exp(t + 1, t2) == NO_EXP {
                        continue;
                    }
                    let factor = pow2(f.exp(s, t2) + self.e.exp(t + 1, t2) - cx);
                    if factor == 0.0 {
                        continue;
                    }
                    let fp = f.slice(s, t2);
                    let sib = self.e.slice(t + 1, t2);
                    for &(a, l, r, p, _) in &self.view.nn {
                        let v = fp[a as usize] * sib[r as usize];
                        if v > 0.0 {
                            acc[l as usize] += p * v * factor;
                        }
                    }
                }
                for s2 in 0..s {
                    if f.exp(s2, t) == NO_EXP || self.e.exp(s2, s - 1) == NO_EXP {
                        continue;
                    }
                    let factor = pow2(f.exp(s2, t) + self.e.exp(s2, s - 1) - cx);
                    if factor == 0.0 {
                        continue;
                    }
                    let fp = f.slice(s2, t);
                    let sib = self.e.slice(s2, s - 1);
                    for &(a, l, r, p, _) in &self.view.nn {
                        let v = fp[a as usize] * sib[l as usize];
                        if v > 0.0 {
                            acc[r as usize] += p * v * factor;
                        }
                    }
                }
                if t + 1 < n && f.exp(s, t + 1) != NO_EXP {
                    if let Some(w) = self.words[t + 1] {
                        let factor = pow2(f.exp(s, t + 1) - cx);
                        if factor > 0.0 {
                            let fp = f.slice(s, t + 1);
                            for &(a, l, term, p, _) in &self.view.nt {
                                if term == w.0 {
                                    acc[l as usize] += p * fp[a as usize] * factor;
                                }
                            }
                        }
                    }
                }
                if s >= 1 && f.exp(s - 1, t) != NO_EXP {
                    if let Some(w) = self.words[s - 1] {
                        let factor = pow2(f.exp(s - 1, t) - cx);
                        if factor > 0.0 {
                            let fp = f.slice(s - 1, t);
                            for &(a, term, r, p, _) in &self.view.tn {
                                if term == w.0 {
                                    acc[r as usize] += p * fp[a as usize] * factor;
                                }
                            }
                        }
                    }
                }
                f.store(s, t, &acc, cx);
            }
        }
        OutsideChart { inside: self, f }
    }

    /// Draw derivations from the exact conditional distribution given the
    /// sentence, returning exterior trees. Deterministic for a fixed seed.
    pub fn sample_derivations(&self, count: usize, seed: u64) -> Result<Vec<Tree>, ChartError> {
        let (m_tot, _) = self.sentence_prob_scaled();
        if m_tot <= 0.0 {
            return Err(ChartError::NoParse);
        }
        let mut rng = rng::seeded(seed, 0);
        let root = self.e.slice(0, self.n - 1);
        let start_weights: Vec<f64> =
            self.g.start.iter().map(|(sym, p)| p * root[sym.0 as usize]).collect();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let pick = rng::weighted(&mut rng, &start_weights);
            let sym = self.g.start[pick].0;
            let deriv = self.sample_cell(0, self.n - 1, sym, &mut rng);
            out.push(self.g.erase_interior(&deriv));
        }
        Ok(out)
    }

    fn sample_cell(&self, s: usize, t: usize, x: SymbolId, rng: &mut impl RngCore) -> DerivTree {
        // options carry (mantissa, exponent, rule index, split)
        let mut options: Vec<(f64, i64, u32, usize)> = Vec::new();
        let len = t - s + 1;
        if len == 1 {
            if let Some(w) = self.words[s] {
                for &(lhs, term, p, idx) in &self.view.lex {
                    if lhs == x.0 && term == w.0 {
                        options.push((p, 0, idx, 0));
                    }
                }
            }
        }
        if len == 2 {
            if let (Some(w1), Some(w2)) = (self.words[s], self.words[t]) {
                for &(lhs, t1, t2, p, idx) in &self.view.tt {
                    if lhs == x.0 && t1 == w1.0 && t2 == w2.0 {
                        options.push((p, 0, idx, 0));
                    }
                }
            }
        }
        if len >= 2 {
            if let Some(w) = self.words[t] {
                if self.e.exp(s, t - 1) != NO_EXP {
                    let left = self.e.slice(s, t - 1);
                    for &(lhs, a, term, p, idx) in &self.view.nt {
                        if lhs == x.0 && term == w.0 && left[a as usize] > 0.0 {
                            options.push((p * left[a as usize], self.e.exp(s, t - 1), idx, 0));
                        }
                    }
                }
            }
            if let Some(w) = self.words[s] {
                if self.e.exp(s + 1, t) != NO_EXP {
                    let right = self.e.slice(s + 1, t);
                    for &(lhs, term, a, p, idx) in &self.view.tn {
                        if lhs == x.0 && term == w.0 && right[a as usize] > 0.0 {
                            options.push((p * right[a as usize], self.e.exp(s + 1, t), idx, 0));
                        }
                    }
                }
            }
            for r in s..t {
                let (x1, x2) = (self.e.exp(s, r), self.e.exp(r + 1, t));
                if x1 == NO_EXP || x2 == NO_EXP {
                    continue;
                }
                let left = self.e.slice(s, r);
                let right = self.e.slice(r + 1, t);
                for &(lhs, a, b, p, idx) in &self.view.nn {
                    if lhs != x.0 {
                        continue;
                    }
                    let v = left[a as usize] * right[b as usize];
                    if v > 0.0 {
                        options.push((p * v, x1 + x2, idx, r));
                    }
                }
            }
        }
        debug_assert!(!options.is_empty(), "sampling reached an empty cell");
        let mx = options.iter().map(|o| o.1).max().unwrap();
        let weights: Vec<f64> = options.iter().map(|&(m, x, _, _)| m * pow2(x - mx)).collect();
        let pick = rng::weighted(rng, &weights);
        let (_, _, rule_idx, split) = options[pick];
        let rule = &self.g.rules[rule_idx as usize];
        let children = match rule.rhs {
            Rhs::Lexical(w) => vec![DerivChild::Leaf(w)],
            Rhs::Terms(w1, w2) => vec![DerivChild::Leaf(w1), DerivChild::Leaf(w2)],
            Rhs::NontermTerm(a, w) => vec![
                DerivChild::Node(self.sample_cell(s, t - 1, a, rng)),
                DerivChild::Leaf(w),
            ],
            Rhs::TermNonterm(w, a) => vec![
                DerivChild::Leaf(w),
                DerivChild::Node(self.sample_cell(s + 1, t, a, rng)),
            ],
            Rhs::Binary(a, b) => vec![
                DerivChild::Node(self.sample_cell(s, split, a, rng)),
                DerivChild::Node(self.sample_cell(split + 1, t, b, rng)),
            ],
        };
        DerivTree { sym: x, children }
    }
}

/// Outside probabilities f(s,t,X) on top of an inside chart.
pub struct OutsideChart<'a, 'g> {
    inside: &'a InsideChart<'g>,
    f: Cells,
}

impl OutsideChart<'_, '_> {
    /// Outside probability for a 1-based inclusive span and symbol name.
    pub fn f(&self, s: usize, t: usize, symbol: &str) -> f64 {
        match self.inside.g.lookup_symbol(symbol) {
            Some(id) => self.f.value(s - 1, t - 1, id),
            None => 0.0,
        }
    }

    /// Constituent posteriors g(s,t,X) = f·e / e(1,n,S), aggregated per
    /// base label (each interior variant's mass added to its base).
    pub fn posteriors(&self) -> Result<PosteriorMatrix<f64>, ChartError> {
        let ins = self.inside;
        let (m_tot, x_tot) = ins.sentence_prob_scaled();
        if m_tot <= 0.0 {
            return Err(ChartError::NoParse);
        }
        let labels = ins.g.base_labels();
        let mut pm = PosteriorMatrix::new(ins.n, labels.clone());
        let label_of: Vec<usize> = ins
            .g
            .symbols()
            .map(|(_, sym)| labels.binary_search(&sym.base).expect("base label present"))
            .collect();
        for s in 0..ins.n {
            for t in s..ins.n {
                let (xe, xf) = (ins.e.exp(s, t), self.f.exp(s, t));
                if xe == NO_EXP || xf == NO_EXP {
                    continue;
                }
                let scale = pow2(xe + xf - x_tot);
                if scale == 0.0 {
                    continue;
                }
                let es = ins.e.slice(s, t);
                let fs = self.f.slice(s, t);
                for i in 0..es.len() {
                    let v = es[i] * fs[i];
                    if v > 0.0 {
                        pm.add_idx(s, t, label_of[i], v / m_tot * scale);
                    }
                }
            }
        }
        Ok(pm)
    }
}

/// Convenience: inside, outside, posteriors in one call.
pub fn posterior_matrix(g: &Pcfg, sentence: &[String]) -> Result<PosteriorMatrix<f64>, ChartError> {
    InsideChart::build(g, sentence)?.outside().posteriors()
}

/// Aggregated constituent posteriors per span and base label. Generic in
/// the number type so the exact-rational oracle path and the float chart
/// path share the downstream dynamic program.
#[derive(Debug, Clone)]
pub struct PosteriorMatrix<T> {
    n: usize,
    labels: Vec<String>,
    cells: Vec<Vec<T>>,
}

impl<T: Clone + Zero + Add<Output = T> + PartialOrd> PosteriorMatrix<T> {
    pub fn new(n: usize, mut labels: Vec<String>) -> Self {
        labels.sort();
        labels.dedup();
        PosteriorMatrix { n, cells: vec![vec![T::zero(); labels.len()]; n * n], labels }
    }

    fn cell(&self, s: usize, t: usize) -> usize {
        s * self.n + t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn add_idx(&mut self, s: usize, t: usize, label: usize, v: T) {
        let c = self.cell(s, t);
        let cur = self.cells[c][label].clone();
        self.cells[c][label] = cur + v;
    }

    /// Add mass for a 1-based inclusive span.
    pub fn add(&mut self, s: usize, t: usize, label: &str, v: T) {
        if let Ok(i) = self.labels.binary_search_by(|l| l.as_str().cmp(label)) {
            self.add_idx(s - 1, t - 1, i, v);
        }
    }

    /// Aggregated posterior for a 1-based inclusive span; zero for labels
    /// the grammar does not know.
    pub fn get(&self, s: usize, t: usize, label: &str) -> T {
        match self.labels.binary_search_by(|l| l.as_str().cmp(label)) {
            Ok(i) => self.cells[self.cell(s - 1, t - 1)][i].clone(),
            Err(_) => T::zero(),
        }
    }

    /// Best label for a 1-based span: the maximal value, ties broken
    /// toward the lexicographically smallest label. `None` when every
    /// label has zero mass.
    pub fn best(&self, s: usize, t: usize) -> Option<(&str, T)> {
        let row = &self.cells[self.cell(s - 1, t - 1)];
        let mut best: Option<(usize, &T)> = None;
        for (i, v) in row.iter().enumerate() {
            if v > &T::zero() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (self.labels[i].as_str(), v.clone()))
    }

    /// Iterate all stored values of a 1-based span.
    pub fn row(&self, s: usize, t: usize) -> impl Iterator<Item = (&str, &T)> {
        let row = &self.cells[self.cell(s - 1, t - 1)];
        self.labels.iter().map(|l| l.as_str()).zip(row.iter())
    }
}

/// Max-probability derivation of the reduced grammar via max-product
/// CKY. Note the distinction: summed tree mass is preserved by the
/// reduction, but the argmax over reduced-grammar derivations may differ
/// from the argmax over merged-count subtree-grammar derivations. Ties
/// keep the earliest candidate in a fixed order: lexical,
/// double-terminal, terminal-anchored, then binary rules by canonical
/// index with ascending split.
pub fn viterbi_derivation(g: &Pcfg, sentence: &[String]) -> Result<(DerivTree, f64), ChartError> {
    let n = sentence.len();
    if n == 0 {
        return Err(ChartError::ZeroLength);
    }
    let words: Vec<Option<TermId>> = sentence.iter().map(|w| g.lookup_terminal(w)).collect();
    let view = View::build(g);
    let syms = g.symbol_count();
    let mut best = Cells::new(n, syms);
    let mut bp: Vec<Option<(u32, u32)>> = vec![None; n * n * syms];
    let mut acc = vec![0.0f64; syms];
    let mut acc_bp: Vec<Option<(u32, u32)>> = vec![None; syms];

    for len in 1..=n {
        for s in 0..=(n - len) {
            let t = s + len - 1;
            let mut cx = NO_EXP;
            if len == 1 && words[s].is_some() && !view.lex.is_empty() {
                cx = cx.max(0);
            }
            if len == 2 && words[s].is_some() && words[t].is_some() && !view.tt.is_empty() {
                cx = cx.max(0);
            }
            if len >= 2 {
                if words[t].is_some() && !view.nt.is_empty() && best.exp(s, t - 1) != NO_EXP {
                    cx = cx.max(best.exp(s, t - 1));
                }
                if words[s].is_some() && !view.tn.is_empty() && best.exp(s + 1, t) != NO_EXP {
                    cx = cx.max(best.exp(s + 1, t));
                }
                if !view.nn.is_empty() {
                    for r in s..t {
                        let (x1, x2) = (best.exp(s, r), best.exp(r + 1, t));
                        if x1 != NO_EXP && x2 != NO_EXP {
                            cx = cx.max(x1 + x2);
                        }
                    }
                }
            }
            if cx == NO_EXP {
                continue;
            }
            acc.fill(0.0);
            acc_bp.fill(None);
            let consider = |lhs: u32, v: f64, idx: u32, split: usize, acc: &mut [f64], acc_bp: &mut [Option<(u32, u32)>]| {
                if v > acc[lhs as usize] {
                    acc[lhs as usize] = v;
                    acc_bp[lhs as usize] = Some((idx, split as u32));
                }
            };
            if len == 1 {
                if let Some(w) = words[s] {
                    for &(lhs, term, p, idx) in &view.lex {
                        if term == w.0 {
                            consider(lhs, p, idx, 0, &mut acc, &mut acc_bp);
                        }
                    }
                }
            }
            if len == 2 {
                if let (Some(w1), Some(w2)) = (words[s], words[t]) {
                    let factor = pow2(-cx);
                    for &(lhs, t1, t2, p, idx) in &view.tt {
                        if t1 == w1.0 && t2 == w2.0 {
                            consider(lhs, p * factor, idx, 0, &mut acc, &mut acc_bp);
                        }
                    }
                }
            }
            if len >= 2 {
                if let Some(w) = words[t] {
                    if best.exp(s, t - 1) != NO_EXP {
                        let factor = pow2(best.exp(s, t - 1) - cx);
                        let left = best.slice(s, t - 1);
                        for &(lhs, a, term, p, idx) in &view.nt {
                            if term == w.0 && left[a as usize] > 0.0 {
                                consider(lhs, p * left[a as usize] * factor, idx, 0, &mut acc, &mut acc_bp);
                            }
                        }
                    }
                }
                if let Some(w) = words[s] {
                    if best.exp(s + 1, t) != NO_EXP {
                        let factor = pow2(best.exp(s + 1, t) - cx);
                        let right = best.slice(s + 1, t);
                        for &(lhs, term, a, p, idx) in &view.tn {
                            if term == w.0 && right[a as usize] > 0.0 {
                                consider(lhs, p * right[a as usize] * factor, idx, 0, &mut acc, &mut acc_bp);
                            }
                        }
                    }
                }
                for &(lhs, a, b, p, idx) in &view.nn {
                    for r in s..t {
                        let (x1, x2) = (best.exp(s, r), best.exp(r + 1, t));
                        if x1 == NO_EXP || x2 == NO_EXP {
                            continue;
                        }
                        let factor = pow2(x1 + x2 - cx);
                        if factor == 0.0 {
                            continue;
                        }
                        let v = best.slice(s, r)[a as usize] * best.slice(r + 1, t)[b as usize];
                        if v > 0.0 {
                            consider(lhs, p * v * factor, idx, r, &mut acc, &mut acc_bp);
                        }
                    }
                }
            }
            // store acc; mantissa renormalization must not disturb the
            // backpointers, which are positional
            best.store(s, t, &acc, cx);
            let base = best.cell(s, t) * syms;
            bp[base..base + syms].clone_from_slice(&acc_bp);
        }
    }

    let root_exp = best.exp(0, n - 1);
    if root_exp == NO_EXP {
        return Err(ChartError::NoParse);
    }
    let root = best.slice(0, n - 1);
    let mut pick: Option<(SymbolId, f64)> = None;
    for (sym, p) in &g.start {
        let v = p * root[sym.0 as usize];
        if v > 0.0 && pick.is_none_or(|(_, b)| v > b) {
            pick = Some((*sym, v));
        }
    }
    let (start_sym, v) = pick.ok_or(ChartError::NoParse)?;

    fn rebuild(
        g: &Pcfg,
        bp: &[Option<(u32, u32)>],
        n: usize,
        syms: usize,
        s: usize,
        t: usize,
        x: SymbolId,
    ) -> DerivTree {
        let ptr = bp[(s * n + t) * syms + x.0 as usize].expect("backpointer present");
        let rule = &g.rules[ptr.0 as usize];
        let children = match rule.rhs {
            Rhs::Lexical(w) => vec![DerivChild::Leaf(w)],
            Rhs::Terms(w1, w2) => vec![DerivChild::Leaf(w1), DerivChild::Leaf(w2)],
            Rhs::NontermTerm(a, w) => vec![
                DerivChild::Node(rebuild(g, bp, n, syms, s, t - 1, a)),
                DerivChild::Leaf(w),
            ],
            Rhs::TermNonterm(w, a) => vec![
                DerivChild::Leaf(w),
                DerivChild::Node(rebuild(g, bp, n, syms, s + 1, t, a)),
            ],
            Rhs::Binary(a, b) => {
                let r = ptr.1 as usize;
                vec![
                    DerivChild::Node(rebuild(g, bp, n, syms, s, r, a)),
                    DerivChild::Node(rebuild(g, bp, n, syms, r + 1, t, b)),
                ]
            }
        };
        DerivTree { sym: x, children }
    }

    let tree = rebuild(g, &bp, n, syms, 0, n - 1, start_sym);
    Ok((tree, v * pow2(root_exp)))
}

/// The modal tree of a non-empty sample multiset; ties break toward the
/// lexicographically smallest written form.
pub fn monte_carlo_parse(samples: &[Tree]) -> Tree {
    assert!(!samples.is_empty(), "monte_carlo_parse requires at least one sample");
    let mut counts: std::collections::BTreeMap<String, (usize, &Tree)> =
        std::collections::BTreeMap::new();
    for t in samples {
        counts
            .entry(t.to_string())
            .and_modify(|(c, _)| *c += 1)
            .or_insert((1, t));
    }
    let mut best: Option<(usize, &Tree)> = None;
    for (c, t) in counts.values() {
        if best.is_none_or(|(bc, _)| *c > bc) {
            best = Some((*c, *t));
        }
    }
    best.unwrap().1.clone()
}
