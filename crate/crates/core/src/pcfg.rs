//! Weighted binary/lexical grammars over exterior and interior
//! nonterminals, shared by the reduction, the chart parser, and the
//! grammar file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::tree::{Child, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub u32);

/// A grammar nonterminal: an original treebank label (exterior) or the
/// per-node symbol `label@address` introduced by the reduction (interior).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Symbol {
    pub base: String,
    pub address: Option<usize>,
}

impl Symbol {
    pub fn is_interior(&self) -> bool {
        self.address.is_some()
    }

    pub fn name(&self) -> String {
        match self.address {
            Some(k) => format!("{}@{}", self.base, k),
            None => self.base.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rhs {
    /// Two nonterminals.
    Binary(SymbolId, SymbolId),
    /// Nonterminal then terminal.
    NontermTerm(SymbolId, TermId),
    /// Terminal then nonterminal.
    TermNonterm(TermId, SymbolId),
    /// Two terminals.
    Terms(TermId, TermId),
    /// Single terminal.
    Lexical(TermId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub lhs: SymbolId,
    pub rhs: Rhs,
    pub prob: f64,
}

/// An immutable grammar with deterministic symbol and rule order.
///
/// The start is a distribution over exterior symbols: a single entry with
/// probability 1 when the corpus has one root label, or the synthetic
/// `TOP` distribution otherwise. Start entries are applied only at the
/// whole-sentence cell and never appear as chart rules.
#[derive(Debug, Clone)]
pub struct Pcfg {
    symbols: Vec<Symbol>,
    terminals: Vec<String>,
    pub rules: Vec<Rule>,
    pub start: Vec<(SymbolId, f64)>,
    pub start_name: String,
}

impl Pcfg {
    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.0 as usize]
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> impl Iterator<Item = (SymbolId, &Symbol)> {
        self.symbols.iter().enumerate().map(|(i, s)| (SymbolId(i as u32), s))
    }

    pub fn terminal(&self, id: TermId) -> &str {
        &self.terminals[id.0 as usize]
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn lookup_symbol(&self, name: &str) -> Option<SymbolId> {
        self.symbols
            .iter()
            .position(|s| s.name() == name)
            .map(|i| SymbolId(i as u32))
    }

    pub fn lookup_terminal(&self, name: &str) -> Option<TermId> {
        self.terminals.iter().position(|t| t == name).map(|i| TermId(i as u32))
    }

    /// Exterior labels, sorted. These are the labels posteriors aggregate
    /// onto and the labels parses are written with.
    pub fn exterior_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .symbols
            .iter()
            .filter(|s| !s.is_interior())
            .map(|s| s.base.clone())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Base labels of all symbols (a superset of [`Pcfg::exterior_labels`]
    /// when some label occurs only in interior position), sorted.
    pub fn base_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.symbols.iter().map(|s| s.base.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    fn rhs_to_string(&self, rhs: &Rhs) -> String {
        match rhs {
            Rhs::Binary(a, b) => format!("{} {}", self.symbol(*a).name(), self.symbol(*b).name()),
            Rhs::NontermTerm(a, t) => format!("{} {}", self.symbol(*a).name(), self.terminal(*t)),
            Rhs::TermNonterm(t, a) => format!("{} {}", self.terminal(*t), self.symbol(*a).name()),
            Rhs::Terms(t, u) => format!("{} {}", self.terminal(*t), self.terminal(*u)),
            Rhs::Lexical(t) => self.terminal(*t).to_string(),
        }
    }

    /// One rule per line, `lhs → rhs₁ [rhs₂] <tab> probability`, preceded
    /// by a `# start` header. Rule order is deterministic, so equal
    /// grammars serialize to identical bytes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# start {}", self.start_name).unwrap();
        if self.start.len() > 1 || self.start_name != self.symbol(self.start[0].0).name() {
            for (sym, p) in &self.start {
                writeln!(out, "{} → {}\t{}", self.start_name, self.symbol(*sym).name(), p).unwrap();
            }
        }
        for rule in &self.rules {
            writeln!(
                out,
                "{} → {}\t{}",
                self.symbol(rule.lhs).name(),
                self.rhs_to_string(&rule.rhs),
                rule.prob
            )
            .unwrap();
        }
        out
    }

    /// Parse the text format written by [`Pcfg::to_text`]. A right-hand
    /// token is a nonterminal iff it occurs as some left-hand side.
    pub fn from_text(text: &str) -> Result<Pcfg, GrammarFormatError> {
        let mut start_name = None;
        let mut lines = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("start") {
                    start_name = it.next().map(str::to_string);
                }
                continue;
            }
            let (head, prob) = line
                .rsplit_once('\t')
                .ok_or(GrammarFormatError::Malformed(no + 1))?;
            let prob: f64 = prob.trim().parse().map_err(|_| GrammarFormatError::Malformed(no + 1))?;
            let mut toks = head.split_whitespace();
            let lhs = toks.next().ok_or(GrammarFormatError::Malformed(no + 1))?.to_string();
            match toks.next() {
                Some("→") | Some("->") => {}
                _ => return Err(GrammarFormatError::Malformed(no + 1)),
            }
            let rhs: Vec<String> = toks.map(str::to_string).collect();
            if rhs.is_empty() || rhs.len() > 2 {
                return Err(GrammarFormatError::Malformed(no + 1));
            }
            lines.push((no + 1, lhs, rhs, prob));
        }
        let start_name = start_name.ok_or(GrammarFormatError::MissingStart)?;

        let lhs_names: std::collections::BTreeSet<&str> =
            lines.iter().map(|(_, lhs, _, _)| lhs.as_str()).collect();
        let mut b = PcfgBuilder::new();
        let mut start_dist: Vec<(String, f64)> = Vec::new();
        let sym_of = |name: &str, b: &mut PcfgBuilder| match name.rsplit_once('@') {
            Some((base, addr)) if addr.chars().all(|c| c.is_ascii_digit()) && !base.is_empty() => {
                b.interior(base, addr.parse().unwrap())
            }
            _ => b.exterior(name),
        };
        for (no, lhs, rhs, prob) in &lines {
            let nt = |tok: &String| lhs_names.contains(tok.as_str());
            if rhs.len() == 1 && nt(&rhs[0]) {
                if *lhs != start_name {
                    return Err(GrammarFormatError::UnaryNonStart(*no));
                }
                start_dist.push((rhs[0].clone(), *prob));
                continue;
            }
            let lhs_id = sym_of(lhs, &mut b);
            let rhs = match rhs.len() {
                1 => Rhs::Lexical(b.terminal(&rhs[0])),
                _ => match (nt(&rhs[0]), nt(&rhs[1])) {
                    (true, true) => {
                        let a = sym_of(&rhs[0], &mut b);
                        let c = sym_of(&rhs[1], &mut b);
                        Rhs::Binary(a, c)
                    }
                    (true, false) => {
                        let a = sym_of(&rhs[0], &mut b);
                        Rhs::NontermTerm(a, b.terminal(&rhs[1]))
                    }
                    (false, true) => {
                        let t = b.terminal(&rhs[0]);
                        let c = sym_of(&rhs[1], &mut b);
                        Rhs::TermNonterm(t, c)
                    }
                    (false, false) => Rhs::Terms(b.terminal(&rhs[0]), b.terminal(&rhs[1])),
                },
            };
            b.rule(lhs_id, rhs, *prob);
        }
        if start_dist.is_empty() {
            start_dist.push((start_name.clone(), 1.0));
        }
        b.finish(&start_name, &start_dist)
            .map_err(|_| GrammarFormatError::UnknownStart(start_name))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GrammarFormatError {
    #[error("malformed grammar line {0}")]
    Malformed(usize),
    #[error("no '# start' header")]
    MissingStart,
    #[error("unary nonterminal rule outside the start distribution at line {0}")]
    UnaryNonStart(usize),
    #[error("start symbol {0:?} has no rules")]
    UnknownStart(String),
}

/// Accumulates symbols, terminals, and rules, then freezes them into a
/// canonically ordered [`Pcfg`]. Duplicate rules (same lhs, same rhs) are
/// merged by summing probabilities.
pub struct PcfgBuilder {
    symbols: Vec<Symbol>,
    by_name: BTreeMap<String, SymbolId>,
    terminals: Vec<String>,
    term_by_name: BTreeMap<String, TermId>,
    rules: Vec<Rule>,
}

impl Default for PcfgBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl PcfgBuilder {
    pub fn new() -> Self {
        PcfgBuilder {
            symbols: Vec::new(),
            by_name: BTreeMap::new(),
            terminals: Vec::new(),
            term_by_name: BTreeMap::new(),
            rules: Vec::new(),
        }
    }

    pub fn exterior(&mut self, label: &str) -> SymbolId {
        self.intern(Symbol { base: label.to_string(), address: None })
    }

    pub fn interior(&mut self, base: &str, address: usize) -> SymbolId {
        self.intern(Symbol { base: base.to_string(), address: Some(address) })
    }

    fn intern(&mut self, sym: Symbol) -> SymbolId {
        let name = sym.name();
        if let Some(id) = self.by_name.get(&name) {
            return *id;
        }
        let id = SymbolId(self.symbols.len() as u32);
        self.symbols.push(sym);
        self.by_name.insert(name, id);
        id
    }

    pub fn terminal(&mut self, t: &str) -> TermId {
        if let Some(id) = self.term_by_name.get(t) {
            return *id;
        }
        let id = TermId(self.terminals.len() as u32);
        self.terminals.push(t.to_string());
        self.term_by_name.insert(t.to_string(), id);
        id
    }

    pub fn rule(&mut self, lhs: SymbolId, rhs: Rhs, prob: f64) {
        self.rules.push(Rule { lhs, rhs, prob });
    }

    /// Freeze. Symbols are renumbered canonically (exteriors sorted by
    /// label, then interiors sorted by address), terminals sorted, and
    /// rules sorted by (lhs, rhs) with duplicates merged.
    pub fn finish(
        self,
        start_name: &str,
        start_dist: &[(String, f64)],
    ) -> Result<Pcfg, String> {
        let mut order: Vec<usize> = (0..self.symbols.len()).collect();
        order.sort_by_key(|&i| {
            let s = &self.symbols[i];
            (s.address.is_some(), s.base.clone(), s.address)
        });
        let mut sym_map = vec![SymbolId(0); self.symbols.len()];
        let symbols: Vec<Symbol> = order
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                sym_map[old] = SymbolId(new as u32);
                self.symbols[old].clone()
            })
            .collect();

        let mut torder: Vec<usize> = (0..self.terminals.len()).collect();
        torder.sort_by(|&a, &b| self.terminals[a].cmp(&self.terminals[b]));
        let mut term_map = vec![TermId(0); self.terminals.len()];
        let terminals: Vec<String> = torder
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                term_map[old] = TermId(new as u32);
                self.terminals[old].clone()
            })
            .collect();

        let remap = |rhs: &Rhs| match *rhs {
            Rhs::Binary(a, b) => Rhs::Binary(sym_map[a.0 as usize], sym_map[b.0 as usize]),
            Rhs::NontermTerm(a, t) => Rhs::NontermTerm(sym_map[a.0 as usize], term_map[t.0 as usize]),
            Rhs::TermNonterm(t, a) => Rhs::TermNonterm(term_map[t.0 as usize], sym_map[a.0 as usize]),
            Rhs::Terms(t, u) => Rhs::Terms(term_map[t.0 as usize], term_map[u.0 as usize]),
            Rhs::Lexical(t) => Rhs::Lexical(term_map[t.0 as usize]),
        };
        fn rhs_key(rhs: &Rhs) -> (u8, u32, u32) {
            match *rhs {
                Rhs::Lexical(t) => (0, t.0, 0),
                Rhs::Terms(t, u) => (1, t.0, u.0),
                Rhs::TermNonterm(t, a) => (2, t.0, a.0),
                Rhs::NontermTerm(a, t) => (3, a.0, t.0),
                Rhs::Binary(a, b) => (4, a.0, b.0),
            }
        }
        let mut merged: BTreeMap<(u32, (u8, u32, u32)), Rule> = BTreeMap::new();
        for r in &self.rules {
            let lhs = sym_map[r.lhs.0 as usize];
            let rhs = remap(&r.rhs);
            merged
                .entry((lhs.0, rhs_key(&rhs)))
                .and_modify(|e| e.prob += r.prob)
                .or_insert(Rule { lhs, rhs, prob: r.prob });
        }
        let rules: Vec<Rule> = merged.into_values().collect();

        let start = start_dist
            .iter()
            .map(|(name, p)| {
                symbols
                    .iter()
                    .position(|s| s.name() == *name)
                    .map(|i| (SymbolId(i as u32), *p))
                    .ok_or_else(|| format!("start symbol {name:?} has no rules"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if start.is_empty() {
            return Err("empty start distribution".to_string());
        }

        Ok(Pcfg {
            symbols,
            terminals,
            rules,
            start,
            start_name: start_name.to_string(),
        })
    }
}

/// A derivation tree of the grammar: nodes are grammar symbols (possibly
/// interior), leaves are terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTree {
    pub sym: SymbolId,
    pub children: Vec<DerivChild>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DerivChild {
    Node(DerivTree),
    Leaf(TermId),
}

impl Pcfg {
    /// Replace every interior symbol by its base label; structure is
    /// unchanged.
    pub fn erase_interior(&self, deriv: &DerivTree) -> Tree {
        Tree::new(
            self.symbol(deriv.sym).base.clone(),
            deriv
                .children
                .iter()
                .map(|c| match c {
                    DerivChild::Node(t) => Child::Node(self.erase_interior(t)),
                    DerivChild::Leaf(t) => Child::Leaf(self.terminal(*t).to_string()),
                })
                .collect(),
        )
    }

    /// Render a derivation with full symbol names (`label@k` for interior
    /// nodes), mainly for inspection.
    pub fn symbol_tree(&self, deriv: &DerivTree) -> Tree {
        Tree::new(
            self.symbol(deriv.sym).name(),
            deriv
                .children
                .iter()
                .map(|c| match c {
                    DerivChild::Node(t) => Child::Node(self.symbol_tree(t)),
                    DerivChild::Leaf(t) => Child::Leaf(self.terminal(*t).to_string()),
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Pcfg {
        let mut b = PcfgBuilder::new();
        let s = b.exterior("S");
        let a = b.exterior("A");
        let a1 = b.interior("A", 1);
        let x = b.terminal("x");
        b.rule(s, Rhs::Binary(a, a1), 0.5);
        b.rule(s, Rhs::Terms(x, x), 0.5);
        b.rule(a, Rhs::Lexical(x), 1.0);
        b.rule(a1, Rhs::Lexical(x), 1.0);
        b.finish("S", &[("S".to_string(), 1.0)]).unwrap()
    }

    #[test]
    fn duplicate_rules_merge_by_summing() {
        let mut b = PcfgBuilder::new();
        let s = b.exterior("S");
        let x = b.terminal("x");
        b.rule(s, Rhs::Lexical(x), 0.25);
        b.rule(s, Rhs::Lexical(x), 0.5);
        let g = b.finish("S", &[("S".to_string(), 1.0)]).unwrap();
        assert_eq!(g.rules.len(), 1);
        assert_eq!(g.rules[0].prob, 0.75);
    }

    #[test]
    fn text_round_trip_is_identity() {
        let g = tiny();
        let text = g.to_text();
        let g2 = Pcfg::from_text(&text).unwrap();
        assert_eq!(g2.to_text(), text);
        assert_eq!(g2.rules.len(), g.rules.len());
    }

    #[test]
    fn interior_symbols_round_trip_addresses() {
        let g = tiny();
        let id = g.lookup_symbol("A@1").unwrap();
        assert_eq!(g.symbol(id).base, "A");
        assert_eq!(g.symbol(id).address, Some(1));
    }

    #[test]
    fn erase_interior_relabels_only() {
        let g = tiny();
        let s = g.lookup_symbol("S").unwrap();
        let a = g.lookup_symbol("A").unwrap();
        let a1 = g.lookup_symbol("A@1").unwrap();
        let x = g.lookup_terminal("x").unwrap();
        let deriv = DerivTree {
            sym: s,
            children: vec![
                DerivChild::Node(DerivTree { sym: a, children: vec![DerivChild::Leaf(x)] }),
                DerivChild::Node(DerivTree { sym: a1, children: vec![DerivChild::Leaf(x)] }),
            ],
        };
        assert_eq!(g.erase_interior(&deriv).to_string(), "(S (A x) (A x))");
        assert_eq!(g.symbol_tree(&deriv).to_string(), "(S (A x) (A@1 x))");
    }

    #[test]
    fn multi_root_grammar_round_trips_with_start_distribution() {
        let mut b = PcfgBuilder::new();
        let s = b.exterior("S");
        let t = b.exterior("T");
        let x = b.terminal("x");
        b.rule(s, Rhs::Lexical(x), 1.0);
        b.rule(t, Rhs::Terms(x, x), 1.0);
        let g = b
            .finish("TOP", &[("S".to_string(), 0.75), ("T".to_string(), 0.25)])
            .unwrap();
        let text = g.to_text();
        assert!(text.contains("TOP → S\t0.75"));
        let back = Pcfg::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.start_name, "TOP");
        assert_eq!(back.start.len(), 2);
        // TOP itself is a start marker, not a grammar symbol
        assert!(back.lookup_symbol("TOP").is_none());
    }

    #[test]
    fn from_text_rejects_unary_nonstart() {
        let text = "# start S\nS → A x\t1\nA → x\t0.5\nB → A\t0.5\nB → x y\t0.5\n";
        assert!(matches!(
            Pcfg::from_text(text),
            Err(GrammarFormatError::UnaryNonStart(_))
        ));
    }
}
