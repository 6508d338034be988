//! Maximum constituents parsing: the binary bracketing that maximizes the
//! expected number of correct constituents under the posterior matrix,
//! plus the right-branching fallback for unparsable sentences.

use std::collections::BTreeSet;
use std::ops::Add;

use num_traits::Zero;
use thiserror::Error;

use crate::chart::{self, PosteriorMatrix};
use crate::pcfg::Pcfg;
use crate::tree::{Child, Tree};

/// Label given to chosen spans whose best aggregated posterior is zero.
/// Evaluation treats it as an unlabeled bracket.
pub const UNKNOWN_LABEL: &str = "X?";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaxconsError {
    #[error("zero-length sentence")]
    ZeroLength,
}

/// Score values: exact rationals on the oracle path, doubles on the chart
/// path.
pub trait Score: Clone + Zero + Add<Output = Self> + PartialOrd {}
impl<T: Clone + Zero + Add<Output = T> + PartialOrd> Score for T {}

/// The dynamic-programming table: per span, the best expected-correct
/// score, the argmax label, and the chosen split.
pub struct MaxcTable<T> {
    n: usize,
    score: Vec<T>,
    label: Vec<Option<String>>,
    split: Vec<usize>,
}

impl<T: Score> MaxcTable<T> {
    pub fn build(g: &PosteriorMatrix<T>) -> MaxcTable<T> {
        let n = g.n();
        let mut table = MaxcTable {
            n,
            score: vec![T::zero(); n * n],
            label: vec![None; n * n],
            split: vec![0; n * n],
        };
        for len in 1..=n {
            for s in 0..=(n - len) {
                let t = s + len - 1;
                let cell = s * n + t;
                let (label, label_score) = match g.best(s + 1, t + 1) {
                    Some((l, v)) => (Some(l.to_string()), v),
                    None => (None, T::zero()),
                };
                table.label[cell] = label;
                if len == 1 {
                    table.score[cell] = label_score;
                    continue;
                }
                // split ties break toward the smallest r
                let mut best_split = s;
                let mut best: Option<T> = None;
                for r in s..t {
                    let cand =
                        table.score[s * n + r].clone() + table.score[(r + 1) * n + t].clone();
                    if best.as_ref().is_none_or(|b| &cand > b) {
                        best = Some(cand);
                        best_split = r;
                    }
                }
                table.split[cell] = best_split;
                table.score[cell] = label_score + best.unwrap();
            }
        }
        table
    }

    /// Best score of a 1-based inclusive span.
    pub fn score(&self, s: usize, t: usize) -> &T {
        &self.score[(s - 1) * self.n + (t - 1)]
    }
}

/// Fill the table and recover the bracketing rooted at the whole span.
/// Length-1 spans become preterminals when some label has mass and bare
/// terminals otherwise, which is the behavior of a grammar whose
/// terminals are POS tags.
pub fn maximum_constituents_parse<T: Score>(
    g: &PosteriorMatrix<T>,
    sentence: &[String],
) -> Result<(Tree, T), MaxconsError> {
    let n = sentence.len();
    if n == 0 {
        return Err(MaxconsError::ZeroLength);
    }
    assert_eq!(g.n(), n, "posterior matrix covers a different length");
    let table = MaxcTable::build(g);

    fn recover<T: Score>(table: &MaxcTable<T>, words: &[String], s: usize, t: usize) -> Child {
        let n = table.n;
        let cell = s * n + t;
        if s == t {
            return match &table.label[cell] {
                Some(l) => Child::Node(Tree::leaf(l.clone(), words[s].clone())),
                None => Child::Leaf(words[s].clone()),
            };
        }
        let r = table.split[cell];
        let label = table.label[cell].clone().unwrap_or_else(|| UNKNOWN_LABEL.to_string());
        Child::Node(Tree::new(
            label,
            vec![recover(table, words, s, r), recover(table, words, r + 1, t)],
        ))
    }

    let tree = match recover(&table, sentence, 0, n - 1) {
        Child::Node(t) => t,
        Child::Leaf(w) => Tree::leaf(UNKNOWN_LABEL, w),
    };
    let score = table.score(1, n).clone();
    Ok((tree, score))
}

/// Sentence-final punctuation markers recognized by the fallback.
pub fn default_punctuation() -> BTreeSet<String> {
    [".".to_string()].into_iter().collect()
}

/// Right-branching fallback structure. When the final terminal is
/// sentence-final punctuation it attaches as sister to the spine at a
/// `TOP` node; all introduced labels are [`UNKNOWN_LABEL`].
pub fn fallback_parse(sentence: &[String], punctuation: &BTreeSet<String>) -> Tree {
    fn spine(words: &[String]) -> Tree {
        match words.len() {
            0 => unreachable!("spine of an empty suffix"),
            1 => Tree::leaf(UNKNOWN_LABEL, words[0].clone()),
            2 => Tree::new(
                UNKNOWN_LABEL,
                vec![Child::Leaf(words[0].clone()), Child::Leaf(words[1].clone())],
            ),
            _ => Tree::new(
                UNKNOWN_LABEL,
                vec![Child::Leaf(words[0].clone()), Child::Node(spine(&words[1..]))],
            ),
        }
    }
    assert!(!sentence.is_empty(), "fallback_parse requires at least one terminal");
    let n = sentence.len();
    if n >= 2 && punctuation.contains(&sentence[n - 1]) {
        Tree::new(
            "TOP",
            vec![Child::Node(spine(&sentence[..n - 1])), Child::Leaf(sentence[n - 1].clone())],
        )
    } else {
        spine(sentence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMethod {
    Maxcons,
    Fallback,
}

impl ParseMethod {
    pub fn name(self) -> &'static str {
        match self {
            ParseMethod::Maxcons => "maxcons",
            ParseMethod::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub tree: Tree,
    pub method: ParseMethod,
    /// Expected number of correct constituents; 0 on the fallback path.
    pub score: f64,
}

/// Parse with the maximum-constituents criterion, falling back to the
/// right-branching heuristic when the sentence has no parse.
pub fn parse_sentence(
    g: &Pcfg,
    sentence: &[String],
    punctuation: &BTreeSet<String>,
) -> Result<ParseOutcome, MaxconsError> {
    if sentence.is_empty() {
        return Err(MaxconsError::ZeroLength);
    }
    let inside = chart::InsideChart::build(g, sentence).map_err(|_| MaxconsError::ZeroLength)?;
    if inside.has_parse() {
        let pm = inside.outside().posteriors().expect("parsable sentence has posteriors");
        let (tree, score) = maximum_constituents_parse(&pm, sentence)?;
        Ok(ParseOutcome { tree, method: ParseMethod::Maxcons, score })
    } else {
        Ok(ParseOutcome {
            tree: fallback_parse(sentence, punctuation),
            method: ParseMethod::Fallback,
            score: 0.0,
        })
    }
}
