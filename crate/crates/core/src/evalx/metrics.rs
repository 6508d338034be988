//! Bracket-level parse metrics.

use super::EvalError;
use crate::tree::Tree;
use crate::treebank::splice_any_introduced;

/// Which candidate constituents enter the crossing-brackets denominator.
/// The default excludes the whole-sentence span and length-1 spans,
/// matching common bracket-scoring practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingPolicy {
    pub exclude_root: bool,
    pub exclude_len1: bool,
}

impl Default for CrossingPolicy {
    fn default() -> Self {
        CrossingPolicy { exclude_root: true, exclude_len1: true }
    }
}

impl CrossingPolicy {
    pub fn describe(&self) -> String {
        match (self.exclude_root, self.exclude_len1) {
            (true, true) => "exclude-root exclude-len1".to_string(),
            (true, false) => "exclude-root".to_string(),
            (false, true) => "exclude-len1".to_string(),
            (false, false) => "all-spans".to_string(),
        }
    }
}

/// Count candidate constituents that cross some gold constituent: spans
/// `(s,t)` and `(s',t')` cross when they overlap without either
/// containing the other. Returns `(crossing, counted)` where `counted`
/// is the denominator after the policy's exclusions.
pub fn crossing_brackets(
    candidate: &Tree,
    gold: &Tree,
    policy: CrossingPolicy,
) -> Result<(usize, usize), EvalError> {
    if candidate.terminals() != gold.terminals() {
        return Err(EvalError::YieldMismatch);
    }
    let n = candidate.yield_len();
    let gold_spans: Vec<(usize, usize)> = gold.spans().iter().map(|(s, t, _)| (*s, *t)).collect();
    let mut counted = 0;
    let mut crossing = 0;
    for (s, t, _) in candidate.spans() {
        if policy.exclude_len1 && s == t {
            continue;
        }
        if policy.exclude_root && s == 1 && t == n {
            continue;
        }
        counted += 1;
        let crosses = gold_spans
            .iter()
            .any(|&(s2, t2)| (s < s2 && s2 <= t && t < t2) || (s2 < s && s <= t2 && t2 < t));
        if crosses {
            crossing += 1;
        }
    }
    Ok((crossing, counted))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Compare against the binarized gold tree, labels included.
    Strict,
    /// Splice out introduced binarization symbols on both sides first.
    Loose,
}

impl MatchMode {
    pub fn name(self) -> &'static str {
        match self {
            MatchMode::Strict => "strict",
            MatchMode::Loose => "loose",
        }
    }
}

pub fn exact_match(candidate: &Tree, gold: &Tree, mode: MatchMode) -> Result<bool, EvalError> {
    if candidate.terminals() != gold.terminals() {
        return Err(EvalError::YieldMismatch);
    }
    Ok(match mode {
        MatchMode::Strict => candidate == gold,
        MatchMode::Loose => splice_any_introduced(candidate) == splice_any_introduced(gold),
    })
}
