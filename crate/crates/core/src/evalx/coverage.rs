//! Coverage analysis: the probability that a random test set contains an
//! ungeneratable sentence, as a function of preprocessing choices.
//!
//! A sentence is "unique-production" when it contains a production that
//! occurs in no other sentence; drawn into a test set, such a sentence
//! cannot be generated from the remaining training data. With p the
//! generatable fraction, the chance that a test set of m sentences has
//! exactly one ungeneratable member is estimated by m·p^(m−1)·(1−p). The
//! formula samples with replacement and therefore slightly overestimates;
//! the exact hypergeometric value is available alongside.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::reduction::ratio_to_f64;
use crate::tree::Tree;
use crate::treebank::{
    binarize, collapse_unary, default_epsilon_markers, strip_epsilon, BinarizationScheme,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub scheme: String,
    pub retain_unary: bool,
    pub test_size: usize,
    pub total_sentences: usize,
    pub unique_production_sentences: usize,
    /// Fraction of sentences with no sentence-unique production.
    pub p: f64,
    /// m·p^(m−1)·(1−p): the with-replacement estimate.
    pub prob_one_ungeneratable: f64,
    /// Exact without-replacement counterpart.
    pub hypergeometric_prob_one: f64,
}

impl CoverageReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// The with-replacement estimate m·p^(m−1)·(1−p).
pub fn prob_one_ungeneratable(p: f64, m: usize) -> f64 {
    m as f64 * p.powi(m as i32 - 1) * (1.0 - p)
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    num / den
}

/// Exact probability that a test set of `m` sentences drawn without
/// replacement from a corpus of `total` sentences (of which `unique` are
/// unique-production) contains exactly one of them.
pub fn hypergeometric_prob_one(total: usize, unique: usize, m: usize) -> f64 {
    if m == 0 || m > total {
        return 0.0;
    }
    let num = binomial(unique, 1) * binomial(total - unique, m - 1);
    let den = binomial(total, m);
    ratio_to_f64(&num, &den)
}

/// Preprocess the corpus per the flags (empty elements always stripped,
/// unary chains collapsed unless retained, then binarized), extract each
/// sentence's production multiset, and compute the coverage figures.
pub fn coverage_analysis(
    corpus: &[Tree],
    scheme: BinarizationScheme,
    retain_unary: bool,
    test_size: usize,
) -> CoverageReport {
    let markers = default_epsilon_markers();
    let prepared: Vec<Tree> = corpus
        .iter()
        .filter_map(|t| strip_epsilon(t, &markers))
        .map(|t| if retain_unary { t } else { collapse_unary(&t) })
        .map(|t| binarize(&t, scheme))
        .collect();

    // production → indices of sentences containing it
    let mut owners: std::collections::BTreeMap<(String, Vec<String>), Vec<usize>> =
        std::collections::BTreeMap::new();
    let productions: Vec<Vec<(String, Vec<String>)>> = prepared
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let prods: Vec<(String, Vec<String>)> = t.productions().into_keys().collect();
            for p in &prods {
                let owner = owners.entry(p.clone()).or_default();
                if owner.last() != Some(&i) {
                    owner.push(i);
                }
            }
            prods
        })
        .collect();

    let unique = productions
        .iter()
        .filter(|prods| prods.iter().any(|p| owners[p].len() == 1))
        .count();
    let total = prepared.len();
    let p = if total == 0 { 1.0 } else { 1.0 - unique as f64 / total as f64 };
    CoverageReport {
        scheme: scheme.name().to_string(),
        retain_unary,
        test_size,
        total_sentences: total,
        unique_production_sentences: unique,
        p,
        prob_one_ungeneratable: prob_one_ungeneratable(p, test_size),
        hypergeometric_prob_one: hypergeometric_prob_one(total, unique, test_size),
    }
}
