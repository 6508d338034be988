//! Experiment protocol and data analysis: seeded random splits, bracket
//! metrics, paired significance testing, coverage probabilities, and the
//! report formats.

mod coverage;
mod experiment;
mod metrics;
mod ttest;

pub use coverage::{coverage_analysis, hypergeometric_prob_one, prob_one_ungeneratable, CoverageReport};
pub use experiment::{
    format_table, run_experiment, EvalReport, ExperimentOptions, MetricRow, RunMetrics,
    SignificanceRow, SystemRuns,
};
pub use metrics::{crossing_brackets, exact_match, CrossingPolicy, MatchMode};
pub use ttest::{paired_t_test, TTest};

use thiserror::Error;

use crate::rng;
use crate::tree::Tree;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("corpus too small: the split needs {need} sentences, the corpus has {have}")]
    CorpusTooSmall { need: usize, have: usize },
    #[error("candidate and gold trees cover different terminal strings")]
    YieldMismatch,
    #[error("paired t-test needs at least two runs with unequal deltas")]
    DegenerateVariance,
    #[error("external system {name:?} supplied {got} trees for a {want}-sentence test set in run {run}")]
    ExternalMisaligned { name: String, run: usize, got: usize, want: usize },
    #[error("run {run}: no training sentences survive the length filter")]
    EmptyTrainingSet { run: usize },
}

/// Split protocol parameters. Defaults are the 700/88 split with a
/// 30-token length cutoff over ten runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub train: usize,
    pub test: usize,
    pub max_len: Option<usize>,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 700, test: 88, max_len: Some(30), runs: 10, seed: 1 }
    }
}

/// Deterministic split for one run: shuffle under `(seed, run)`, take the
/// train and test blocks, then discard sentences longer than the cutoff
/// (the filter runs after the split, so effective set sizes may shrink).
pub fn random_split(
    corpus: &[Tree],
    config: &SplitConfig,
    run: usize,
) -> Result<(Vec<Tree>, Vec<Tree>), EvalError> {
    let need = config.train + config.test;
    if need > corpus.len() {
        return Err(EvalError::CorpusTooSmall { need, have: corpus.len() });
    }
    let mut rng = rng::seeded(config.seed, run as u64);
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    rng::shuffle(&mut rng, &mut indices);
    let keep = |t: &&Tree| config.max_len.is_none_or(|m| t.yield_len() <= m);
    let train: Vec<Tree> = indices[..config.train]
        .iter()
        .map(|&i| &corpus[i])
        .filter(keep)
        .cloned()
        .collect();
    let test: Vec<Tree> = indices[config.train..need]
        .iter()
        .map(|&i| &corpus[i])
        .filter(keep)
        .cloned()
        .collect();
    Ok((train, test))
}
