//! The split/train/parse/score protocol and the report formats.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::metrics::{crossing_brackets, exact_match, CrossingPolicy, MatchMode};
use super::ttest::{paired_t_test, TTest};
use super::{random_split, EvalError, SplitConfig};
use crate::maxcons::{parse_sentence, ParseMethod};
use crate::reduction::{assign_addresses, build_pcfg};
use crate::tree::Tree;
use crate::treebank::{
    binarize, collapse_unary, default_epsilon_markers, strip_epsilon, BinarizationScheme,
};

/// Accumulated counts for one system over one run's test set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunMetrics {
    pub sentences: usize,
    pub candidate_constituents: usize,
    pub crossing_constituents: usize,
    pub zero_cross_sentences: usize,
    pub exact_match_sentences: usize,
    pub fallback_sentences: usize,
}

impl RunMetrics {
    /// Percent of counted candidate constituents that cross no gold
    /// constituent.
    pub fn crossing_rate(&self) -> f64 {
        if self.candidate_constituents == 0 {
            100.0
        } else {
            100.0 * (1.0 - self.crossing_constituents as f64 / self.candidate_constituents as f64)
        }
    }

    /// Percent of sentences with no crossing constituent.
    pub fn zero_crossing_rate(&self) -> f64 {
        if self.sentences == 0 {
            100.0
        } else {
            100.0 * self.zero_cross_sentences as f64 / self.sentences as f64
        }
    }

    pub fn exact_match_rate(&self) -> f64 {
        if self.sentences == 0 {
            100.0
        } else {
            100.0 * self.exact_match_sentences as f64 / self.sentences as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub scheme: BinarizationScheme,
    pub split: SplitConfig,
    pub match_mode: MatchMode,
    pub crossing: CrossingPolicy,
    pub punctuation: BTreeSet<String>,
    /// Add a copy-of-gold oracle system (upper bound rows).
    pub with_gold_oracle: bool,
    /// Externally produced candidate trees: per run, aligned with the
    /// test set order.
    pub external: Option<(String, Vec<Vec<Tree>>)>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            scheme: BinarizationScheme::Correct,
            split: SplitConfig::default(),
            match_mode: MatchMode::Strict,
            crossing: CrossingPolicy::default(),
            punctuation: crate::maxcons::default_punctuation(),
            with_gold_oracle: false,
            external: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub label: String,
    pub per_run: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub mean: f64,
    pub std_dev: f64,
}

fn summarize(label: String, per_run: Vec<f64>) -> MetricRow {
    let n = per_run.len();
    let min = per_run.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = per_run.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = per_run.iter().sum::<f64>() / n as f64;
    let std_dev = if n < 2 {
        0.0
    } else {
        (per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MetricRow { label, per_run, min, max, range: max - min, mean, std_dev }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub label: String,
    pub t_test: Option<TTest>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemRuns {
    pub system: String,
    pub runs: Vec<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub scheme: String,
    pub train: usize,
    pub test: usize,
    pub max_len: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub match_mode: String,
    pub crossing_denominator: String,
    pub punctuation: Vec<String>,
    pub systems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub rows: Vec<MetricRow>,
    pub significance: Vec<SignificanceRow>,
    pub raw: Vec<SystemRuns>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy, PartialEq)]
enum SystemKind {
    Dop,
    Gold,
    External,
}

/// Run the protocol: for each run, split, binarize and train on the
/// training block, parse the test block (right-branching fallback where
/// unparsable), and score every system against the binarized gold trees.
pub fn run_experiment(corpus: &[Tree], opts: &ExperimentOptions) -> Result<EvalReport, EvalError> {
    assert!(opts.split.runs >= 1, "the protocol needs at least one run");
    let markers = default_epsilon_markers();
    let prepared: Vec<Tree> = corpus
        .iter()
        .filter_map(|t| strip_epsilon(t, &markers))
        .map(|t| collapse_unary(&t))
        .collect();

    let mut systems: Vec<(String, SystemKind)> = vec![("DOP".to_string(), SystemKind::Dop)];
    if opts.with_gold_oracle {
        systems.push(("GOLD".to_string(), SystemKind::Gold));
    }
    if let Some((name, _)) = &opts.external {
        systems.push((name.clone(), SystemKind::External));
    }

    let mut raw: Vec<SystemRuns> = systems
        .iter()
        .map(|(name, _)| SystemRuns { system: name.clone(), runs: Vec::new() })
        .collect();

    for run in 0..opts.split.runs {
        let (train, test) = random_split(&prepared, &opts.split, run)?;
        if train.is_empty() {
            return Err(EvalError::EmptyTrainingSet { run });
        }
        let train_bin: Vec<Tree> = train.iter().map(|t| binarize(t, opts.scheme)).collect();
        let gold_bin: Vec<Tree> = test.iter().map(|t| binarize(t, opts.scheme)).collect();
        let addressed = assign_addresses(&train_bin).expect("binarized trees satisfy arity");
        let grammar = build_pcfg(&addressed);

        for (si, (name, kind)) in systems.iter().enumerate() {
            let candidates: Vec<(Tree, bool)> = match kind {
                SystemKind::Dop => gold_bin
                    .iter()
                    .map(|gold| {
                        let words = gold.terminals();
                        let outcome = parse_sentence(&grammar, &words, &opts.punctuation)
                            .expect("test sentences are non-empty");
                        let fell_back = outcome.method == ParseMethod::Fallback;
                        (outcome.tree, fell_back)
                    })
                    .collect(),
                SystemKind::Gold => gold_bin.iter().map(|g| (g.clone(), false)).collect(),
                SystemKind::External => {
                    let (_, per_run) = opts.external.as_ref().expect("external present");
                    let trees = per_run.get(run).map(Vec::as_slice).unwrap_or(&[]);
                    if trees.len() != gold_bin.len() {
                        return Err(EvalError::ExternalMisaligned {
                            name: name.clone(),
                            run,
                            got: trees.len(),
                            want: gold_bin.len(),
                        });
                    }
                    trees.iter().map(|t| (t.clone(), false)).collect()
                }
            };

            let mut m = RunMetrics::default();
            for ((cand, fell_back), gold) in candidates.iter().zip(&gold_bin) {
                let (crossing, counted) = crossing_brackets(cand, gold, opts.crossing)?;
                m.sentences += 1;
                m.candidate_constituents += counted;
                m.crossing_constituents += crossing;
                if crossing == 0 {
                    m.zero_cross_sentences += 1;
                }
                if exact_match(cand, gold, opts.match_mode)? {
                    m.exact_match_sentences += 1;
                }
                if *fell_back {
                    m.fallback_sentences += 1;
                }
            }
            raw[si].runs.push(m);
        }
    }

    let metrics: [(&str, fn(&RunMetrics) -> f64); 3] = [
        ("Cross Brack", RunMetrics::crossing_rate),
        ("Zero Cross Brack", RunMetrics::zero_crossing_rate),
        ("Exact Match", RunMetrics::exact_match_rate),
    ];

    let mut rows = Vec::new();
    let mut significance = Vec::new();
    for (metric, extract) in metrics {
        for sys in &raw {
            let values: Vec<f64> = sys.runs.iter().map(extract).collect();
            rows.push(summarize(format!("{metric} {}", sys.system), values));
        }
        if raw.len() == 2 {
            let label = format!("{metric} {}-{}", raw[0].system, raw[1].system);
            let deltas: Vec<f64> = raw[0]
                .runs
                .iter()
                .zip(&raw[1].runs)
                .map(|(a, b)| extract(a) - extract(b))
                .collect();
            rows.push(summarize(label.clone(), deltas.clone()));
            if opts.split.runs >= 2 {
                match paired_t_test(&deltas) {
                    Ok(t) => significance.push(SignificanceRow {
                        label,
                        t_test: Some(t),
                        note: None,
                    }),
                    Err(_) => significance.push(SignificanceRow {
                        label,
                        t_test: None,
                        note: Some("degenerate variance".to_string()),
                    }),
                }
            }
        }
    }

    Ok(EvalReport {
        config: ReportConfig {
            scheme: opts.scheme.name().to_string(),
            train: opts.split.train,
            test: opts.split.test,
            max_len: opts.split.max_len,
            runs: opts.split.runs,
            seed: opts.split.seed,
            match_mode: opts.match_mode.name().to_string(),
            crossing_denominator: opts.crossing.describe(),
            punctuation: opts.punctuation.iter().cloned().collect(),
            systems: systems.into_iter().map(|(n, _)| n).collect(),
        },
        rows,
        significance,
        raw,
    })
}

/// Tab-separated table in the five-column Min/Max/Range/Mean/StdDev
/// shape, preceded by `#` header lines echoing the full configuration.
pub fn format_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    writeln!(out, "# scheme {}", c.scheme).unwrap();
    writeln!(
        out,
        "# split train={} test={} max-len={} runs={} seed={}",
        c.train,
        c.test,
        c.max_len.map_or("none".to_string(), |m| m.to_string()),
        c.runs,
        c.seed
    )
    .unwrap();
    writeln!(out, "# match {}", c.match_mode).unwrap();
    writeln!(out, "# crossing {}", c.crossing_denominator).unwrap();
    writeln!(out, "# punctuation {}", c.punctuation.join(" ")).unwrap();
    writeln!(out, "# systems {}", c.systems.join(" ")).unwrap();
    writeln!(out, "Criteria\tMin\tMax\tRange\tMean\tStdDev").unwrap();
    for row in &report.rows {
        writeln!(
            out,
            "{}\t{:.2}%\t{:.2}%\t{:.2}%\t{:.2}%\t{:.2}%",
            row.label, row.min, row.max, row.range, row.mean, row.std_dev
        )
        .unwrap();
    }
    if !report.significance.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "t-test on paired run differences (df={})", c.runs - 1).unwrap();
        for s in &report.significance {
            match &s.t_test {
                Some(t) => writeln!(
                    out,
                    "{}\tt={:.4}\tsignificance={:.2}%",
                    s.label,
                    t.t,
                    100.0 * t.significance
                )
                .unwrap(),
                None => writeln!(
                    out,
                    "{}\tt=n/a\t{}",
                    s.label,
                    s.note.as_deref().unwrap_or("")
                )
                .unwrap(),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn small_options(runs: usize, oracle: bool) -> ExperimentOptions {
        ExperimentOptions {
            split: SplitConfig { train: 20, test: 8, max_len: None, runs, seed: 11 },
            with_gold_oracle: oracle,
            ..ExperimentOptions::default()
        }
    }

    #[test]
    fn range_is_max_minus_min() {
        let corpus = synth::synthetic_treebank(7, 30);
        let report = run_experiment(&corpus, &small_options(2, false)).unwrap();
        assert!(!report.rows.is_empty());
        for row in &report.rows {
            assert_eq!(row.range, row.max - row.min, "{}", row.label);
            assert!(row.min <= row.mean && row.mean <= row.max, "{}", row.label);
        }
    }

    #[test]
    fn gold_oracle_rows_are_perfect() {
        let corpus = synth::synthetic_treebank(7, 40);
        let report = run_experiment(&corpus, &small_options(2, true)).unwrap();
        for row in report.rows.iter().filter(|r| r.label.ends_with(" GOLD")) {
            assert_eq!(row.mean, 100.0, "{}", row.label);
            assert_eq!(row.min, 100.0);
            assert_eq!(row.max, 100.0);
        }
        // paired rows and t-test section exist with two systems
        assert!(report.rows.iter().any(|r| r.label == "Cross Brack DOP-GOLD"));
        assert_eq!(report.significance.len(), 3);
    }

    #[test]
    fn single_run_has_no_significance_section() {
        let corpus = synth::synthetic_treebank(7, 30);
        let report = run_experiment(&corpus, &small_options(1, true)).unwrap();
        assert!(report.significance.is_empty());
        let table = format_table(&report);
        assert!(!table.contains("t-test"));
    }

    #[test]
    fn reports_are_byte_deterministic() {
        let corpus = synth::synthetic_treebank(7, 40);
        let a = run_experiment(&corpus, &small_options(3, true)).unwrap();
        let b = run_experiment(&corpus, &small_options(3, true)).unwrap();
        assert_eq!(format_table(&a), format_table(&b));
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn mean_and_std_recompute_from_per_run_values() {
        let corpus = synth::synthetic_treebank(7, 40);
        let report = run_experiment(&corpus, &small_options(4, false)).unwrap();
        for row in &report.rows {
            let n = row.per_run.len() as f64;
            let mean = row.per_run.iter().sum::<f64>() / n;
            let sd = (row.per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (n - 1.0))
                .sqrt();
            assert!((mean - row.mean).abs() < 1e-9);
            assert!((sd - row.std_dev).abs() < 1e-9);
        }
    }

    #[test]
    fn misaligned_external_trees_error() {
        let corpus = synth::synthetic_treebank(7, 30);
        let opts = ExperimentOptions {
            split: SplitConfig { train: 20, test: 5, max_len: None, runs: 1, seed: 11 },
            external: Some(("EXT".to_string(), vec![vec![]])),
            ..ExperimentOptions::default()
        };
        assert!(matches!(
            run_experiment(&corpus, &opts).unwrap_err(),
            EvalError::ExternalMisaligned { .. }
        ));
    }

    #[test]
    fn external_gold_copies_score_perfectly() {
        // feed the gold trees back through the external channel to
        // exercise the alignment path end to end
        let corpus = synth::synthetic_treebank(7, 30);
        let split = SplitConfig { train: 20, test: 5, max_len: None, runs: 2, seed: 11 };
        let markers = crate::treebank::default_epsilon_markers();
        let prepared: Vec<Tree> = corpus
            .iter()
            .filter_map(|t| crate::treebank::strip_epsilon(t, &markers))
            .map(|t| crate::treebank::collapse_unary(&t))
            .collect();
        let mut per_run = Vec::new();
        for run in 0..split.runs {
            let (_, test) = random_split(&prepared, &split, run).unwrap();
            per_run.push(
                test.iter()
                    .map(|t| binarize(t, BinarizationScheme::Correct))
                    .collect::<Vec<_>>(),
            );
        }
        let opts = ExperimentOptions {
            split,
            external: Some(("EXT".to_string(), per_run)),
            ..ExperimentOptions::default()
        };
        let report = run_experiment(&corpus, &opts).unwrap();
        for row in report.rows.iter().filter(|r| r.label.ends_with(" EXT")) {
            assert_eq!(row.mean, 100.0, "{}", row.label);
        }
    }
}
