//! Batch command-line frontend: grammar reduction, parsing, experiments,
//! coverage analysis, and derivation sampling.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dop_core::chart::{monte_carlo_parse, InsideChart};
use dop_core::evalx::{
    self, format_table, run_experiment, ExperimentOptions, MatchMode, SplitConfig,
};
use dop_core::maxcons::{fallback_parse, parse_sentence, ParseMethod};
use dop_core::pcfg::Pcfg;
use dop_core::reduction::{assign_addresses, build_pcfg, grammar_stats};
use dop_core::tree::Tree;
use dop_core::treebank::{
    binarize, collapse_unary, default_epsilon_markers, read_penn, strip_epsilon, strip_words,
    BinarizationScheme,
};
use dop_core::chart;

/// Exit codes: 0 success, 2 usage, 3 I/O, 4 data.
enum CliError {
    Usage(anyhow::Error),
    Io(anyhow::Error),
    Data(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Io(e) | CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

trait IoContext<T> {
    fn or_io(self, what: &str) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> IoContext<T> for Result<T, E> {
    fn or_io(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Io(e.into().context(what.to_string())))
    }
}

fn data_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Correct,
    Continued,
    Simple,
}

impl From<SchemeArg> for BinarizationScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Correct => BinarizationScheme::Correct,
            SchemeArg::Continued => BinarizationScheme::Continued,
            SchemeArg::Simple => BinarizationScheme::Simple,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Maxcons,
    Viterbi,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportArg {
    Table,
    Structured,
}

#[derive(Parser)]
#[command(
    name = "dop",
    version,
    about = "Data-oriented parsing via reduction to a linear-size PCFG"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a treebank to its equivalent PCFG
    Reduce(ReduceArgs),
    /// Parse POS-tag sentences with a reduced grammar
    Parse(ParseArgs),
    /// Run the split/train/parse/score protocol
    Experiment(ExperimentArgs),
    /// Coverage analysis: unique-production probabilities
    Coverage(CoverageArgs),
    /// Sample derivations conditioned on each sentence
    Sample(SampleArgs),
}

#[derive(Args)]
struct ReduceArgs {
    /// Penn-bracketed treebank file
    #[arg(long)]
    treebank: PathBuf,
    #[arg(long, value_enum, default_value = "correct")]
    scheme: SchemeArg,
    /// Replace preterminal words by their POS tags during ingestion
    #[arg(long)]
    drop_words: bool,
    /// Grammar output file (stdout when omitted; stats then go to stderr)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    /// Grammar file produced by `dop reduce`
    #[arg(long)]
    grammar: PathBuf,
    /// Sentences, one per line, whitespace-separated POS tags (stdin when
    /// omitted)
    #[arg(long)]
    sentences: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "maxcons")]
    method: MethodArg,
    /// Derivation samples per sentence (montecarlo)
    #[arg(long, required_if_eq("method", "montecarlo"))]
    samples: Option<usize>,
    /// Sampler seed (montecarlo)
    #[arg(long, required_if_eq("method", "montecarlo"))]
    seed: Option<u64>,
    /// Sentence-final punctuation for the fallback shape
    #[arg(long, value_delimiter = ',', default_value = ".")]
    fallback_punct: Vec<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    treebank: PathBuf,
    #[arg(long, value_enum, default_value = "correct")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 700)]
    train: usize,
    #[arg(long, default_value_t = 88)]
    test: usize,
    /// Discard sentences longer than this after splitting
    #[arg(long, default_value_t = 30)]
    max_len: usize,
    /// Disable the length cutoff
    #[arg(long)]
    no_max_len: bool,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportArg,
    /// Exact match ignores introduced binarization symbols
    #[arg(long)]
    loose_match: bool,
    /// Add a copy-of-gold oracle system
    #[arg(long)]
    with_oracle: bool,
    /// External candidate trees: NAME=DIR holding run0.mrg, run1.mrg, ...,
    /// one file per run, aligned with that run's test set order
    #[arg(long)]
    external: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = ".")]
    fallback_punct: Vec<String>,
    /// Report output file (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    treebank: PathBuf,
    #[arg(long, value_enum, default_value = "correct")]
    scheme: SchemeArg,
    /// Keep unary chains instead of collapsing them
    #[arg(long)]
    retain_unary: bool,
    #[arg(long, default_value_t = 75)]
    test_size: usize,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportArg,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    sentences: Option<PathBuf>,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: u64,
}

fn read_trees(path: &Path) -> Result<Vec<Tree>, CliError> {
    let text = fs::read_to_string(path)
        .or_io(&format!("reading treebank {}", path.display()))?;
    read_penn(&text)
        .map_err(|e| data_err(anyhow!("{}: {e}", path.display())))
}

fn read_sentences(path: &Option<PathBuf>) -> Result<Vec<(usize, Vec<String>)>, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).or_io(&format!("reading sentences {}", p.display()))?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf).or_io("reading stdin")?;
            buf
        }
    };
    Ok(text
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                None
            } else {
                Some((i + 1, words))
            }
        })
        .collect())
}

fn load_grammar(path: &Path) -> Result<Pcfg, CliError> {
    let text =
        fs::read_to_string(path).or_io(&format!("reading grammar {}", path.display()))?;
    Pcfg::from_text(&text).map_err(|e| data_err(anyhow!("{}: {e}", path.display())))
}

fn punct_set(items: &[String]) -> BTreeSet<String> {
    items.iter().cloned().collect()
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, content).or_io(&format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_reduce(args: &ReduceArgs) -> Result<(), CliError> {
    let raw = read_trees(&args.treebank)?;
    if raw.is_empty() {
        return Err(data_err(anyhow!("{}: empty corpus", args.treebank.display())));
    }
    let markers = default_epsilon_markers();
    let scheme: BinarizationScheme = args.scheme.into();
    let prepared: Vec<Tree> = raw
        .iter()
        .map(|t| {
            if args.drop_words {
                strip_words(t).ok_or_else(|| data_err(anyhow!("a tree vanished under --drop-words")))
            } else {
                Ok(t.clone())
            }
        })
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .filter_map(|t| strip_epsilon(t, &markers))
        .map(|t| collapse_unary(&t))
        .map(|t| binarize(&t, scheme))
        .collect();
    if prepared.is_empty() {
        return Err(data_err(anyhow!("no trees survive preprocessing")));
    }
    let addressed = assign_addresses(&prepared).map_err(data_err)?;
    let grammar = build_pcfg(&addressed);
    let stats = grammar_stats(&grammar);

    let mut text = String::new();
    text.push_str(&format!(
        "# reduce treebank={} scheme={} drop-words={}\n",
        args.treebank.display(),
        scheme.name(),
        args.drop_words
    ));
    text.push_str(&grammar.to_text());
    emit(&args.out, &text)?;
    if args.out.is_some() {
        println!("{stats}");
    } else {
        eprintln!("{stats}");
    }
    Ok(())
}

fn cmd_parse(args: &ParseArgs) -> Result<(), CliError> {
    let grammar = load_grammar(&args.grammar)?;
    let punct = punct_set(&args.fallback_punct);
    for (line_no, sentence) in read_sentences(&args.sentences)? {
        let line = match args.method {
            MethodArg::Maxcons => match parse_sentence(&grammar, &sentence, &punct) {
                Ok(outcome) => match outcome.method {
                    ParseMethod::Maxcons => outcome.tree.to_string(),
                    ParseMethod::Fallback => format!("{}\t# fallback", outcome.tree),
                },
                Err(e) => {
                    eprintln!("line {line_no}: {e}");
                    continue;
                }
            },
            MethodArg::Viterbi => match chart::viterbi_derivation(&grammar, &sentence) {
                Ok((deriv, _)) => grammar.erase_interior(&deriv).to_string(),
                Err(_) => format!("{}\t# fallback", fallback_parse(&sentence, &punct)),
            },
            MethodArg::Montecarlo => {
                let count = args.samples.expect("clap enforces --samples");
                let seed = args.seed.expect("clap enforces --seed");
                let inside = match InsideChart::build(&grammar, &sentence) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("line {line_no}: {e}");
                        continue;
                    }
                };
                match inside.sample_derivations(count, seed) {
                    Ok(samples) => monte_carlo_parse(&samples).to_string(),
                    Err(_) => format!("{}\t# fallback", fallback_parse(&sentence, &punct)),
                }
            }
        };
        println!("{line}");
    }
    Ok(())
}

fn read_external(
    spec: &str,
    runs: usize,
) -> Result<(String, Vec<Vec<Tree>>), CliError> {
    let (name, dir) = spec
        .split_once('=')
        .ok_or_else(|| data_err(anyhow!("--external expects NAME=DIR, got {spec:?}")))?;
    let mut per_run = Vec::with_capacity(runs);
    for run in 0..runs {
        let path = Path::new(dir).join(format!("run{run}.mrg"));
        per_run.push(read_trees(&path)?);
    }
    Ok((name.to_string(), per_run))
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Usage(anyhow!("--runs must be at least 1")));
    }
    let corpus = read_trees(&args.treebank)?;
    if corpus.is_empty() {
        return Err(data_err(anyhow!("{}: empty corpus", args.treebank.display())));
    }
    let external = match &args.external {
        Some(spec) => Some(read_external(spec, args.runs)?),
        None => None,
    };
    let opts = ExperimentOptions {
        scheme: args.scheme.into(),
        split: SplitConfig {
            train: args.train,
            test: args.test,
            max_len: if args.no_max_len { None } else { Some(args.max_len) },
            runs: args.runs,
            seed: args.seed,
        },
        match_mode: if args.loose_match { MatchMode::Loose } else { MatchMode::Strict },
        punctuation: punct_set(&args.fallback_punct),
        with_gold_oracle: args.with_oracle,
        external,
        ..ExperimentOptions::default()
    };
    let report = run_experiment(&corpus, &opts).map_err(data_err)?;
    let content = match args.report {
        ReportArg::Table => format_table(&report),
        ReportArg::Structured => report.to_json(),
    };
    emit(&args.out, &content)
}

fn cmd_coverage(args: &CoverageArgs) -> Result<(), CliError> {
    let corpus = read_trees(&args.treebank)?;
    if corpus.is_empty() {
        return Err(data_err(anyhow!("{}: empty corpus", args.treebank.display())));
    }
    let report =
        evalx::coverage_analysis(&corpus, args.scheme.into(), args.retain_unary, args.test_size);
    match args.report {
        ReportArg::Structured => print!("{}", report.to_json()),
        ReportArg::Table => {
            println!(
                "# coverage treebank={} scheme={} retain-unary={} test-size={}",
                args.treebank.display(),
                report.scheme,
                report.retain_unary,
                report.test_size
            );
            println!("sentences\t{}", report.total_sentences);
            println!("unique-production-sentences\t{}", report.unique_production_sentences);
            println!("p\t{}", report.p);
            println!("prob-one-ungeneratable\t{:e}", report.prob_one_ungeneratable);
            println!("hypergeometric-prob-one\t{:e}", report.hypergeometric_prob_one);
        }
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    let grammar = load_grammar(&args.grammar)?;
    for (line_no, sentence) in read_sentences(&args.sentences)? {
        println!("# sentence {line_no}: {}", sentence.join(" "));
        let inside = match InsideChart::build(&grammar, &sentence) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("line {line_no}: {e}");
                continue;
            }
        };
        match inside.sample_derivations(args.samples, args.seed) {
            Ok(samples) => {
                let mut counts: std::collections::BTreeMap<String, usize> =
                    std::collections::BTreeMap::new();
                for t in &samples {
                    *counts.entry(t.to_string()).or_insert(0) += 1;
                }
                let mut rows: Vec<(usize, String)> =
                    counts.into_iter().map(|(t, c)| (c, t)).collect();
                rows.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
                for (count, tree) in rows {
                    println!("{count}\t{tree}");
                }
            }
            Err(_) => println!("# no parse"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reduce(args) => cmd_reduce(args),
        Command::Parse(args) => cmd_parse(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Sample(args) => cmd_sample(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
