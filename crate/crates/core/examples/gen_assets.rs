//! Regenerates the bundled data files under crates/core/data/. The
//! checked-in copies must match this generator byte for byte; a test
//! guards the invariant.
//!
//!     cargo run -p dop-core --example gen_assets

use std::fs;
use std::path::Path;

use dop_core::evalx::{format_table, run_experiment};
use dop_core::synth::{bundled_corpus_text, bundled_experiment_options};

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    fs::create_dir_all(&data).expect("data dir");

    let corpus_text = bundled_corpus_text();
    fs::write(data.join("synthetic_200.mrg"), &corpus_text).expect("write corpus");

    let corpus = dop_core::treebank::read_penn(&corpus_text).expect("corpus parses");
    let report = run_experiment(&corpus, &bundled_experiment_options()).expect("experiment runs");
    fs::write(data.join("golden_report.tsv"), format_table(&report)).expect("write table");
    fs::write(data.join("golden_report.json"), report.to_json()).expect("write json");

    println!("wrote synthetic_200.mrg, golden_report.tsv, golden_report.json");
}
