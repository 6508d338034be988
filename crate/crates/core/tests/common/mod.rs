//! Helpers shared by the integration suites.

use std::collections::BTreeSet;

use dop_core::exhaustive::enumerate_pcfg_parses;
use dop_core::reduction::{assign_addresses, build_pcfg};
use dop_core::stsg::{enumerate_derivations, extract_all_subtrees, tree_distribution};
use dop_core::tree::Tree;
use num_traits::ToPrimitive;

pub const ENUM_CAP: usize = 150_000;

/// Compare the reduced grammar's exterior-tree distribution against the
/// brute-force subtree-grammar distribution for every corpus yield of
/// length ≤ `max_len`. Sentences whose brute-force enumeration exceeds
/// the work cap are skipped (they are not checkable by any exhaustive
/// oracle at desk scale). Returns the number of (sentence, tree) pairs
/// verified; errors describe the first mismatch.
pub fn check_equivalence(corpus: &[Tree], max_len: usize) -> Result<usize, String> {
    let stsg = extract_all_subtrees(corpus, true, ENUM_CAP)
        .map_err(|e| format!("extraction failed: {e}"))?;
    let addressed = assign_addresses(corpus).map_err(|e| format!("addressing failed: {e}"))?;
    let grammar = build_pcfg(&addressed);

    let yields: BTreeSet<Vec<String>> = corpus
        .iter()
        .map(|t| t.terminals())
        .filter(|y| y.len() <= max_len)
        .collect();

    let mut checked = 0;
    for sentence in yields {
        let derivations = match enumerate_derivations(&stsg, &sentence, ENUM_CAP) {
            Ok(d) => d,
            Err(dop_core::stsg::StsgError::EnumerationCapExceeded) => continue,
            Err(e) => return Err(format!("oracle enumeration failed: {e}")),
        };
        let oracle = tree_distribution(&derivations);
        let reduced = match enumerate_pcfg_parses(&grammar, &sentence, ENUM_CAP) {
            Ok(r) => r,
            Err(dop_core::exhaustive::ExhaustiveError::CapExceeded) => continue,
        };
        if oracle.len() != reduced.len() {
            return Err(format!(
                "tree sets differ on {:?}: oracle {} trees, reduced {}",
                sentence.join(" "),
                oracle.len(),
                reduced.len()
            ));
        }
        for (tree, mass) in &oracle {
            let oracle_p = mass.to_f64().ok_or("mass out of f64 range")?;
            let reduced_p = *reduced
                .get(tree)
                .ok_or_else(|| format!("tree {tree} missing from the reduced distribution"))?;
            if (oracle_p - reduced_p).abs() > 1e-9 {
                return Err(format!(
                    "probability mismatch for {tree}: oracle {oracle_p}, reduced {reduced_p}"
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
