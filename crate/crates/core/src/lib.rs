//! Data-oriented parsing via reduction to an equivalent linear-size PCFG.
//!
//! The all-subtrees model treats every fragment of a training treebank as
//! a grammar rule. Instead of materializing that exponential grammar, the
//! [`reduction`] module emits at most eight PCFG rules per treebank node
//! that generate the same trees with the same probabilities. The [`chart`]
//! module computes inside/outside probabilities and constituent
//! posteriors on the reduced grammar, [`maxcons`] picks the bracketing
//! that maximizes the expected number of correct constituents, and
//! [`evalx`] runs the split/parse/score experiment protocol. The explicit
//! exponential grammar lives on in [`stsg`] as the exact-arithmetic
//! oracle everything else is checked against.

pub mod chart;
pub mod evalx;
pub mod exhaustive;
pub mod maxcons;
pub mod pcfg;
pub mod reduction;
pub mod rng;
pub mod stsg;
pub mod synth;
pub mod tree;
pub mod treebank;

pub use chart::{InsideChart, PosteriorMatrix};
pub use pcfg::Pcfg;
pub use tree::{Child, Tree};
pub use treebank::BinarizationScheme;
