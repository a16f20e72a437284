//! Tooling for building compositional-generalization challenges from math
//! word problem corpora.
//!
//! * [`corpus`] holds the problem data model and JSONL I/O.
//! * [`exprtree`] parses and evaluates expressions and enumerates compounds.
//! * [`atomize`] labels quantities with context clusters (TF-IDF + k-means).
//! * [`dbca`] measures atom/compound divergence and builds greedy splits.
//! * [`synth`] synthesizes problems from a decomposition/reformulation rule table.
//! * [`augment`] grows a training set by fragment substitution and ranking.
//! * [`cli`] drives the pipelines from the command line.

pub mod atomize;
pub mod augment;
pub mod cli;
pub mod corpus;
pub mod dbca;
pub mod exprtree;
pub mod num;
pub mod synth;

pub use num::{Rational, Real, Scalar};

/// `f64` instantiations of the generic numeric types.
pub type Distribution = dbca::Distribution<f64>;
pub type DivergenceReport = dbca::DivergenceReport<f64>;
pub type SplitConfig = dbca::SplitConfig<f64>;
pub type SplitAssignment = dbca::SplitAssignment<f64>;
pub type AtomLabeling = atomize::AtomLabeling<f64>;
pub type KTrial = atomize::KTrial<f64>;
pub type Tfidf = atomize::Tfidf<f64>;
pub type KMeansFit = atomize::KMeansFit<f64>;
