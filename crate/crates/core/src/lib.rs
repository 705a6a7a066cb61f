//! Corpus scoring and subset selection.
//!
//! This crate selects a subset of a large raw text corpus so that the subset
//! looks like a (typically much smaller) target corpus. The pipeline:
//!
//! 1. [`corpus`] — read/write JSONL corpora, split documents into fixed-size
//!    word chunks, concatenate short neighbours.
//! 2. [`textstats`] — tokenize, compute per-example quality statistics, and
//!    drop boilerplate/garbage with a rule-based quality filter.
//! 3. [`features`] — hash unigrams and bigrams into a fixed number of buckets,
//!    producing sparse count vectors.
//! 4. [`ngram`] — fit bucket distributions on target and raw corpora and score
//!    examples by the log importance ratio `log target(x) - log raw(x)`.
//! 5. [`classifier`] — an alternative scorer: logistic regression on the same
//!    hashed features, optionally Platt-calibrated, with several selection
//!    rules built on its probabilities.
//! 6. [`selection`] — turn per-example scores into a subset of exactly `k`
//!    ids: Gumbel top-k (equivalent to sampling without replacement
//!    proportionally to softmax weights), plain top-k, noisy thresholding,
//!    uniform random, and per-source quota variants.
//! 7. [`metrics`] — KL divergence between bucket distributions and per-source
//!    histograms, for before/after reporting.
//!
//! Determinism is a hard requirement throughout: every random quantity is
//! derived from an explicit `u64` seed and the example id, so results are
//! reproducible across runs, machines, thread counts, and input order.

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod ngram;
pub mod rng;
pub mod selection;
pub mod textstats;

mod numeric;

pub use error::Error;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;
