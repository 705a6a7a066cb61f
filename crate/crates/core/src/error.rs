//! Error type shared by all modules in this crate.

use thiserror::Error;

/// Everything that can go wrong across corpus I/O, model fitting, scoring,
/// and selection.
///
/// Variants carry enough context (ids, line numbers, sizes) for a caller to
/// report actionable messages without re-deriving state.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure (open/read/write).
    #[error("i/o error")]
    Io(#[from] std::io::Error),

    /// A JSONL line failed to parse; `line` is 1-based.
    #[error("malformed record at line {line}")]
    MalformedRecord {
        line: u64,
        #[source]
        source: serde_json::Error,
    },

    /// JSON (de)serialization failure outside line-oriented corpus reading.
    #[error("json error")]
    Json(#[from] serde_json::Error),

    /// Two records in one corpus share an id.
    #[error("duplicate example id {id:?} at line {line}")]
    DuplicateId { id: String, line: u64 },

    /// A required input (corpus, class, distribution) had no usable content.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A configuration value is out of its documented range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A hashed count landed outside the configured bucket range.
    #[error("bucket {bucket} out of range for {num_buckets} buckets")]
    BucketOutOfRange { bucket: u32, num_buckets: u32 },

    /// Two artifacts were built with different bucket counts.
    #[error("bucket count mismatch: {left} vs {right}")]
    BucketCountMismatch { left: usize, right: usize },

    /// An operation that divides by probabilities got a zero bucket.
    #[error("distribution has a zero-probability bucket ({context}); smooth it first")]
    ZeroProbability { context: String },

    /// A probability vector does not sum to 1.
    #[error("distribution not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },

    /// Selection asked for more items than exist.
    #[error("cannot select {k} items from {available} candidates")]
    KTooLarge { k: usize, available: usize },

    /// A score or weight was NaN/infinite where a finite value is required.
    #[error("non-finite score for example {id:?}")]
    NonFiniteScore { id: String },

    /// Exhaustive enumeration was asked for on too large an instance.
    #[error("oracle supports at most {max} items, got {n}")]
    OracleTooLarge { n: usize, max: usize },

    /// Per-group quotas are inconsistent or cannot be met by the candidates.
    #[error("infeasible quota for group {group:?}: need {need}, have {have}")]
    InfeasibleQuota {
        group: String,
        need: usize,
        have: usize,
    },

    /// Quota fractions do not sum to 1.
    #[error("quota fractions sum to {sum}, expected 1")]
    QuotaSum { sum: f64 },

    /// A model file has the wrong magic, a truncated payload, or an
    /// inconsistent header.
    #[error("invalid model file: {0}")]
    InvalidModel(String),

    /// An example could not be scored (e.g. empty feature vector where a
    /// normalized vector is required).
    #[error("unscorable example {id:?}: {reason}")]
    Unscorable { id: String, reason: String },
}

impl Error {
    /// Stable machine-readable discriminant for CLI error envelopes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::MalformedRecord { .. } => "malformed_record",
            Error::Json(_) => "json",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::EmptyInput(_) => "empty_input",
            Error::InvalidConfig(_) => "invalid_config",
            Error::BucketOutOfRange { .. } => "bucket_out_of_range",
            Error::BucketCountMismatch { .. } => "bucket_count_mismatch",
            Error::ZeroProbability { .. } => "zero_probability",
            Error::NotNormalized { .. } => "not_normalized",
            Error::KTooLarge { .. } => "k_too_large",
            Error::NonFiniteScore { .. } => "non_finite_score",
            Error::OracleTooLarge { .. } => "oracle_too_large",
            Error::InfeasibleQuota { .. } => "infeasible_quota",
            Error::QuotaSum { .. } => "quota_sum",
            Error::InvalidModel(_) => "invalid_model",
            Error::Unscorable { .. } => "unscorable",
        }
    }
}
