//! Hashed n-gram features.
//!
//! Text is tokenized exactly as in [`crate::textstats`], then unigrams and
//! (optionally) bigrams are hashed into a fixed number of buckets with
//! FNV-1a 64. Collisions are part of the scheme — two n-grams sharing a
//! bucket simply share a parameter — which keeps every downstream model a
//! fixed-size vector regardless of vocabulary.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::rng::fnv1a64;
use crate::textstats::word_tokens;
use crate::{Error, Result};

/// Feature-space shape shared by every model in a pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Number of hash buckets (the dimensionality of every model).
    pub num_buckets: u32,
    /// Hash `"w1 w2"` bigrams into the same bucket space as unigrams.
    pub include_bigrams: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            num_buckets: 10_000,
            include_bigrams: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_buckets < 2 {
            return Err(Error::InvalidConfig("num_buckets must be >= 2".into()));
        }
        Ok(())
    }
}

/// Bucket index for one n-gram string.
#[inline]
pub fn hash_bucket(ngram: &str, num_buckets: u32) -> u32 {
    (fnv1a64(ngram.as_bytes()) % u64::from(num_buckets)) as u32
}

/// Sparse bucket counts for one example.
///
/// Stored as a sorted map so iteration order — and therefore every
/// accumulation over it — is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedCounts {
    counts: BTreeMap<u32, u64>,
    total: u64,
}

impl HashedCounts {
    pub fn new() -> Self {
        HashedCounts::default()
    }

    #[inline]
    pub fn increment(&mut self, bucket: u32) {
        *self.counts.entry(bucket).or_insert(0) += 1;
        self.total += 1;
    }

    /// Sum of all bucket counts.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, bucket: u32) -> u64 {
        self.counts.get(&bucket).copied().unwrap_or(0)
    }

    /// Nonzero `(bucket, count)` pairs in ascending bucket order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&b, &c)| (b, c))
    }

    pub fn num_nonzero(&self) -> usize {
        self.counts.len()
    }

    /// Merge another count vector into this one (disjoint or not).
    pub fn add(&mut self, other: &HashedCounts) {
        for (bucket, count) in other.iter() {
            *self.counts.entry(bucket).or_insert(0) += count;
        }
        self.total += other.total;
    }

    /// Largest bucket index present, if any.
    pub fn max_bucket(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }
}

impl FromIterator<(u32, u64)> for HashedCounts {
    fn from_iter<T: IntoIterator<Item = (u32, u64)>>(iter: T) -> Self {
        let mut counts = HashedCounts::new();
        for (bucket, count) in iter {
            if count > 0 {
                *counts.counts.entry(bucket).or_insert(0) += count;
                counts.total += count;
            }
        }
        counts
    }
}

/// Hash a text into bucket counts: one count per token (unigram), plus one
/// per adjacent token pair (bigram, hashed as `"w1 w2"`) when enabled.
///
/// A text with `T` tokens contributes `T` unigram counts and `T - 1` bigram
/// counts (when `T >= 1` and bigrams are enabled). Empty text gives an empty
/// vector, which scores to a log weight of zero downstream.
pub fn featurize(text: &str, config: &FeatureConfig) -> Result<HashedCounts> {
    config.validate()?;
    let tokens = word_tokens(text);
    let mut counts = HashedCounts::new();
    for token in &tokens {
        counts.increment(hash_bucket(token, config.num_buckets));
    }
    if config.include_bigrams {
        for pair in tokens.windows(2) {
            let bigram = format!("{} {}", pair[0], pair[1]);
            counts.increment(hash_bucket(&bigram, config.num_buckets));
        }
    }
    Ok(counts)
}

/// One line of the feature dump format: an example id and its nonzero
/// `(bucket, count)` pairs in ascending bucket order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    /// Pairs `[bucket, count]`, ascending by bucket.
    pub b: Vec<(u32, u64)>,
}

impl FeatureRecord {
    pub fn from_counts(id: impl Into<String>, counts: &HashedCounts) -> Self {
        FeatureRecord {
            id: id.into(),
            b: counts.iter().collect(),
        }
    }

    pub fn into_counts(self) -> (String, HashedCounts) {
        (self.id, self.b.into_iter().collect())
    }
}

/// Write feature records as JSONL.
pub fn write_features<'a, W: Write>(
    writer: &mut W,
    records: impl IntoIterator<Item = &'a FeatureRecord>,
) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut *writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read feature records back from JSONL.
pub fn read_features<R: BufRead>(reader: R) -> Result<Vec<FeatureRecord>> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        records.push(
            serde_json::from_str(&line).map_err(|source| Error::MalformedRecord {
                line: index as u64 + 1,
                source,
            })?,
        );
    }
    Ok(records)
}
