//! Bucket distributions and importance-weight scoring.
//!
//! Two distributions over the hashed feature space — one fitted on the
//! target corpus, one on the raw corpus — turn an example's counts into a
//! log importance weight:
//!
//! ```text
//! log_weight(z) = sum_b z[b] * (ln target[b] - ln raw[b])
//! ```
//!
//! Both distributions must be smoothed (strictly positive everywhere) before
//! scoring, otherwise an unseen bucket would produce an infinite weight.
//!
//! Scores accumulate in Q64.64 fixed point (see [`crate::numeric`]): integer
//! addition is associative, so an example's score never depends on how its
//! counts are grouped, and splitting a count vector into disjoint parts
//! splits the score exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::HashedCounts;
use crate::numeric::{from_fixed, neumaier_sum, to_fixed};
use crate::{Error, Result};

/// Magic bytes opening an n-gram model file.
pub const NGRAM_MODEL_MAGIC: &[u8] = b"NGMODEL1";

/// A log importance weight; plain `f64` wrapped for signature clarity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// A probability distribution over hash buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramDistribution {
    probs: Vec<f64>,
    smoothing_alpha: f64,
    fitted_from: u64,
    min_prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    num_buckets: u32,
    smoothing_alpha: f64,
    fitted_from: u64,
}

impl NgramDistribution {
    /// Build from an explicit probability vector, validating shape and
    /// normalization (sum within 1e-6 of 1; entries finite and nonnegative).
    pub fn from_probs(probs: Vec<f64>, smoothing_alpha: f64, fitted_from: u64) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidConfig(
                "distribution needs at least 2 buckets".into(),
            ));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "probabilities must be finite and nonnegative, got {bad}"
            )));
        }
        let sum = neumaier_sum(probs.iter().copied());
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized { sum });
        }
        let min_prob = probs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(NgramDistribution {
            probs,
            smoothing_alpha,
            fitted_from,
            min_prob,
        })
    }

    pub fn num_buckets(&self) -> u32 {
        self.probs.len() as u32
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, bucket: u32) -> f64 {
        self.probs[bucket as usize]
    }

    /// Smoothing mixed in so far (0 for a raw MLE fit).
    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    /// Total n-gram count this distribution was estimated from.
    pub fn fitted_from(&self) -> u64 {
        self.fitted_from
    }

    /// True when every bucket has nonzero probability (safe to take logs).
    pub fn is_strictly_positive(&self) -> bool {
        self.min_prob > 0.0
    }

    /// Mix with the uniform distribution: `(1 - alpha) * p + alpha / V`.
    ///
    /// `alpha` must lie in `[0, 1)`. Every entry of the result is at least
    /// `alpha / V`, and normalization is preserved to within 1e-12.
    pub fn smooth(&self, alpha: f64) -> Result<NgramDistribution> {
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "smoothing alpha must be in [0, 1), got {alpha}"
            )));
        }
        let uniform = alpha / self.probs.len() as f64;
        let probs: Vec<f64> = self
            .probs
            .iter()
            .map(|&p| (1.0 - alpha) * p + uniform)
            .collect();
        let min_prob = probs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(NgramDistribution {
            probs,
            smoothing_alpha: alpha,
            fitted_from: self.fitted_from,
            min_prob,
        })
    }

    /// Write the model: magic, JSON header line, then the probability table
    /// as little-endian `f64`s. The float bits roundtrip exactly.
    pub fn save<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(NGRAM_MODEL_MAGIC)?;
        writer.write_all(b"\n")?;
        let header = ModelHeader {
            num_buckets: self.num_buckets(),
            smoothing_alpha: self.smoothing_alpha,
            fitted_from: self.fitted_from,
        };
        serde_json::to_writer(&mut *writer, &header)?;
        writer.write_all(b"\n")?;
        for &p in &self.probs {
            writer.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.save(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    /// Read a model written by [`save`](Self::save), validating magic,
    /// header/payload consistency, and normalization.
    pub fn load<R: Read>(reader: &mut R) -> Result<Self> {
        let mut magic = [0u8; 9];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::InvalidModel("file too short for magic".into()))?;
        if &magic[..8] != NGRAM_MODEL_MAGIC || magic[8] != b'\n' {
            return Err(Error::InvalidModel("bad magic".into()));
        }
        let header: ModelHeader = read_header_line(reader)?;
        let mut probs = vec![0.0f64; header.num_buckets as usize];
        let mut buf = [0u8; 8];
        for p in probs.iter_mut() {
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::InvalidModel("truncated probability table".into()))?;
            *p = f64::from_le_bytes(buf);
        }
        if reader.read(&mut buf)? != 0 {
            return Err(Error::InvalidModel("trailing bytes after table".into()));
        }
        NgramDistribution::from_probs(probs, header.smoothing_alpha, header.fitted_from)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self> {
        NgramDistribution::load(&mut BufReader::new(File::open(path)?))
    }
}

/// Read one `\n`-terminated JSON header line from a binary stream.
pub(crate) fn read_header_line<T: serde::de::DeserializeOwned, R: Read>(
    reader: &mut R,
) -> Result<T> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        reader
            .read_exact(&mut byte)
            .map_err(|_| Error::InvalidModel("truncated header".into()))?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 1 << 16 {
            return Err(Error::InvalidModel("header line too long".into()));
        }
    }
    serde_json::from_slice(&line).map_err(|e| Error::InvalidModel(format!("bad header: {e}")))
}

pub(crate) use read_header_line as read_model_header;

/// Add one example's counts into a dense accumulator.
pub fn add_counts_into(accumulator: &mut [u64], counts: &HashedCounts) -> Result<()> {
    let num_buckets = accumulator.len() as u32;
    for (bucket, count) in counts.iter() {
        let slot = accumulator
            .get_mut(bucket as usize)
            .ok_or(Error::BucketOutOfRange { bucket, num_buckets })?;
        *slot += count;
    }
    Ok(())
}

/// Sum sparse count vectors into a dense `num_buckets`-long count table.
pub fn accumulate_counts<'a>(
    counts: impl IntoIterator<Item = &'a HashedCounts>,
    num_buckets: u32,
) -> Result<Vec<u64>> {
    let mut accumulator = vec![0u64; num_buckets as usize];
    for c in counts {
        if let Some(bucket) = c.max_bucket() {
            if bucket >= num_buckets {
                return Err(Error::BucketOutOfRange {
                    bucket,
                    num_buckets,
                });
            }
        }
        add_counts_into(&mut accumulator, c)?;
    }
    Ok(accumulator)
}

/// Maximum-likelihood distribution from a dense count table:
/// `p[b] = count[b] / total`. Errors if the table is all zero.
pub fn mle(counts: &[u64]) -> Result<NgramDistribution> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput(
            "cannot fit a distribution from zero counts".into(),
        ));
    }
    let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    NgramDistribution::from_probs(probs, 0.0, total)
}

/// Fit on a stream of per-example counts; returns the raw count table and
/// the unsmoothed MLE distribution.
pub fn fit<'a>(
    counts: impl IntoIterator<Item = &'a HashedCounts>,
    num_buckets: u32,
) -> Result<(Vec<u64>, NgramDistribution)> {
    let table = accumulate_counts(counts, num_buckets)?;
    let dist = mle(&table)?;
    Ok((table, dist))
}

/// Shared fixed-point accumulation used by [`log_weight`] and
/// [`WeightScorer`]; exact over i128, rounded to `f64` once at the end.
fn accumulate_score(
    counts: &HashedCounts,
    term_for_bucket: impl Fn(u32) -> i128,
) -> i128 {
    let mut sum = 0i128;
    for (bucket, count) in counts.iter() {
        sum += term_for_bucket(bucket) * count as i128;
    }
    sum
}

fn check_scorable(
    counts: &HashedCounts,
    target: &NgramDistribution,
    raw: &NgramDistribution,
) -> Result<()> {
    if target.num_buckets() != raw.num_buckets() {
        return Err(Error::BucketCountMismatch {
            left: target.probs.len(),
            right: raw.probs.len(),
        });
    }
    if !target.is_strictly_positive() {
        return Err(Error::ZeroProbability {
            context: "target distribution".into(),
        });
    }
    if !raw.is_strictly_positive() {
        return Err(Error::ZeroProbability {
            context: "raw distribution".into(),
        });
    }
    if let Some(bucket) = counts.max_bucket() {
        if bucket >= target.num_buckets() {
            return Err(Error::BucketOutOfRange {
                bucket,
                num_buckets: target.num_buckets(),
            });
        }
    }
    Ok(())
}

/// Log importance weight of one count vector under a target/raw pair.
///
/// Empty counts score exactly 0. Equal to [`WeightScorer::score`] bit for
/// bit; use the scorer when scoring many examples against one model pair.
pub fn log_weight(
    counts: &HashedCounts,
    target: &NgramDistribution,
    raw: &NgramDistribution,
) -> Result<LogWeight> {
    check_scorable(counts, target, raw)?;
    let sum = accumulate_score(counts, |b| {
        to_fixed(target.prob(b).ln() - raw.prob(b).ln())
    });
    Ok(LogWeight(from_fixed(sum)))
}

/// Precomputed per-bucket log ratios for bulk scoring.
pub struct WeightScorer {
    fixed_ln_ratio: Vec<i128>,
}

impl WeightScorer {
    pub fn new(target: &NgramDistribution, raw: &NgramDistribution) -> Result<Self> {
        check_scorable(&HashedCounts::new(), target, raw)?;
        let fixed_ln_ratio = target
            .probs
            .iter()
            .zip(&raw.probs)
            .map(|(&t, &r)| to_fixed(t.ln() - r.ln()))
            .collect();
        Ok(WeightScorer { fixed_ln_ratio })
    }

    pub fn num_buckets(&self) -> u32 {
        self.fixed_ln_ratio.len() as u32
    }

    pub fn score(&self, counts: &HashedCounts) -> Result<LogWeight> {
        if let Some(bucket) = counts.max_bucket() {
            if bucket as usize >= self.fixed_ln_ratio.len() {
                return Err(Error::BucketOutOfRange {
                    bucket,
                    num_buckets: self.num_buckets(),
                });
            }
        }
        let sum = accumulate_score(counts, |b| self.fixed_ln_ratio[b as usize]);
        Ok(LogWeight(from_fixed(sum)))
    }
}
