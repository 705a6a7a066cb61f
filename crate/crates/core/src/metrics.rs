//! Distribution-level evaluation of a selected subset.
//!
//! The question these metrics answer: after selection, does the kept subset
//! look more like the target corpus than the raw pool did? That is measured
//! as KL divergence between smoothed hashed-feature distributions, reported
//! alongside a per-source composition histogram.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::features::{featurize, FeatureConfig};
use crate::ngram::NgramDistribution;
use crate::numeric::neumaier_sum;
use crate::{Error, Result};

/// Default cap on how many examples feed a fitted distribution; large pools
/// are represented by a prefix sample of this size.
pub const DEFAULT_MAX_EXAMPLES: usize = 100_000;

/// Default smoothing mass used when fitting distributions for KL reporting,
/// chosen small enough not to distort head buckets while keeping every
/// bucket strictly positive.
pub const DEFAULT_METRICS_ALPHA: f64 = 1e-5;

/// `KL(p || q) = sum_b p_b * ln(p_b / q_b)` in nats.
///
/// Buckets with `p_b = 0` contribute nothing. A bucket with `p_b > 0` but
/// `q_b = 0` makes the divergence infinite and is reported as an error;
/// smooth `q` first if that can happen. `p` must be normalized to 1 within
/// 1e-6. Terms are accumulated with compensated summation and the result is
/// clamped up to 0 so rounding can never report a negative divergence.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::BucketCountMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::EmptyInput("kl_divergence needs at least one bucket".into()));
    }
    let total = neumaier_sum(p.iter().copied());
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { sum: total });
    }
    let mut terms = Vec::with_capacity(p.len());
    for (bucket, (&pb, &qb)) in p.iter().zip(q).enumerate() {
        if !(pb.is_finite() && qb.is_finite()) || pb < 0.0 || qb < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "probabilities must be finite and nonnegative (bucket {bucket})"
            )));
        }
        if pb == 0.0 {
            continue;
        }
        if qb == 0.0 {
            return Err(Error::ZeroProbability {
                context: format!("kl_divergence: bucket {bucket} has p > 0 but q = 0"),
            });
        }
        terms.push(pb * (pb / qb).ln());
    }
    Ok(neumaier_sum(terms.into_iter()).max(0.0))
}

/// Fit a smoothed hashed-feature distribution from a stream of examples.
///
/// At most `max_examples` are consumed (the rest of the stream is left
/// untouched); counts are pooled, turned into relative frequencies, and
/// smoothed with mass `alpha` so every bucket is strictly positive.
pub fn dataset_distribution<I>(
    examples: I,
    config: &FeatureConfig,
    max_examples: usize,
    alpha: f64,
) -> Result<NgramDistribution>
where
    I: IntoIterator<Item = Example>,
{
    if max_examples == 0 {
        return Err(Error::InvalidConfig("max_examples must be >= 1".into()));
    }
    let counts = examples
        .into_iter()
        .take(max_examples)
        .map(|example| featurize(&example.text, config))
        .collect::<Result<Vec<_>>>()?;
    let (_, distribution) = crate::ngram::fit(&counts, config.num_buckets)?;
    distribution.smooth(alpha)
}

/// How much closer to the target the selected set is than the raw pool:
/// `KL(target || raw) - KL(target || selected)`. Positive means selection
/// moved the subset toward the target.
pub fn kl_reduction(
    target: &NgramDistribution,
    raw: &NgramDistribution,
    selected: &NgramDistribution,
) -> Result<f64> {
    let before = kl_divergence(target.probs(), raw.probs())?;
    let after = kl_divergence(target.probs(), selected.probs())?;
    Ok(before - after)
}

/// Per-source composition of a set of examples: absolute counts and
/// fractions of the total. Fractions use compensated bookkeeping only in
/// the sense that they are computed from exact integer counts, so they sum
/// to 1 up to float division.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHistogram {
    pub counts: BTreeMap<String, u64>,
    pub fractions: BTreeMap<String, f64>,
    pub total: u64,
}

pub fn source_histogram<'a, I>(examples: I) -> Result<SourceHistogram>
where
    I: IntoIterator<Item = &'a Example>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for example in examples {
        *counts.entry(example.source.clone()).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyInput("source_histogram needs at least one example".into()));
    }
    let fractions = counts
        .iter()
        .map(|(source, &count)| (source.clone(), count as f64 / total as f64))
        .collect();
    Ok(SourceHistogram {
        counts,
        fractions,
        total,
    })
}

/// The full evaluation bundle a reporting run writes out as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// KL(target || raw pool), nats.
    pub kl_target_raw: f64,
    /// KL(target || selected subset), nats.
    pub kl_target_selected: f64,
    /// `kl_target_raw - kl_target_selected`; positive is improvement.
    pub kl_reduction: f64,
    /// Source composition of the selected subset.
    pub histogram: SourceHistogram,
}

impl MetricsReport {
    /// Compute the report from the three fitted distributions and the
    /// selected examples themselves.
    pub fn compute(
        target: &NgramDistribution,
        raw: &NgramDistribution,
        selected: &NgramDistribution,
        selected_examples: &[Example],
    ) -> Result<MetricsReport> {
        let kl_target_raw = kl_divergence(target.probs(), raw.probs())?;
        let kl_target_selected = kl_divergence(target.probs(), selected.probs())?;
        Ok(MetricsReport {
            kl_target_raw,
            kl_target_selected,
            kl_reduction: kl_target_raw - kl_target_selected,
            histogram: source_histogram(selected_examples)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example(id: &str, text: &str, source: &str) -> Example {
        Example {
            id: id.into(),
            text: text.into(),
            source: source.into(),
            meta: None,
        }
    }

    #[test]
    fn kl_of_point_mass_against_uniform_is_ln_two() {
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15, "{kl}");
    }

    #[test]
    fn kl_is_zero_on_identical_distributions() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_rejects_support_leaks_and_bad_inputs() {
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::ZeroProbability { .. })
        ));
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[0.5]),
            Err(Error::BucketCountMismatch { .. })
        ));
        assert!(matches!(
            kl_divergence(&[0.7, 0.7], &[0.5, 0.5]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(kl_divergence(&[], &[]).is_err());
        assert!(kl_divergence(&[1.0, f64::NAN].map(|x| x * 0.5), &[0.5, 0.5]).is_err());
    }

    #[test]
    fn kl_zero_times_log_zero_counts_as_zero() {
        // p has an empty bucket where q also does; only p's zero matters.
        let kl = kl_divergence(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(kl, 0.0);
    }

    #[test]
    fn dataset_distribution_matches_manual_fit() {
        let config = FeatureConfig {
            num_buckets: 50,
            include_bigrams: false,
        };
        let examples = vec![
            example("a", "alpha beta beta", "s"),
            example("b", "alpha gamma", "s"),
        ];
        let dist = dataset_distribution(examples.clone(), &config, 100, 1e-5).unwrap();
        assert!(dist.is_strictly_positive());
        assert_eq!(dist.fitted_from(), 5);
        assert_eq!(dist.smoothing_alpha(), 1e-5);

        // Same counts fitted by hand give the same smoothed probabilities.
        let counts: Vec<_> = examples
            .iter()
            .map(|e| featurize(&e.text, &config).unwrap())
            .collect();
        let (_, manual) = crate::ngram::fit(&counts, 50).unwrap();
        let manual = manual.smooth(1e-5).unwrap();
        assert_eq!(dist.probs(), manual.probs());
    }

    #[test]
    fn dataset_distribution_honors_the_example_cap() {
        let config = FeatureConfig {
            num_buckets: 50,
            include_bigrams: false,
        };
        let examples: Vec<Example> = (0..10)
            .map(|i| example(&format!("e{i}"), "words here", "s"))
            .collect();
        let capped = dataset_distribution(examples.clone(), &config, 3, 1e-5).unwrap();
        // 3 examples x 2 tokens.
        assert_eq!(capped.fitted_from(), 6);
        assert!(dataset_distribution(examples, &config, 0, 1e-5).is_err());
    }

    #[test]
    fn kl_reduction_is_positive_when_selection_matches_target() {
        let target = NgramDistribution::from_probs(vec![0.8, 0.1, 0.1], 0.0, 0).unwrap();
        let raw = NgramDistribution::from_probs(vec![0.2, 0.4, 0.4], 0.0, 0).unwrap();
        let selected = NgramDistribution::from_probs(vec![0.7, 0.15, 0.15], 0.0, 0).unwrap();
        let gain = kl_reduction(&target, &raw, &selected).unwrap();
        assert!(gain > 0.0, "{gain}");
        // Selecting the raw pool itself is exactly zero reduction.
        let same = kl_reduction(&target, &raw, &raw).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn source_histogram_counts_and_fractions_agree() {
        let examples = vec![
            example("1", "x", "web"),
            example("2", "x", "web"),
            example("3", "x", "books"),
            example("4", "x", "web"),
        ];
        let histogram = source_histogram(&examples).unwrap();
        assert_eq!(histogram.total, 4);
        assert_eq!(histogram.counts["web"], 3);
        assert_eq!(histogram.counts["books"], 1);
        assert_eq!(histogram.fractions["web"], 0.75);
        assert_eq!(histogram.fractions["books"], 0.25);
        assert!(source_histogram(&[]).is_err());
    }

    #[test]
    fn report_serializes_with_stable_field_names() {
        let target = NgramDistribution::from_probs(vec![0.9, 0.1], 0.0, 0).unwrap();
        let raw = NgramDistribution::from_probs(vec![0.5, 0.5], 0.0, 0).unwrap();
        let selected = NgramDistribution::from_probs(vec![0.8, 0.2], 0.0, 0).unwrap();
        let examples = vec![example("1", "x", "web"), example("2", "x", "books")];
        let report = MetricsReport::compute(&target, &raw, &selected, &examples).unwrap();
        assert!(
            (report.kl_reduction - (report.kl_target_raw - report.kl_target_selected)).abs()
                < 1e-15
        );
        let json = serde_json::to_string(&report).unwrap();
        for key in [
            "kl_target_raw",
            "kl_target_selected",
            "kl_reduction",
            "histogram",
            "fractions",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative_on_strictly_positive_pairs(
            raw_p in proptest::collection::vec(1u32..1000, 2..20),
            raw_q_seed in proptest::collection::vec(1u32..1000, 2..20),
        ) {
            let n = raw_p.len().min(raw_q_seed.len());
            let sum_p: f64 = raw_p[..n].iter().map(|&v| v as f64).sum();
            let sum_q: f64 = raw_q_seed[..n].iter().map(|&v| v as f64).sum();
            let p: Vec<f64> = raw_p[..n].iter().map(|&v| v as f64 / sum_p).collect();
            let q: Vec<f64> = raw_q_seed[..n].iter().map(|&v| v as f64 / sum_q).collect();
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!(kl.is_finite());
        }

        #[test]
        fn histogram_fractions_sum_to_one(
            sources in proptest::collection::vec(0u8..5, 1..60),
        ) {
            let examples: Vec<Example> = sources
                .iter()
                .enumerate()
                .map(|(i, s)| example(&format!("id{i}"), "t", &format!("src{s}")))
                .collect();
            let histogram = source_histogram(&examples).unwrap();
            let total: f64 = histogram.fractions.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let count_total: u64 = histogram.counts.values().sum();
            prop_assert_eq!(count_total, histogram.total);
        }
    }
}
