//! Subset selection: turn per-example scores into exactly `k` chosen ids.
//!
//! The main algorithm is the Gumbel top-k trick: add independent standard
//! Gumbel noise to each log weight and keep the `k` largest sums. This is
//! distributed exactly like sequential sampling without replacement with
//! probabilities proportional to `exp(log_weight)` — see [`swr_oracle`] for
//! the brute-force reference the tests compare against. Because the noise is
//! keyed by `(seed, id)`, selection is reproducible and independent of input
//! order, sharding, and thread count.
//!
//! Also here: plain top-k, uniform random selection, repeated noisy
//! thresholding driven by heavy-tailed (Lomax) noise, and per-group quota
//! selection.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::rng::{fnv1a64, shuffle, splitmix64, unit_open, SplitMix64};
use crate::{Error, Result};

pub use crate::rng::gumbel_noise;

/// Largest instance [`swr_oracle`] will enumerate (`N! / (N-k)!` sequences).
pub const MAX_ORACLE_ITEMS: usize = 8;

/// One selected example with the decomposition of its ranking score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub id: String,
    /// The input log weight.
    pub log_weight: f64,
    /// Gumbel noise for `(seed, id)`.
    pub gumbel: f64,
    /// `log_weight + gumbel`; selection keeps the k largest.
    pub final_score: f64,
}

/// One line of a selection output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub id: String,
    pub final_score: f64,
    pub log_weight: f64,
    pub source: String,
}

impl SelectionRecord {
    pub fn from_score(score: &SelectionScore, source: impl Into<String>) -> Self {
        SelectionRecord {
            id: score.id.clone(),
            final_score: score.final_score,
            log_weight: score.log_weight,
            source: source.into(),
        }
    }
}

/// Total ranking order: larger `final_score` first, ties by ascending id.
fn ranking_cmp(a: &SelectionScore, b: &SelectionScore) -> Ordering {
    b.final_score
        .total_cmp(&a.final_score)
        .then_with(|| a.id.cmp(&b.id))
}

fn check_k(k: usize, available: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if k > available {
        return Err(Error::KTooLarge { k, available });
    }
    Ok(())
}

fn score_one(seed: u64, id: &str, log_weight: f64) -> Result<SelectionScore> {
    if !log_weight.is_finite() {
        return Err(Error::NonFiniteScore { id: id.to_string() });
    }
    let gumbel = gumbel_noise(seed, id);
    let final_score = log_weight + gumbel;
    if !final_score.is_finite() {
        return Err(Error::NonFiniteScore { id: id.to_string() });
    }
    Ok(SelectionScore {
        id: id.to_string(),
        log_weight,
        gumbel,
        final_score,
    })
}

/// Select `k` of `N` weighted items by the Gumbel top-k rule.
///
/// Returns the winners in ranking order (descending `final_score`, ties by
/// id). Ids must be unique — corpus reading enforces that upstream — since
/// the noise is a function of `(seed, id)`.
///
/// Adding any constant to every log weight leaves the outcome unchanged:
/// only score differences matter, so unnormalized log weights are fine.
pub fn gumbel_topk(weights: &[(String, f64)], k: usize, seed: u64) -> Result<Vec<SelectionScore>> {
    check_k(k, weights.len())?;
    let mut scored = weights
        .iter()
        .map(|(id, w)| score_one(seed, id, *w))
        .collect::<Result<Vec<_>>>()?;
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, ranking_cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(ranking_cmp);
    Ok(scored)
}

/// Bounded-memory Gumbel top-k over a stream: holds at most `k` candidates.
///
/// Produces exactly the same winners as [`gumbel_topk`] on the same
/// `(weights, k, seed)`, in the same order. Partial heaps built on shards of
/// the stream can be [`merge`](Self::merge)d; the result is independent of
/// how the stream was split.
#[derive(Debug)]
pub struct StreamingTopK {
    k: usize,
    seed: u64,
    /// Max-heap under reversed ranking order, so the peek is the currently
    /// weakest member and eviction is O(log k).
    heap: BinaryHeap<WorstFirst>,
    pushed: usize,
}

#[derive(Debug)]
struct WorstFirst(SelectionScore);

impl PartialEq for WorstFirst {
    fn eq(&self, other: &Self) -> bool {
        ranking_cmp(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for WorstFirst {}
impl PartialOrd for WorstFirst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for WorstFirst {
    fn cmp(&self, other: &Self) -> Ordering {
        // Ranking order puts the best entry first (Less), so the heap's
        // maximum — its peek — is the ranking-worst entry.
        ranking_cmp(&self.0, &other.0)
    }
}

impl StreamingTopK {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        Ok(StreamingTopK {
            k,
            seed,
            heap: BinaryHeap::with_capacity(k + 1),
            pushed: 0,
        })
    }

    pub fn push(&mut self, id: &str, log_weight: f64) -> Result<()> {
        let scored = score_one(self.seed, id, log_weight)?;
        self.pushed += 1;
        self.offer(scored);
        Ok(())
    }

    fn offer(&mut self, scored: SelectionScore) {
        if self.heap.len() < self.k {
            self.heap.push(WorstFirst(scored));
            return;
        }
        // Full: keep the newcomer only if it outranks the current worst.
        if let Some(worst) = self.heap.peek() {
            if ranking_cmp(&scored, &worst.0) == Ordering::Less {
                self.heap.pop();
                self.heap.push(WorstFirst(scored));
            }
        }
    }

    /// Fold another shard's candidates into this heap. Both sides must have
    /// been built with the same `k` and seed.
    pub fn merge(&mut self, other: StreamingTopK) -> Result<()> {
        if other.k != self.k || other.seed != self.seed {
            return Err(Error::InvalidConfig(
                "cannot merge top-k heaps with different k or seed".into(),
            ));
        }
        self.pushed += other.pushed - other.heap.len();
        for entry in other.heap {
            self.pushed += 1;
            self.offer(entry.0);
        }
        Ok(())
    }

    /// Number of items pushed so far (across merges).
    pub fn len_pushed(&self) -> usize {
        self.pushed
    }

    pub fn finish(self) -> Result<Vec<SelectionScore>> {
        check_k(self.k, self.pushed)?;
        let mut winners: Vec<SelectionScore> = self.heap.into_iter().map(|e| e.0).collect();
        winners.sort_unstable_by(ranking_cmp);
        Ok(winners)
    }
}

/// Deterministic top-k by raw value: descending, ties by ascending id.
pub fn topk_select(values: &[(String, f64)], k: usize) -> Result<Vec<(String, f64)>> {
    check_k(k, values.len())?;
    for (id, v) in values {
        if !v.is_finite() {
            return Err(Error::NonFiniteScore { id: id.clone() });
        }
    }
    let mut items = values.to_vec();
    let cmp = |a: &(String, f64), b: &(String, f64)| {
        b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
    };
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, cmp);
        items.truncate(k);
    }
    items.sort_unstable_by(cmp);
    Ok(items)
}

/// Uniform sampling of `k` ids without replacement, via a seeded shuffle.
///
/// The input is sorted before shuffling, so the outcome depends only on the
/// id *set* and the seed, not on input order. Returns ids in ascending
/// order.
pub fn random_select(ids: &[String], k: usize, seed: u64) -> Result<Vec<String>> {
    check_k(k, ids.len())?;
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    shuffle(&mut sorted, &mut SplitMix64::new(seed));
    sorted.truncate(k);
    sorted.sort_unstable();
    Ok(sorted)
}

/// Heavy-tailed threshold noise: a Lomax (Pareto II) variate
/// `beta = (1 - u)^(-1/shape) - 1` for the draw keyed by
/// `(seed, id, pass)`.
///
/// An example with probability score `rho` is accepted in a pass iff
/// `rho > 1 - beta`, which happens with probability
/// `(1 + (1 - rho))^(-shape)`: even `rho = 0` has a small chance
/// (`2^-shape`) and `rho` near 1 is likely but not certain, so repeated
/// passes diversify the pool instead of deterministically creaming the top.
pub fn threshold_noise(seed: u64, id: &str, pass: u64, shape: f64) -> f64 {
    let stream = splitmix64(splitmix64(seed ^ fnv1a64(id.as_bytes())) ^ pass);
    let u = unit_open(stream);
    (1.0 - u).powf(-1.0 / shape) - 1.0
}

/// Analytic per-pass acceptance probability of the noisy threshold rule.
pub fn threshold_accept_probability(rho: f64, shape: f64) -> f64 {
    (1.0 + (1.0 - rho)).powf(-shape)
}

/// Repeatedly apply the noisy threshold rule until at least `k` examples
/// are accepted, then uniformly subsample the accepted pool to exactly `k`.
///
/// Each pass draws fresh noise for every not-yet-accepted example. Inputs
/// are `(id, rho)` with `rho` in `[0, 1]`. Returns ids in ascending order.
pub fn noisy_threshold_select(
    probs: &[(String, f64)],
    k: usize,
    shape: f64,
    seed: u64,
) -> Result<Vec<String>> {
    check_k(k, probs.len())?;
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "shape must be positive and finite, got {shape}"
        )));
    }
    for (id, rho) in probs {
        if !rho.is_finite() || !(0.0..=1.0).contains(rho) {
            return Err(Error::Unscorable {
                id: id.clone(),
                reason: format!("probability {rho} outside [0, 1]"),
            });
        }
    }
    let mut accepted: Vec<String> = Vec::with_capacity(k);
    let mut remaining: Vec<&(String, f64)> = probs.iter().collect();
    let mut pass: u64 = 0;
    while accepted.len() < k {
        remaining.retain(|(id, rho)| {
            let beta = threshold_noise(seed, id, pass, shape);
            if *rho > 1.0 - beta {
                accepted.push(id.clone());
                false
            } else {
                true
            }
        });
        pass += 1;
    }
    if accepted.len() > k {
        let subsample_seed = splitmix64(seed ^ fnv1a64(b"noisy-threshold-subsample"));
        return random_select(&accepted, k, subsample_seed);
    }
    accepted.sort_unstable();
    Ok(accepted)
}

/// Exact distribution of sequential sampling without replacement: every
/// ordered `k`-sequence and its probability
/// `prod_m w[i_m] / (W - w[i_1] - ... - w[i_{m-1}])`.
///
/// Brute force — `N! / (N-k)!` sequences — and deliberately capped at
/// [`MAX_ORACLE_ITEMS`]; this exists as the ground truth that the Gumbel
/// top-k tests measure against.
pub fn swr_oracle(weights: &[f64], k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = weights.len();
    if n > MAX_ORACLE_ITEMS {
        return Err(Error::OracleTooLarge {
            n,
            max: MAX_ORACLE_ITEMS,
        });
    }
    check_k(k, n)?;
    for &w in weights {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "oracle weights must be positive and finite, got {w}"
            )));
        }
    }
    let total: f64 = weights.iter().sum();
    let mut sequences = Vec::new();
    let mut prefix = Vec::with_capacity(k);
    let mut used = vec![false; n];
    fn recurse(
        weights: &[f64],
        k: usize,
        remaining_total: f64,
        prefix_prob: f64,
        prefix: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if prefix.len() == k {
            out.push((prefix.clone(), prefix_prob));
            return;
        }
        for i in 0..weights.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            prefix.push(i);
            recurse(
                weights,
                k,
                remaining_total - weights[i],
                prefix_prob * weights[i] / remaining_total,
                prefix,
                used,
                out,
            );
            prefix.pop();
            used[i] = false;
        }
    }
    recurse(weights, k, total, 1.0, &mut prefix, &mut used, &mut sequences);
    Ok(sequences)
}

/// How each group's sub-selection is made in [`quota_select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaStrategy {
    /// Gumbel top-k on log weights within each group.
    Gumbel,
    /// Uniform without replacement within each group.
    Random,
}

/// A selection candidate carrying its quota group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaCandidate {
    pub id: String,
    pub log_weight: f64,
    pub group: String,
}

/// Select exactly `round(quota[g] * k)` items from each group `g` (any
/// rounding residue goes to the largest-quota group), using the given
/// per-group strategy.
///
/// Quota fractions must sum to 1 (within 1e-9). Candidates in groups
/// without a quota are ignored. With [`QuotaStrategy::Random`], the
/// `gumbel`/`final_score` fields of the result are zero.
pub fn quota_select(
    candidates: &[QuotaCandidate],
    quotas: &BTreeMap<String, f64>,
    k: usize,
    seed: u64,
    strategy: QuotaStrategy,
) -> Result<Vec<SelectionScore>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if quotas.is_empty() {
        return Err(Error::InvalidConfig("quota map is empty".into()));
    }
    for (group, &q) in quotas {
        if !q.is_finite() || !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidConfig(format!(
                "quota for group {group:?} must be in [0, 1], got {q}"
            )));
        }
    }
    let sum: f64 = quotas.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::QuotaSum { sum });
    }

    // Integer allocation: round each share, then push the residue onto the
    // largest-quota group (ties broken by group name for determinism).
    let mut allocation: BTreeMap<&str, i64> = quotas
        .iter()
        .map(|(g, &q)| (g.as_str(), (q * k as f64).round() as i64))
        .collect();
    let allocated: i64 = allocation.values().sum();
    let residue = k as i64 - allocated;
    if residue != 0 {
        let largest = quotas
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then_with(|| b.0.cmp(a.0)))
            .map(|(g, _)| g.as_str())
            .expect("quotas is nonempty");
        *allocation.get_mut(largest).expect("key exists") += residue;
    }

    let mut by_group: HashMap<&str, Vec<&QuotaCandidate>> = HashMap::new();
    for candidate in candidates {
        if quotas.contains_key(&candidate.group) {
            by_group
                .entry(candidate.group.as_str())
                .or_default()
                .push(candidate);
        }
    }

    let mut selected = Vec::with_capacity(k);
    for (group, &need) in &allocation {
        if need < 0 {
            return Err(Error::InvalidConfig(format!(
                "quota allocation for group {group:?} is negative"
            )));
        }
        let need = need as usize;
        if need == 0 {
            continue;
        }
        let members = by_group.get(group).map(Vec::as_slice).unwrap_or(&[]);
        if members.len() < need {
            return Err(Error::InfeasibleQuota {
                group: group.to_string(),
                need,
                have: members.len(),
            });
        }
        match strategy {
            QuotaStrategy::Gumbel => {
                let weights: Vec<(String, f64)> = members
                    .iter()
                    .map(|c| (c.id.clone(), c.log_weight))
                    .collect();
                selected.extend(gumbel_topk(&weights, need, seed)?);
            }
            QuotaStrategy::Random => {
                let ids: Vec<String> = members.iter().map(|c| c.id.clone()).collect();
                let weight_of: HashMap<&str, f64> = members
                    .iter()
                    .map(|c| (c.id.as_str(), c.log_weight))
                    .collect();
                let group_seed = splitmix64(seed ^ fnv1a64(group.as_bytes()));
                for id in random_select(&ids, need, group_seed)? {
                    let log_weight = weight_of[id.as_str()];
                    selected.push(SelectionScore {
                        id,
                        log_weight,
                        gumbel: 0.0,
                        final_score: 0.0,
                    });
                }
            }
        }
    }
    selected.sort_unstable_by(ranking_cmp);
    Ok(selected)
}
