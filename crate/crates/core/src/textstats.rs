//! Tokenization, per-example quality statistics, and rule-based filtering.
//!
//! The filter is a cheap, deterministic gate that removes boilerplate and
//! degenerate text before any model sees it: too short/long, too repetitive,
//! too little real content, or mostly numbers. Every rejection names the
//! first rule that failed, in a fixed evaluation order, so reports are
//! reproducible and easy to audit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::{Error, Result};

/// Embedded English stopword list, one lowercase word per line (179 entries).
pub const STOPWORDS_EN: &str = include_str!("../resources/stopwords_en.txt");

fn embedded_stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_EN.split_whitespace().collect())
}

/// Lowercased word/punctuation tokens.
///
/// A token is a maximal run of Unicode alphanumeric characters, or a maximal
/// run of other non-whitespace characters. `"Don't stop."` tokenizes to
/// `["don", "'", "t", "stop", "."]`. This is intentionally the same
/// tokenization the feature hasher uses, so quality statistics and features
/// describe the same token stream.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    // true = alphanumeric run, false = symbol run. Lowercasing happens before
    // classification because a few case mappings expand to multiple
    // characters of different classes (e.g. 'İ' becomes "i" plus a combining
    // mark); classifying the lowercased stream keeps each token single-class.
    let mut current_kind = false;
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        let kind = ch.is_alphanumeric();
        if !current.is_empty() && kind != current_kind {
            tokens.push(std::mem::take(&mut current));
        }
        current_kind = kind;
        current.push(ch);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Per-example statistics the quality rules are evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityStats {
    /// Token count (words and punctuation runs alike).
    pub word_len: usize,
    /// Frequency of the single most repeated token, as a fraction of
    /// `word_len`.
    pub repeat_ratio: f64,
    /// Fraction of tokens that are neither stopwords nor punctuation-only.
    pub informativeness: f64,
    /// Fraction of tokens that are numbers (digits, optionally with `.`/`,`
    /// group separators; `"3rd"` is not a number).
    pub numeric_ratio: f64,
}

impl QualityStats {
    fn empty() -> Self {
        QualityStats {
            word_len: 0,
            repeat_ratio: 0.0,
            informativeness: 0.0,
            numeric_ratio: 0.0,
        }
    }
}

fn is_punctuation_only(token: &str) -> bool {
    !token.chars().any(|c| c.is_alphanumeric())
}

fn is_numeric_token(token: &str) -> bool {
    // digits, optionally in groups separated by single '.' or ',' characters:
    // "7", "3.14", "1,000" — but not "3rd", ".5", or "1..2".
    let mut chars = token.chars().peekable();
    let mut saw_digit_in_group = false;
    if chars.peek().is_none() {
        return false;
    }
    for ch in chars {
        if ch.is_ascii_digit() {
            saw_digit_in_group = true;
        } else if ch == '.' || ch == ',' {
            if !saw_digit_in_group {
                return false;
            }
            saw_digit_in_group = false;
        } else {
            return false;
        }
    }
    saw_digit_in_group
}

/// Compute [`QualityStats`] for a text against a stopword set.
///
/// An empty token stream yields all-zero stats (which the length rule then
/// rejects). Every token counts toward exactly one of
/// informative / stopword / punctuation-only, so `informativeness` plus the
/// stopword-or-punctuation fraction is exactly 1 for non-empty text.
pub fn quality_stats(text: &str, stopwords: &HashSet<String>) -> QualityStats {
    let tokens = word_tokens(text);
    if tokens.is_empty() {
        return QualityStats::empty();
    }
    let total = tokens.len();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut informative = 0usize;
    let mut numeric = 0usize;
    for token in &tokens {
        *counts.entry(token.as_str()).or_insert(0) += 1;
        if !stopwords.contains(token.as_str()) && !is_punctuation_only(token) {
            informative += 1;
        }
        if is_numeric_token(token) {
            numeric += 1;
        }
    }
    let max_count = counts.values().copied().max().unwrap_or(0);
    QualityStats {
        word_len: total,
        repeat_ratio: max_count as f64 / total as f64,
        informativeness: informative as f64 / total as f64,
        numeric_ratio: numeric as f64 / total as f64,
    }
}

/// The four quality rules, in their fixed evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Length,
    Repeat,
    Informativeness,
    Numeric,
}

impl Rule {
    pub const ALL: [Rule; 4] = [
        Rule::Length,
        Rule::Repeat,
        Rule::Informativeness,
        Rule::Numeric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Length => "length",
            Rule::Repeat => "repeat",
            Rule::Informativeness => "informativeness",
            Rule::Numeric => "numeric",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds for the quality rules. All intervals are inclusive on both
/// ends; the numeric bound is a strict upper limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Accepted token-count range.
    pub word_len: (usize, usize),
    /// Accepted range for the most-repeated-token fraction.
    pub repeat_ratio: (f64, f64),
    /// Accepted range for the informative-token fraction.
    pub informativeness: (f64, f64),
    /// Strict upper bound on the number-token fraction.
    pub numeric_ratio_max: f64,
    /// Stopword set used by [`quality_stats`]. Not serialized; defaults to
    /// the embedded English list.
    #[serde(skip, default = "default_stopword_set")]
    pub stopwords: HashSet<String>,
}

fn default_stopword_set() -> HashSet<String> {
    embedded_stopwords().iter().map(|s| s.to_string()).collect()
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            word_len: (40, 500),
            repeat_ratio: (0.02, 0.2),
            informativeness: (0.3, 0.7),
            numeric_ratio_max: 0.2,
            stopwords: default_stopword_set(),
        }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.word_len.0 > self.word_len.1 {
            return Err(Error::InvalidConfig("word_len bounds inverted".into()));
        }
        for (name, (lo, hi)) in [
            ("repeat_ratio", self.repeat_ratio),
            ("informativeness", self.informativeness),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidConfig(format!("{name} bounds invalid")));
            }
        }
        if !self.numeric_ratio_max.is_finite() || self.numeric_ratio_max <= 0.0 {
            return Err(Error::InvalidConfig("numeric_ratio_max must be > 0".into()));
        }
        if self.stopwords.is_empty() {
            return Err(Error::InvalidConfig("stopword set is empty".into()));
        }
        Ok(())
    }
}

/// Evaluate the rules in fixed order (length, repeat, informativeness,
/// numeric) and return the first failing rule, or `None` if the example
/// passes.
pub fn passes_quality(stats: &QualityStats, config: &QualityConfig) -> Option<Rule> {
    if stats.word_len < config.word_len.0 || stats.word_len > config.word_len.1 {
        return Some(Rule::Length);
    }
    if stats.repeat_ratio < config.repeat_ratio.0 || stats.repeat_ratio > config.repeat_ratio.1 {
        return Some(Rule::Repeat);
    }
    if stats.informativeness < config.informativeness.0
        || stats.informativeness > config.informativeness.1
    {
        return Some(Rule::Informativeness);
    }
    if stats.numeric_ratio >= config.numeric_ratio_max {
        return Some(Rule::Numeric);
    }
    None
}

/// Outcome counts for a filtering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: u64,
    pub kept: u64,
    /// Rejections keyed by rule name; every rule is present, zero or not.
    pub rejected_by_rule: BTreeMap<String, u64>,
    /// `kept / total` (0 when the input was empty).
    pub keep_rate: f64,
}

/// Accumulates a [`FilterReport`] one verdict at a time, so filtering can
/// stream.
#[derive(Debug, Default)]
pub struct ReportBuilder {
    total: u64,
    kept: u64,
    rejected: BTreeMap<String, u64>,
}

impl ReportBuilder {
    pub fn new() -> Self {
        let mut rejected = BTreeMap::new();
        for rule in Rule::ALL {
            rejected.insert(rule.name().to_string(), 0);
        }
        ReportBuilder {
            total: 0,
            kept: 0,
            rejected,
        }
    }

    pub fn record(&mut self, verdict: Option<Rule>) {
        self.total += 1;
        match verdict {
            None => self.kept += 1,
            Some(rule) => *self.rejected.entry(rule.name().to_string()).or_insert(0) += 1,
        }
    }

    pub fn finish(self) -> FilterReport {
        let keep_rate = if self.total == 0 {
            0.0
        } else {
            self.kept as f64 / self.total as f64
        };
        FilterReport {
            total: self.total,
            kept: self.kept,
            rejected_by_rule: self.rejected,
            keep_rate,
        }
    }
}

/// Filter a corpus in memory, returning the kept examples and the report.
///
/// Streaming pipelines should instead call [`quality_stats`] /
/// [`passes_quality`] per record and feed a [`ReportBuilder`].
pub fn filter_corpus(
    examples: impl IntoIterator<Item = Example>,
    config: &QualityConfig,
) -> Result<(Vec<Example>, FilterReport)> {
    config.validate()?;
    let mut kept = Vec::new();
    let mut report = ReportBuilder::new();
    for example in examples {
        let stats = quality_stats(&example.text, &config.stopwords);
        let verdict = passes_quality(&stats, config);
        report.record(verdict);
        if verdict.is_none() {
            kept.push(example);
        }
    }
    Ok((kept, report.finish()))
}
