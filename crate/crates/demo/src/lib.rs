//! Browser playground for the selection engine.
//!
//! Compiled to WebAssembly with `wasm-bindgen`, this crate backs the single
//! static page in `www/` with three interactive operations:
//!
//! - [`quality_check`] — per-rule quality statistics for a pasted text;
//! - [`selection_demo`] — fit target/raw hashed n-gram models on pasted
//!   corpora, score every raw line, and run a seeded Gumbel top-k selection;
//! - [`threshold_curve`] — analytic vs empirical acceptance rates of the
//!   heavy-tailed noisy threshold rule, for plotting.
//!
//! Every function takes plain strings/numbers and returns a JSON string, so
//! the page needs no generated TypeScript glue beyond the standard
//! `wasm-bindgen` loader. All functions are deterministic in their inputs:
//! the same text, `k`, and seed always produce the same JSON.
//!
//! The crate also builds natively (the exports are ordinary functions there),
//! which is how its tests run.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use datasieve_core::features::{featurize, FeatureConfig};
use datasieve_core::metrics::kl_divergence;
use datasieve_core::ngram::{fit, WeightScorer};
use datasieve_core::selection::{
    gumbel_topk, threshold_accept_probability, threshold_noise,
};
use datasieve_core::textstats::{passes_quality, quality_stats, QualityConfig, Rule};

/// Bucket count for the in-browser models: small enough that fitting on a
/// pasted corpus is instant, large enough to separate a few domains.
const DEMO_BUCKETS: u32 = 512;
/// Smoothing applied to both fitted distributions before scoring.
const DEMO_ALPHA: f64 = 1e-4;
/// Longest excerpt of a raw line echoed back to the page.
const EXCERPT_CHARS: usize = 90;

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value)
        .unwrap_or_else(|error| format!(r#"{{"error":"serialization: {error}"}}"#))
}

fn error_json(message: impl std::fmt::Display) -> String {
    json(&serde_json::json!({ "error": message.to_string() }))
}

// --- quality_check ------------------------------------------------------

#[derive(Serialize)]
struct RuleReport {
    rule: &'static str,
    value: f64,
    bounds: String,
    ok: bool,
}

#[derive(Serialize)]
struct QualityReport {
    word_len: usize,
    repeat_ratio: f64,
    informativeness: f64,
    numeric_ratio: f64,
    rules: Vec<RuleReport>,
    /// First failing rule in evaluation order, or null if the text passes.
    rejected_by: Option<&'static str>,
    passes: bool,
}

/// Quality statistics and per-rule verdicts for one text, as JSON.
#[wasm_bindgen]
pub fn quality_check(text: &str) -> String {
    let config = QualityConfig::default();
    let stats = quality_stats(text, &config.stopwords);
    let verdict = passes_quality(&stats, &config);
    let rules = vec![
        RuleReport {
            rule: Rule::Length.name(),
            value: stats.word_len as f64,
            bounds: format!("[{}, {}]", config.word_len.0, config.word_len.1),
            ok: stats.word_len >= config.word_len.0 && stats.word_len <= config.word_len.1,
        },
        RuleReport {
            rule: Rule::Repeat.name(),
            value: stats.repeat_ratio,
            bounds: format!("[{}, {}]", config.repeat_ratio.0, config.repeat_ratio.1),
            ok: stats.repeat_ratio >= config.repeat_ratio.0
                && stats.repeat_ratio <= config.repeat_ratio.1,
        },
        RuleReport {
            rule: Rule::Informativeness.name(),
            value: stats.informativeness,
            bounds: format!("[{}, {}]", config.informativeness.0, config.informativeness.1),
            ok: stats.informativeness >= config.informativeness.0
                && stats.informativeness <= config.informativeness.1,
        },
        RuleReport {
            rule: Rule::Numeric.name(),
            value: stats.numeric_ratio,
            bounds: format!("< {}", config.numeric_ratio_max),
            ok: stats.numeric_ratio < config.numeric_ratio_max,
        },
    ];
    json(&QualityReport {
        word_len: stats.word_len,
        repeat_ratio: stats.repeat_ratio,
        informativeness: stats.informativeness,
        numeric_ratio: stats.numeric_ratio,
        rules,
        rejected_by: verdict.map(Rule::name),
        passes: verdict.is_none(),
    })
}

// --- selection_demo -----------------------------------------------------

#[derive(Serialize)]
struct ScoredLine {
    index: usize,
    excerpt: String,
    log_weight: f64,
    gumbel: f64,
    final_score: f64,
    selected: bool,
    /// 1-based position among the winners, null for unselected lines.
    rank: Option<usize>,
}

#[derive(Serialize)]
struct SelectionOutput {
    num_lines: usize,
    k: usize,
    seed: u32,
    /// KL(target model || raw model): how far apart the two corpora are.
    kl_target_raw: f64,
    lines: Vec<ScoredLine>,
}

fn excerpt(line: &str) -> String {
    if line.chars().count() <= EXCERPT_CHARS {
        return line.to_string();
    }
    let cut: String = line.chars().take(EXCERPT_CHARS).collect();
    format!("{cut}…")
}

fn fit_smoothed(
    texts: &[&str],
    features: &FeatureConfig,
) -> Result<datasieve_core::ngram::NgramDistribution, datasieve_core::Error> {
    let counts = texts
        .iter()
        .map(|text| featurize(text, features))
        .collect::<Result<Vec<_>, _>>()?;
    let (_, distribution) = fit(&counts, features.num_buckets)?;
    distribution.smooth(DEMO_ALPHA)
}

/// Fit a target model on `target_text`, a raw model on the nonempty lines of
/// `raw_text`, score every raw line by its log importance weight, and select
/// `k` lines by seeded Gumbel top-k. Returns the full per-line breakdown
/// (weight, noise, total, rank) as JSON.
#[wasm_bindgen]
pub fn selection_demo(target_text: &str, raw_text: &str, k: usize, seed: u32) -> String {
    let features = FeatureConfig {
        num_buckets: DEMO_BUCKETS,
        include_bigrams: true,
    };
    let raw_lines: Vec<&str> = raw_text
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .collect();
    if raw_lines.is_empty() {
        return error_json("the raw corpus needs at least one nonempty line");
    }
    if k == 0 || k > raw_lines.len() {
        return error_json(format!(
            "k must be between 1 and the number of raw lines ({})",
            raw_lines.len()
        ));
    }
    if target_text.trim().is_empty() {
        return error_json("the target text is empty");
    }

    let target = match fit_smoothed(&[target_text], &features) {
        Ok(distribution) => distribution,
        Err(error) => return error_json(error),
    };
    let raw = match fit_smoothed(&raw_lines, &features) {
        Ok(distribution) => distribution,
        Err(error) => return error_json(error),
    };
    let kl_target_raw = match kl_divergence(target.probs(), raw.probs()) {
        Ok(value) => value,
        Err(error) => return error_json(error),
    };
    let scorer = match WeightScorer::new(&target, &raw) {
        Ok(scorer) => scorer,
        Err(error) => return error_json(error),
    };

    let mut weights = Vec::with_capacity(raw_lines.len());
    for (index, line) in raw_lines.iter().enumerate() {
        let counts = match featurize(line, &features) {
            Ok(counts) => counts,
            Err(error) => return error_json(error),
        };
        let weight = match scorer.score(&counts) {
            Ok(weight) => weight.value(),
            Err(error) => return error_json(format!("line {index}: {error}")),
        };
        weights.push((index.to_string(), weight));
    }
    let winners = match gumbel_topk(&weights, k, u64::from(seed)) {
        Ok(winners) => winners,
        Err(error) => return error_json(error),
    };

    let mut lines: Vec<ScoredLine> = raw_lines
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(index, (line, (id, weight)))| ScoredLine {
            index,
            excerpt: excerpt(line),
            log_weight: *weight,
            gumbel: datasieve_core::selection::gumbel_noise(u64::from(seed), id),
            final_score: 0.0,
            selected: false,
            rank: None,
        })
        .collect();
    for line in &mut lines {
        line.final_score = line.log_weight + line.gumbel;
    }
    for (rank, winner) in winners.iter().enumerate() {
        let index: usize = winner.id.parse().expect("ids are line indices");
        lines[index].selected = true;
        lines[index].rank = Some(rank + 1);
    }
    json(&SelectionOutput {
        num_lines: raw_lines.len(),
        k,
        seed,
        kl_target_raw,
        lines,
    })
}

// --- threshold_curve ----------------------------------------------------

#[derive(Serialize)]
struct ThresholdCurve {
    shape: f64,
    trials_per_point: u32,
    rho: Vec<f64>,
    analytic: Vec<f64>,
    empirical: Vec<f64>,
}

/// Acceptance probability of the noisy threshold rule as a function of the
/// probability score `rho`: the analytic curve `(1 + (1 - rho))^-shape`
/// alongside an empirical rate from seeded noise draws, as JSON.
#[wasm_bindgen]
pub fn threshold_curve(shape: f64, points: u32, trials_per_point: u32, seed: u32) -> String {
    if !shape.is_finite() || shape <= 0.0 {
        return error_json("shape must be positive and finite");
    }
    if !(2..=512).contains(&points) {
        return error_json("points must be between 2 and 512");
    }
    if !(1..=200_000).contains(&trials_per_point) {
        return error_json("trials_per_point must be between 1 and 200000");
    }
    let mut rho = Vec::with_capacity(points as usize);
    let mut analytic = Vec::with_capacity(points as usize);
    let mut empirical = Vec::with_capacity(points as usize);
    for point in 0..points {
        let r = f64::from(point) / f64::from(points - 1);
        let mut accepted = 0u32;
        for trial in 0..trials_per_point {
            let id = format!("p{point}-t{trial}");
            let beta = threshold_noise(u64::from(seed), &id, 0, shape);
            if r > 1.0 - beta {
                accepted += 1;
            }
        }
        rho.push(r);
        analytic.push(threshold_accept_probability(r, shape));
        empirical.push(f64::from(accepted) / f64::from(trials_per_point));
    }
    json(&ThresholdCurve {
        shape,
        trials_per_point,
        rho,
        analytic,
        empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(payload: String) -> Value {
        serde_json::from_str(&payload).expect("output is valid JSON")
    }

    #[test]
    fn quality_check_reports_rules_and_matches_library_verdict() {
        let fillers = ["the", "and", "of", "to", "in", "a", "is", "it", "for", "on"];
        let good: String = (0..50)
            .flat_map(|i| [format!("word{i}"), fillers[i % 10].to_string()])
            .collect::<Vec<_>>()
            .join(" ");
        let report = parse(quality_check(&good));
        assert_eq!(report["passes"], true);
        assert_eq!(report["rejected_by"], Value::Null);
        assert_eq!(report["word_len"], 100);
        assert_eq!(report["rules"].as_array().unwrap().len(), 4);
        assert!(report["rules"][0]["ok"].as_bool().unwrap());

        let short = parse(quality_check("too short"));
        assert_eq!(short["passes"], false);
        assert_eq!(short["rejected_by"], "length");
        assert_eq!(short["rules"][0]["ok"], false);
    }

    #[test]
    fn selection_demo_selects_exactly_k_target_like_lines() {
        let target = "contract clause statute provision agreement obligation covenant";
        let mut raw = String::new();
        for i in 0..30 {
            if i % 3 == 0 {
                raw.push_str("contract clause statute provision agreement obligation\n");
            } else {
                raw.push_str("lol omg haha meme selfie viral trending clickbait\n");
            }
        }
        let output = parse(selection_demo(target, &raw, 8, 42));
        assert!(output.get("error").is_none(), "unexpected error: {output}");
        assert_eq!(output["num_lines"], 30);
        let lines = output["lines"].as_array().unwrap();
        assert_eq!(lines.len(), 30);
        let selected: Vec<&Value> = lines.iter().filter(|l| l["selected"] == true).collect();
        assert_eq!(selected.len(), 8);
        // Selected lines are overwhelmingly the contract-flavoured ones.
        let target_like = selected
            .iter()
            .filter(|l| l["excerpt"].as_str().unwrap().starts_with("contract"))
            .count();
        assert!(target_like >= 6, "only {target_like}/8 target-like");
        // Ranks are 1..=k, each exactly once.
        let mut ranks: Vec<u64> = selected.iter().map(|l| l["rank"].as_u64().unwrap()).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=8).collect::<Vec<u64>>());
        // Scores decompose as weight + noise.
        for line in lines {
            let sum = line["log_weight"].as_f64().unwrap() + line["gumbel"].as_f64().unwrap();
            assert!((sum - line["final_score"].as_f64().unwrap()).abs() < 1e-12);
        }
        // Deterministic in the seed.
        assert_eq!(selection_demo(target, &raw, 8, 42), selection_demo(target, &raw, 8, 42));
        assert_ne!(selection_demo(target, &raw, 8, 42), selection_demo(target, &raw, 8, 43));
    }

    #[test]
    fn selection_demo_rejects_bad_inputs() {
        assert!(parse(selection_demo("target", "", 1, 0)).get("error").is_some());
        assert!(parse(selection_demo("target", "one line", 5, 0)).get("error").is_some());
        assert!(parse(selection_demo("", "one line", 1, 0)).get("error").is_some());
    }

    #[test]
    fn threshold_curve_matches_analytic_shape() {
        let output = parse(threshold_curve(9.0, 11, 2000, 7));
        assert!(output.get("error").is_none(), "unexpected error: {output}");
        let rho = output["rho"].as_array().unwrap();
        let analytic = output["analytic"].as_array().unwrap();
        let empirical = output["empirical"].as_array().unwrap();
        assert_eq!(rho.len(), 11);
        assert_eq!(analytic.len(), 11);
        assert_eq!(empirical.len(), 11);
        assert!((rho[0].as_f64().unwrap() - 0.0).abs() < 1e-12);
        assert!((rho[10].as_f64().unwrap() - 1.0).abs() < 1e-12);
        // Endpoints of the analytic curve: 2^-shape and 1.
        assert!((analytic[0].as_f64().unwrap() - 0.5f64.powi(9)).abs() < 1e-15);
        assert!((analytic[10].as_f64().unwrap() - 1.0).abs() < 1e-12);
        // The empirical rate tracks the analytic curve loosely at 2000 trials.
        for (a, e) in analytic.iter().zip(empirical) {
            let (a, e) = (a.as_f64().unwrap(), e.as_f64().unwrap());
            assert!((a - e).abs() < 0.05, "empirical {e} too far from analytic {a}");
        }
        assert!(parse(threshold_curve(-1.0, 10, 100, 0)).get("error").is_some());
        assert!(parse(threshold_curve(9.0, 1, 100, 0)).get("error").is_some());
        assert!(parse(threshold_curve(9.0, 10, 0, 0)).get("error").is_some());
    }
}
