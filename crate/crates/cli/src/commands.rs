//! Subcommand implementations.
//!
//! Every command is a pure function of (input files, resolved options,
//! seed): re-running reproduces outputs byte for byte, regardless of worker
//! count. Commands stream their inputs where the algorithm permits, keeping
//! peak memory proportional to the result size (plus the bucket table), not
//! the corpus.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use datasieve_core::classifier::{clf_log_weight, LinearModel, TrainConfig};
use datasieve_core::corpus::{chunk_document, concat_pairs, ChunkConfig, Example, JsonlReader, JsonlWriter};
use datasieve_core::features::{featurize, FeatureConfig};
use datasieve_core::metrics::{kl_divergence, source_histogram, MetricsReport, SourceHistogram};
use datasieve_core::ngram::{add_counts_into, mle, NgramDistribution, WeightScorer};
use datasieve_core::selection::{
    noisy_threshold_select, quota_select, random_select, topk_select, QuotaCandidate,
    QuotaStrategy, SelectionRecord, StreamingTopK,
};
use datasieve_core::textstats::{passes_quality, quality_stats, QualityConfig, ReportBuilder};
use datasieve_core::Error as CoreError;

use crate::args::{
    ChunkArgs, ExtractArgs, FilterArgs, FitArgs, Method, QuotaStrategyArg, ReportArgs, ScoreArgs,
    SelectArgs, TrainClfArgs,
};
use crate::config::{resolve, FileConfig};

/// How many examples a scoring shard holds in memory at once.
const SCORE_BATCH: usize = 4096;

/// One line of a scores file. `log_weight` is written by two-model scoring,
/// `prob` by classifier scoring; `select` accepts either shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    #[serde(default)]
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

fn feature_config(args_buckets: Option<u32>, no_bigrams: bool, config: &FileConfig) -> FeatureConfig {
    FeatureConfig {
        num_buckets: resolve(args_buckets, config.num_buckets, 10_000),
        include_bigrams: if no_bigrams {
            false
        } else {
            config.include_bigrams.unwrap_or(true)
        },
    }
}

fn quality_config(args: &FilterArgs, config: &FileConfig) -> QualityConfig {
    let file = config.quality();
    let defaults = QualityConfig::default();
    QualityConfig {
        word_len: (
            resolve(args.min_words, file.min_words, defaults.word_len.0),
            resolve(args.max_words, file.max_words, defaults.word_len.1),
        ),
        repeat_ratio: (
            resolve(args.min_repeat, file.min_repeat, defaults.repeat_ratio.0),
            resolve(args.max_repeat, file.max_repeat, defaults.repeat_ratio.1),
        ),
        informativeness: (
            resolve(
                args.min_informativeness,
                file.min_informativeness,
                defaults.informativeness.0,
            ),
            resolve(
                args.max_informativeness,
                file.max_informativeness,
                defaults.informativeness.1,
            ),
        ),
        numeric_ratio_max: resolve(args.max_numeric, file.max_numeric, defaults.numeric_ratio_max),
        ..defaults
    }
}

fn create_out(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

// ---------------------------------------------------------------------------
// chunk
// ---------------------------------------------------------------------------

pub fn cmd_chunk(args: ChunkArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let chunk_config = ChunkConfig {
        chunk_size: resolve(args.chunk_size, config.chunk_size, 128),
        drop_last_short: args.drop_last_short || config.drop_last_short.unwrap_or(false),
    };
    chunk_config.validate()?;
    let join_pairs = args.concat_pairs || config.concat_pairs.unwrap_or(false);

    let reader = JsonlReader::open(&args.input)?;
    let mut writer = JsonlWriter::create(&args.output)?;
    let (mut documents, mut chunks) = (0u64, 0u64);
    for document in reader {
        let document = document?;
        let mut pieces = chunk_document(
            &document.text,
            &document.source,
            &document.id,
            &chunk_config,
        )?;
        if join_pairs {
            pieces = concat_pairs(pieces);
        }
        documents += 1;
        for piece in &pieces {
            writer.write(piece)?;
            chunks += 1;
        }
    }
    writer.finish()?;
    eprintln!(
        "chunk: {documents} documents -> {chunks} chunks of <= {} words ({})",
        chunk_config.chunk_size,
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

pub fn cmd_filter(args: FilterArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let quality = quality_config(&args, &config);
    quality.validate()?;

    let reader = JsonlReader::open(&args.input)?;
    let mut writer = JsonlWriter::create(&args.output)?;
    let mut report = ReportBuilder::new();
    for example in reader {
        let example = example?;
        let stats = quality_stats(&example.text, &quality.stopwords);
        let verdict = passes_quality(&stats, &quality);
        report.record(verdict);
        if verdict.is_none() {
            writer.write(&example)?;
        }
    }
    writer.finish()?;
    let report = report.finish();
    if let Some(path) = &args.report {
        let mut out = create_out(path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    eprintln!(
        "filter: kept {}/{} examples (keep rate {:.4}) -> {}",
        report.kept,
        report.total,
        report.keep_rate,
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Stream a corpus into a dense count table and return the smoothed MLE
/// distribution plus how many examples fed it.
fn fit_distribution_streaming(
    path: &Path,
    features: &FeatureConfig,
    max_examples: usize,
    alpha: f64,
) -> anyhow::Result<(u64, NgramDistribution)> {
    let reader = JsonlReader::open(path)?;
    let mut table = vec![0u64; features.num_buckets as usize];
    let mut used = 0u64;
    for example in reader.take(max_examples) {
        let example = example?;
        let counts = featurize(&example.text, features)?;
        add_counts_into(&mut table, &counts)?;
        used += 1;
    }
    if used == 0 {
        bail!(CoreError::EmptyInput(format!(
            "no examples in {}",
            path.display()
        )));
    }
    let distribution = mle(&table)?.smooth(alpha)?;
    Ok((used, distribution))
}

pub fn cmd_fit(args: FitArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let features = feature_config(args.num_buckets, args.no_bigrams, &config);
    features.validate()?;
    let alpha = resolve(args.smoothing, config.smoothing, 1e-5);
    let max_examples = resolve(args.max_examples, config.max_examples, usize::MAX);
    let role = if args.target { "target" } else { "raw" };

    let (used, distribution) = fit_distribution_streaming(&args.input, &features, max_examples, alpha)?;
    distribution.save_to_path(&args.output)?;
    eprintln!(
        "fit: role={role} examples={used} ngrams={} buckets={} alpha={alpha} -> {}",
        distribution.fitted_from(),
        features.num_buckets,
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-clf
// ---------------------------------------------------------------------------

fn featurize_corpus(
    path: &Path,
    features: &FeatureConfig,
    max_examples: usize,
) -> anyhow::Result<Vec<datasieve_core::features::HashedCounts>> {
    let reader = JsonlReader::open(path)?;
    let mut all = Vec::new();
    for example in reader.take(max_examples) {
        let example = example?;
        all.push(featurize(&example.text, features)?);
    }
    Ok(all)
}

pub fn cmd_train_clf(args: TrainClfArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let features = feature_config(args.num_buckets, args.no_bigrams, &config);
    features.validate()?;
    let max_examples = resolve(args.max_examples, config.max_examples, usize::MAX);

    let mut train_config = TrainConfig {
        seed: args.seed,
        ..TrainConfig::default()
    };
    if let Some(grid) = &args.l2_grid {
        train_config.l2_grid = grid
            .split(',')
            .map(|piece| {
                piece
                    .trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad l2 value {piece:?} in --l2-grid"))
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
    }

    let positives = featurize_corpus(&args.target, &features, max_examples)?;
    let negatives = featurize_corpus(&args.raw, &features, max_examples)?;
    let outcome = datasieve_core::classifier::train(
        &positives,
        &negatives,
        features.num_buckets,
        &train_config,
    )?;
    outcome.model.save_to_path(&args.output)?;
    eprintln!(
        "train-clf: {} per class, held-out accuracy {:.4}, l2 {} -> {}",
        outcome.balanced_per_class,
        outcome.held_out_accuracy,
        outcome.model.l2(),
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

enum Scorer {
    TwoModel(WeightScorer),
    Classifier(LinearModel),
}

impl Scorer {
    fn num_buckets(&self) -> u32 {
        match self {
            Scorer::TwoModel(scorer) => scorer.num_buckets(),
            Scorer::Classifier(model) => model.num_buckets(),
        }
    }

    fn score(&self, example: &Example, features: &FeatureConfig) -> Result<ScoreRecord, CoreError> {
        let counts = featurize(&example.text, features)?;
        let mut record = ScoreRecord {
            id: example.id.clone(),
            source: example.source.clone(),
            log_weight: None,
            prob: None,
        };
        match self {
            Scorer::TwoModel(scorer) => {
                record.log_weight = Some(scorer.score(&counts)?.value());
            }
            Scorer::Classifier(model) => {
                let prob = model.calibrated_prob(&counts).map_err(|error| match error {
                    CoreError::EmptyInput(_) => CoreError::Unscorable {
                        id: example.id.clone(),
                        reason: "no features (empty after tokenization)".into(),
                    },
                    other => other,
                })?;
                record.prob = Some(prob);
            }
        }
        Ok(record)
    }
}

pub fn cmd_score(args: ScoreArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let scorer = match (&args.clf_model, &args.target_model, &args.raw_model) {
        (Some(clf), None, None) => Scorer::Classifier(LinearModel::load_from_path(clf)?),
        (None, Some(target), Some(raw)) => {
            let target = NgramDistribution::load_from_path(target)?;
            let raw = NgramDistribution::load_from_path(raw)?;
            Scorer::TwoModel(WeightScorer::new(&target, &raw)?)
        }
        _ => bail!(
            "score needs either --clf-model, or both --target-model and --raw-model"
        ),
    };

    // The models define the bucket space; an explicit flag or config value
    // must agree with them, and absent both we take the models' own count.
    let mut features = feature_config(args.num_buckets, args.no_bigrams, &config);
    if args.num_buckets.is_none() && config.num_buckets.is_none() {
        features.num_buckets = scorer.num_buckets();
    } else if features.num_buckets != scorer.num_buckets() {
        bail!(CoreError::BucketCountMismatch {
            left: features.num_buckets as usize,
            right: scorer.num_buckets() as usize,
        });
    }

    let workers = resolve(args.workers, config.workers, 1);
    if workers == 0 {
        bail!(CoreError::InvalidConfig("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;

    let reader = JsonlReader::open(&args.input)?;
    let mut out = create_out(&args.output)?;
    let mut scored = 0u64;
    let mut batch: Vec<Example> = Vec::with_capacity(SCORE_BATCH);
    let flush = |batch: &mut Vec<Example>, out: &mut BufWriter<File>| -> anyhow::Result<u64> {
        let records = pool.install(|| {
            batch
                .par_iter()
                .map(|example| scorer.score(example, &features))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let n = records.len() as u64;
        for record in records {
            serde_json::to_writer(&mut *out, &record)?;
            out.write_all(b"\n")?;
        }
        batch.clear();
        Ok(n)
    };
    for example in reader {
        batch.push(example?);
        if batch.len() == SCORE_BATCH {
            scored += flush(&mut batch, &mut out)?;
        }
    }
    scored += flush(&mut batch, &mut out)?;
    out.flush()?;
    eprintln!(
        "score: {scored} examples with {} ({} workers) -> {}",
        match scorer {
            Scorer::TwoModel(_) => "target/raw models",
            Scorer::Classifier(_) => "classifier",
        },
        workers,
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

/// Iterate score records paired with their 1-indexed file line, so errors
/// can point at the offending line.
fn score_lines(
    path: &Path,
) -> anyhow::Result<impl Iterator<Item = anyhow::Result<(u64, ScoreRecord)>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let path = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, line)| !matches!(line, Ok(l) if l.trim().is_empty()))
        .map(move |(index, line)| {
            let line_number = index as u64 + 1;
            let line = line?;
            serde_json::from_str::<ScoreRecord>(&line)
                .map(|record| (line_number, record))
                .with_context(|| format!("{}:{}: bad score record", path.display(), line_number))
        }))
}

fn require_log_weight(record: &ScoreRecord, method: Method) -> anyhow::Result<f64> {
    match (record.log_weight, record.prob, method) {
        (Some(w), _, Method::Dsir) => Ok(w),
        (_, Some(p), Method::ClfGumbel) => Ok(clf_log_weight(p)),
        (None, _, Method::Dsir) => bail!(CoreError::Unscorable {
            id: record.id.clone(),
            reason: "scores file has no log_weight field (was it produced with --clf-model?)".into(),
        }),
        (_, None, _) => bail!(CoreError::Unscorable {
            id: record.id.clone(),
            reason: "scores file has no prob field (use a classifier scores file)".into(),
        }),
        _ => unreachable!("only weight-based methods call require_log_weight"),
    }
}

fn require_prob(record: &ScoreRecord) -> anyhow::Result<f64> {
    record.prob.ok_or_else(|| {
        CoreError::Unscorable {
            id: record.id.clone(),
            reason: "scores file has no prob field (use a classifier scores file)".into(),
        }
        .into()
    })
}

/// Parse `--quotas`: inline JSON if the value starts with `{`, otherwise a
/// path to a JSON file. The JSON is a flat object: {"source": fraction}.
fn parse_quotas(raw: &str) -> anyhow::Result<BTreeMap<String, f64>> {
    let text = if raw.trim_start().starts_with('{') {
        raw.to_string()
    } else {
        std::fs::read_to_string(raw).with_context(|| format!("reading quotas file {raw}"))?
    };
    serde_json::from_str(&text).context("parsing quotas JSON ({\"source\": fraction, ...})")
}

/// Look up sources for the winning ids with a second streaming pass, and
/// fail on ids that appear more than once (duplicates would have received
/// identical noise, corrupting the draw).
fn sources_for_winners(
    path: &Path,
    winners: &[String],
) -> anyhow::Result<HashMap<String, String>> {
    let wanted: HashSet<&String> = winners.iter().collect();
    let mut sources: HashMap<String, String> = HashMap::with_capacity(winners.len());
    for record in score_lines(path)? {
        let (line, record) = record?;
        if wanted.contains(&record.id)
            && sources
                .insert(record.id.clone(), record.source.clone())
                .is_some()
        {
            bail!(CoreError::DuplicateId {
                id: record.id,
                line,
            });
        }
    }
    Ok(sources)
}

fn write_selection(
    out_path: &Path,
    ids_out: Option<&Path>,
    records: &[SelectionRecord],
) -> anyhow::Result<()> {
    let mut out = create_out(out_path)?;
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    if let Some(path) = ids_out {
        let mut ids = create_out(path)?;
        for record in records {
            writeln!(ids, "{}", record.id)?;
        }
        ids.flush()?;
    }
    Ok(())
}

pub fn cmd_select(args: SelectArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let quotas = args.quotas.as_deref().map(parse_quotas).transpose()?;
    if quotas.is_some() && !matches!(args.method, Method::Dsir | Method::ClfGumbel) {
        bail!(CoreError::InvalidConfig(
            "--quotas requires a weight-based method (dsir or clf-gumbel)".into(),
        ));
    }

    let records: Vec<SelectionRecord> = match args.method {
        Method::Dsir | Method::ClfGumbel => {
            if let Some(quotas) = quotas {
                // Quota path: candidates grouped by source, so the whole
                // (compact) score table is held in memory.
                let mut candidates = Vec::new();
                let mut seen: HashSet<String> = HashSet::new();
                for record in score_lines(&args.scores)? {
                    let (line, record) = record?;
                    let log_weight = require_log_weight(&record, args.method)?;
                    if !seen.insert(record.id.clone()) {
                        bail!(CoreError::DuplicateId { id: record.id, line });
                    }
                    candidates.push(QuotaCandidate {
                        id: record.id,
                        log_weight,
                        group: record.source,
                    });
                }
                let strategy = match args.quota_strategy {
                    QuotaStrategyArg::Gumbel => QuotaStrategy::Gumbel,
                    QuotaStrategyArg::Random => QuotaStrategy::Random,
                };
                let group_of: HashMap<String, String> = candidates
                    .iter()
                    .map(|c| (c.id.clone(), c.group.clone()))
                    .collect();
                quota_select(&candidates, &quotas, args.k, args.seed, strategy)?
                    .iter()
                    .map(|score| SelectionRecord::from_score(score, group_of[&score.id].clone()))
                    .collect()
            } else {
                // Plain path: bounded top-k heap over a single pass, then a
                // second pass to recover the winners' sources.
                let mut topk = StreamingTopK::new(args.k, args.seed)?;
                for record in score_lines(&args.scores)? {
                    let (_, record) = record?;
                    let log_weight = require_log_weight(&record, args.method)?;
                    topk.push(&record.id, log_weight)?;
                }
                let winners = topk.finish()?;
                let ids: Vec<String> = winners.iter().map(|w| w.id.clone()).collect();
                let sources = sources_for_winners(&args.scores, &ids)?;
                winners
                    .iter()
                    .map(|score| SelectionRecord::from_score(score, sources[&score.id].clone()))
                    .collect()
            }
        }
        Method::ClfTopk => {
            let mut pairs = Vec::new();
            for record in score_lines(&args.scores)? {
                let (_, record) = record?;
                let prob = require_prob(&record)?;
                pairs.push((record.id, prob));
            }
            let winners = topk_select(&pairs, args.k)?;
            let ids: Vec<String> = winners.iter().map(|(id, _)| id.clone()).collect();
            let sources = sources_for_winners(&args.scores, &ids)?;
            winners
                .into_iter()
                .map(|(id, prob)| SelectionRecord {
                    source: sources[&id].clone(),
                    log_weight: clf_log_weight(prob),
                    final_score: prob,
                    id,
                })
                .collect()
        }
        Method::ClfNoisy => {
            let shape = resolve(args.pareto_shape, config.pareto_shape, 9.0);
            let mut pairs = Vec::new();
            let mut info: HashMap<String, (f64, String)> = HashMap::new();
            for record in score_lines(&args.scores)? {
                let (line, record) = record?;
                let prob = require_prob(&record)?;
                if info
                    .insert(record.id.clone(), (prob, record.source.clone()))
                    .is_some()
                {
                    bail!(CoreError::DuplicateId { id: record.id, line });
                }
                pairs.push((record.id, prob));
            }
            noisy_threshold_select(&pairs, args.k, shape, args.seed)?
                .into_iter()
                .map(|id| {
                    let (prob, source) = info[&id].clone();
                    SelectionRecord {
                        id,
                        final_score: prob,
                        log_weight: clf_log_weight(prob),
                        source,
                    }
                })
                .collect()
        }
        Method::Random => {
            let mut ids = Vec::new();
            let mut info: HashMap<String, (f64, String)> = HashMap::new();
            for record in score_lines(&args.scores)? {
                let (line, record) = record?;
                if info
                    .insert(
                        record.id.clone(),
                        (record.log_weight.unwrap_or(0.0), record.source.clone()),
                    )
                    .is_some()
                {
                    bail!(CoreError::DuplicateId { id: record.id, line });
                }
                ids.push(record.id);
            }
            random_select(&ids, args.k, args.seed)?
                .into_iter()
                .map(|id| {
                    let (log_weight, source) = info[&id].clone();
                    SelectionRecord {
                        id,
                        final_score: 0.0,
                        log_weight,
                        source,
                    }
                })
                .collect()
        }
    };

    write_selection(&args.output, args.ids_out.as_deref(), &records)?;
    eprintln!(
        "select: method {:?}, kept {} ids (seed {}) -> {}",
        args.method,
        records.len(),
        args.seed,
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

/// Read the wanted id set from either a plain id-per-line file or a
/// selection/scores JSONL (any object with an "id" field).
fn read_id_set(path: &Path) -> anyhow::Result<HashSet<String>> {
    #[derive(Deserialize)]
    struct IdOnly {
        id: String,
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut ids = HashSet::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let id = if trimmed.starts_with('{') {
            serde_json::from_str::<IdOnly>(trimmed)
                .with_context(|| format!("{}:{}: bad id record", path.display(), index + 1))?
                .id
        } else {
            trimmed.to_string()
        };
        ids.insert(id);
    }
    if ids.is_empty() {
        bail!(CoreError::EmptyInput(format!(
            "no ids in {}",
            path.display()
        )));
    }
    Ok(ids)
}

pub fn cmd_extract(args: ExtractArgs) -> anyhow::Result<()> {
    let mut wanted = read_id_set(&args.ids)?;
    let requested = wanted.len();
    let reader = JsonlReader::open(&args.input)?;
    let mut writer = JsonlWriter::create(&args.output)?;
    let mut written = 0u64;
    for example in reader {
        let example = example?;
        if wanted.remove(&example.id) {
            writer.write(&example)?;
            written += 1;
        }
    }
    writer.finish()?;
    if !wanted.is_empty() {
        let mut missing: Vec<&String> = wanted.iter().collect();
        missing.sort();
        bail!(
            "{} of {requested} requested ids not in {} (first missing: {})",
            wanted.len(),
            args.input.display(),
            missing[0]
        );
    }
    eprintln!(
        "extract: {written} of {requested} ids (corpus order) -> {}",
        args.output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Streaming source histogram over a JSONL corpus.
fn histogram_streaming(path: &Path) -> anyhow::Result<SourceHistogram> {
    let reader = JsonlReader::open(path)?;
    let mut examples = Vec::new();
    for example in reader {
        let example = example?;
        examples.push(Example {
            text: String::new(), // only id/source matter for the histogram
            ..example
        });
    }
    Ok(source_histogram(&examples)?)
}

pub fn cmd_report(args: ReportArgs) -> anyhow::Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let features = feature_config(args.num_buckets, args.no_bigrams, &config);
    features.validate()?;
    let alpha = resolve(
        args.smoothing,
        config.smoothing,
        datasieve_core::metrics::DEFAULT_METRICS_ALPHA,
    );
    let max_examples = resolve(
        args.max_examples,
        config.max_examples,
        datasieve_core::metrics::DEFAULT_MAX_EXAMPLES,
    );

    let (_, target) = fit_distribution_streaming(&args.target, &features, max_examples, alpha)?;
    let (_, raw) = fit_distribution_streaming(&args.raw, &features, max_examples, alpha)?;
    let (_, selected) = fit_distribution_streaming(&args.selected, &features, max_examples, alpha)?;

    let kl_target_raw = kl_divergence(target.probs(), raw.probs())?;
    let kl_target_selected = kl_divergence(target.probs(), selected.probs())?;
    let report = MetricsReport {
        kl_target_raw,
        kl_target_selected,
        kl_reduction: kl_target_raw - kl_target_selected,
        histogram: histogram_streaming(&args.selected)?,
    };

    let mut out = create_out(&args.output)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    eprintln!(
        "report: KL(target||raw) {:.6}, KL(target||selected) {:.6}, reduction {:.6} -> {}",
        report.kl_target_raw,
        report.kl_target_selected,
        report.kl_reduction,
        args.output.display()
    );
    Ok(())
}
