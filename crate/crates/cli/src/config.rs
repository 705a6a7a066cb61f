//! Optional JSON config file shared by all subcommands.
//!
//! Precedence is strictly: built-in default < config file < explicit flag.
//! Every field is optional; a missing file field falls back to the built-in
//! default, and a flag given on the command line always wins.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

/// Quality-filter threshold overrides (all bounds inclusive except the
/// numeric-ratio maximum, which is exclusive).
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityFileConfig {
    pub min_words: Option<usize>,
    pub max_words: Option<usize>,
    pub min_repeat: Option<f64>,
    pub max_repeat: Option<f64>,
    pub min_informativeness: Option<f64>,
    pub max_informativeness: Option<f64>,
    pub max_numeric: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub num_buckets: Option<u32>,
    pub include_bigrams: Option<bool>,
    pub smoothing: Option<f64>,
    pub chunk_size: Option<usize>,
    pub drop_last_short: Option<bool>,
    pub concat_pairs: Option<bool>,
    pub pareto_shape: Option<f64>,
    pub workers: Option<usize>,
    pub max_examples: Option<usize>,
    pub quality: Option<QualityFileConfig>,
}

impl FileConfig {
    /// Load a config file, or an all-defaults config when no path is given.
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }

    pub fn quality(&self) -> QualityFileConfig {
        self.quality.clone().unwrap_or_default()
    }
}

/// `flag.or(config).unwrap_or(default)` with the arguments in precedence
/// order, for readability at call sites.
pub fn resolve<T: Copy>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
