//! Corpus records, JSONL streaming, and document chunking.
//!
//! A corpus is a JSONL file of [`Example`] records. Reading is streaming —
//! one record in memory at a time — so corpora far larger than RAM can be
//! processed. The reader does keep a set of the ids it has seen in order to
//! reject duplicates with an exact message; ids are short, so this stays tiny
//! relative to the text payload.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One unit of text, the atom every other module operates on.
///
/// `meta` uses a [`BTreeMap`] so serialization is byte-stable regardless of
/// insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    /// Unique id within a corpus.
    pub id: String,
    /// The text payload.
    pub text: String,
    /// Provenance tag (e.g. which upstream dataset the text came from).
    pub source: String,
    /// Optional free-form annotations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<BTreeMap<String, String>>,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: impl Into<String>) -> Self {
        Example {
            id: id.into(),
            text: text.into(),
            source: source.into(),
            meta: None,
        }
    }
}

/// How [`chunk_document`] splits a document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChunkConfig {
    /// Number of whitespace-delimited words per chunk.
    pub chunk_size: usize,
    /// Drop a trailing chunk shorter than `chunk_size` instead of keeping it.
    pub drop_last_short: bool,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            chunk_size: 128,
            drop_last_short: false,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Split a document into consecutive chunks of `chunk_size` words.
///
/// Words are maximal runs of non-whitespace (Unicode), and chunks re-join
/// them with single spaces, so repeated whitespace does not survive
/// chunking. Chunk ids are `"{id_prefix}-{index}"` with a zero-based index.
/// An empty or all-whitespace document yields no chunks.
pub fn chunk_document(
    text: &str,
    source: &str,
    id_prefix: &str,
    config: &ChunkConfig,
) -> Result<Vec<Example>> {
    config.validate()?;
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut chunks = Vec::with_capacity(words.len() / config.chunk_size + 1);
    for (index, window) in words.chunks(config.chunk_size).enumerate() {
        if config.drop_last_short && window.len() < config.chunk_size {
            break;
        }
        chunks.push(Example::new(
            format!("{id_prefix}-{index}"),
            window.join(" "),
            source,
        ));
    }
    Ok(chunks)
}

/// Concatenate consecutive pairs of examples into single examples.
///
/// Pair `(2i, 2i+1)` becomes one example carrying the first member's id,
/// source, and meta, with the two texts joined by a single space. An odd
/// trailing example is passed through unchanged.
pub fn concat_pairs(examples: Vec<Example>) -> Vec<Example> {
    let mut out = Vec::with_capacity(examples.len().div_ceil(2));
    let mut iter = examples.into_iter();
    while let Some(mut first) = iter.next() {
        if let Some(second) = iter.next() {
            first.text.push(' ');
            first.text.push_str(&second.text);
        }
        out.push(first);
    }
    out
}

/// Streaming JSONL reader yielding one [`Example`] per line.
///
/// Blank lines are not allowed: every line must be a complete JSON record.
/// Errors carry the 1-based line number; duplicate ids are rejected by name.
pub struct JsonlReader<R> {
    lines: io::Lines<R>,
    line_number: u64,
    seen_ids: HashSet<String>,
}

impl JsonlReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(JsonlReader::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(reader: R) -> Self {
        JsonlReader {
            lines: reader.lines(),
            line_number: 0,
            seen_ids: HashSet::new(),
        }
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<Example>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = match self.lines.next()? {
            Ok(line) => line,
            Err(e) => return Some(Err(e.into())),
        };
        self.line_number += 1;
        let example: Example = match serde_json::from_str(&line) {
            Ok(example) => example,
            Err(source) => {
                return Some(Err(Error::MalformedRecord {
                    line: self.line_number,
                    source,
                }))
            }
        };
        if !self.seen_ids.insert(example.id.clone()) {
            return Some(Err(Error::DuplicateId {
                id: example.id,
                line: self.line_number,
            }));
        }
        Some(Ok(example))
    }
}

/// Buffered JSONL writer; one compact JSON record per line, `\n` terminated.
pub struct JsonlWriter<W: Write> {
    writer: W,
}

impl JsonlWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(JsonlWriter::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(writer: W) -> Self {
        JsonlWriter { writer }
    }

    pub fn write(&mut self, example: &Example) -> Result<()> {
        serde_json::to_writer(&mut self.writer, example)?;
        self.writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Read a whole corpus into memory. Convenience for tests and small inputs;
/// pipelines should iterate [`JsonlReader`] instead.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    JsonlReader::open(path)?.collect()
}

/// Write a whole corpus. Convenience counterpart to [`read_jsonl`].
pub fn write_jsonl<'a>(
    path: impl AsRef<Path>,
    examples: impl IntoIterator<Item = &'a Example>,
) -> Result<()> {
    let mut writer = JsonlWriter::create(path)?;
    for example in examples {
        writer.write(example)?;
    }
    writer.finish()
}
