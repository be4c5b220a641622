//! Corpus readers and the word tokenizer.
//!
//! Two on-disk layouts are supported: one document per line, and documents
//! separated by a line holding only [`DOC_DELIMITER`]. Empty documents are
//! skipped without consuming a document id.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// Marker line separating documents in the delimited format.
pub const DOC_DELIMITER: &str = "#ENDDOC";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read corpus {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed record {record}: {reason}")]
    Malformed { record: usize, reason: String },
    #[error("i/o error while reading record {record}: {source}")]
    Io {
        record: usize,
        #[source]
        source: io::Error,
    },
    #[error("unknown corpus format `{0}` (expected `lines` or `delim`)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// Every line is one document.
    #[default]
    Lines,
    /// Documents separated by a `#ENDDOC` line.
    Delimited,
}

impl FromStr for CorpusFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lines" => Ok(Self::Lines),
            "delim" => Ok(Self::Delimited),
            other => Err(IngestError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: usize,
    pub text: String,
}

/// Streaming reader over a corpus, yielding non-empty documents in file order.
pub struct CorpusReader<R> {
    reader: R,
    format: CorpusFormat,
    next_id: usize,
    record: usize,
    done: bool,
    buf: Vec<u8>,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, format: CorpusFormat) -> Self {
        Self {
            reader,
            format,
            next_id: 0,
            record: 0,
            done: false,
            buf: Vec::new(),
        }
    }

    /// Reads one physical line into `self.buf` without its line terminator.
    /// Returns `false` at end of input.
    fn read_line(&mut self) -> io::Result<bool> {
        self.buf.clear();
        let n = self.reader.read_until(b'\n', &mut self.buf)?;
        if n == 0 {
            return Ok(false);
        }
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
            if self.buf.last() == Some(&b'\r') {
                self.buf.pop();
            }
        }
        Ok(true)
    }

    /// Reads the next record as raw bytes; `None` at end of input.
    fn next_record(&mut self) -> io::Result<Option<Vec<u8>>> {
        match self.format {
            CorpusFormat::Lines => Ok(self.read_line()?.then(|| self.buf.clone())),
            CorpusFormat::Delimited => {
                let mut record = Vec::new();
                let mut saw_any = false;
                while self.read_line()? {
                    saw_any = true;
                    if self.buf == DOC_DELIMITER.as_bytes() {
                        return Ok(Some(record));
                    }
                    if !record.is_empty() {
                        record.push(b'\n');
                    }
                    record.extend_from_slice(&self.buf);
                }
                // trailing record without a closing marker
                Ok(saw_any.then_some(record))
            }
        }
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<RawDocument, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let bytes = match self.next_record() {
                Ok(Some(bytes)) => bytes,
                Ok(None) => {
                    self.done = true;
                    return None;
                }
                Err(source) => {
                    self.done = true;
                    return Some(Err(IngestError::Io {
                        record: self.record + 1,
                        source,
                    }));
                }
            };
            self.record += 1;
            let text = match String::from_utf8(bytes) {
                Ok(text) => text,
                Err(e) => {
                    self.done = true;
                    return Some(Err(IngestError::Malformed {
                        record: self.record,
                        reason: format!("invalid UTF-8 at byte {}", e.utf8_error().valid_up_to()),
                    }));
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            let doc = RawDocument {
                doc_id: self.next_id,
                text,
            };
            self.next_id += 1;
            return Some(Ok(doc));
        }
        None
    }
}

/// Opens `path` and returns a streaming reader over its documents.
pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<CorpusReader<BufReader<File>>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(CorpusReader::new(BufReader::new(file), format))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub drop_punct_only: bool,
    pub drop_number_only: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            drop_punct_only: true,
            drop_number_only: true,
        }
    }
}

impl TokenizerConfig {
    /// Every filter off: the raw segmentation.
    pub fn verbatim() -> Self {
        Self {
            lowercase: false,
            drop_punct_only: false,
            drop_number_only: false,
        }
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2010}' | '\u{2019}')
}

/// Splits a whitespace-free chunk into alternating word and punctuation
/// segments. A hyphen or apostrophe between two alphanumerics stays in the
/// word.
fn segment_chunk<'a>(chunk: &'a str, out: &mut Vec<&'a str>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let in_word = |i: usize| -> bool {
        let c = chars[i].1;
        if c.is_alphanumeric() {
            return true;
        }
        is_joiner(c)
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].1.is_alphanumeric()
            && chars[i + 1].1.is_alphanumeric()
    };
    let mut start = 0;
    let mut current = None;
    for i in 0..chars.len() {
        let kind = in_word(i);
        match current {
            None => current = Some(kind),
            Some(prev) if prev != kind => {
                out.push(&chunk[chars[start].0..chars[i].0]);
                start = i;
                current = Some(kind);
            }
            _ => {}
        }
    }
    if !chars.is_empty() {
        out.push(&chunk[chars[start].0..]);
    }
}

fn keep_token(token: &str, config: &TokenizerConfig) -> bool {
    let has_alpha = token.chars().any(char::is_alphabetic);
    let has_numeric = token.chars().any(char::is_numeric);
    if config.drop_punct_only && !has_alpha && !has_numeric {
        return false;
    }
    if config.drop_number_only && has_numeric && !has_alpha {
        return false;
    }
    true
}

/// Tokenizes `text`, appending tokens to `out`.
pub fn tokenize_into(text: &str, config: &TokenizerConfig, out: &mut Vec<String>) {
    for chunk in text.split_whitespace() {
        // Lowercasing before segmentation keeps the tokenizer idempotent:
        // some case mappings introduce combining marks.
        let lowered;
        let chunk = if config.lowercase {
            lowered = chunk.to_lowercase();
            lowered.as_str()
        } else {
            chunk
        };
        let mut segments = Vec::new();
        segment_chunk(chunk, &mut segments);
        out.extend(
            segments
                .iter()
                .filter(|s| keep_token(s, config))
                .map(|s| s.to_string()),
        );
    }
}

pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let mut out = Vec::new();
    tokenize_into(text, config, &mut out);
    out
}
