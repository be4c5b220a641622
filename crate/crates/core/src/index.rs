//! Per-document sparse frequency model.
//!
//! Each word owns a posting list of `(doc, count)` pairs for the documents it
//! occurs in; zero counts are implicit. Document sizes `n_i`, the corpus size
//! `N` and the document count `T` live alongside. Every posting also records
//! how many of its occurrences fall in the first half of the document, which
//! is all the history/test adaptation statistic needs.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::ingest::{tokenize_into, IngestError, RawDocument, TokenizerConfig};
use crate::par::Execution;

const MAGIC: &[u8; 4] = b"CAIX";
const FORMAT_VERSION: u32 = 1;
/// Documents per partial index when building in parallel. Fixed so the
/// merge sequence does not depend on the worker count.
const PARTITION_DOCS: usize = 256;
const PARTITIONS_PER_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("unknown word id {0}")]
    UnknownWord(WordId),
    #[error("unknown word `{0}`")]
    UnknownWordStr(String),
    #[error("invalid index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordId(pub u32);

impl WordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for WordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional word/id map; ids are dense and assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = WordId(self.words.len() as u32);
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn ids(&self) -> impl Iterator<Item = WordId> {
        (0..self.words.len() as u32).map(WordId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    /// Occurrences in the document, `c_i >= 1`.
    pub count: u32,
    /// Occurrences at token positions `< n_i / 2`.
    pub first_half: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexiconStats {
    pub lexicon_size: usize,
    /// Words with corpus count of at least 10.
    pub l10_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusIndex {
    vocab: Vocabulary,
    doc_sizes: Vec<u32>,
    postings: Vec<Vec<Posting>>,
    total_tokens: u64,
}

impl CorpusIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one tokenized document. Empty documents are ignored and get no
    /// ordinal.
    pub fn add_document<S: AsRef<str>>(&mut self, tokens: &[S]) {
        let n = tokens.len();
        if n == 0 {
            return;
        }
        let doc = self.doc_sizes.len() as u32;
        let half = n / 2;
        let mut counts: HashMap<WordId, (u32, u32)> = HashMap::new();
        for (pos, token) in tokens.iter().enumerate() {
            let id = self.vocab.intern(token.as_ref());
            let entry = counts.entry(id).or_insert((0, 0));
            entry.0 += 1;
            if pos < half {
                entry.1 += 1;
            }
        }
        if self.postings.len() < self.vocab.len() {
            self.postings.resize_with(self.vocab.len(), Vec::new);
        }
        for (id, (count, first_half)) in counts {
            self.postings[id.index()].push(Posting {
                doc,
                count,
                first_half,
            });
        }
        self.doc_sizes.push(n as u32);
        self.total_tokens += n as u64;
    }

    /// Appends `other`'s documents after this index's documents, resolving
    /// words through the shared vocabulary.
    pub fn merge(mut self, other: CorpusIndex) -> CorpusIndex {
        let offset = self.doc_sizes.len() as u32;
        for (word, list) in other.vocab.words.iter().zip(other.postings) {
            let id = self.vocab.intern(word);
            if self.postings.len() < self.vocab.len() {
                self.postings.resize_with(self.vocab.len(), Vec::new);
            }
            self.postings[id.index()].extend(list.into_iter().map(|p| Posting {
                doc: p.doc + offset,
                ..p
            }));
        }
        self.doc_sizes.extend(other.doc_sizes);
        self.total_tokens += other.total_tokens;
        self
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn doc_sizes(&self) -> &[u32] {
        &self.doc_sizes
    }

    /// `T`, the number of (non-empty) documents.
    pub fn num_docs(&self) -> usize {
        self.doc_sizes.len()
    }

    /// `N`, the number of tokens.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn lookup(&self, word: &str) -> Option<WordId> {
        self.vocab.get(word)
    }

    pub fn word(&self, id: WordId) -> Result<&str, IndexError> {
        self.vocab.word(id).ok_or(IndexError::UnknownWord(id))
    }

    pub fn postings(&self, id: WordId) -> Result<&[Posting], IndexError> {
        self.postings
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(IndexError::UnknownWord(id))
    }

    /// `C`, the corpus count of a word.
    pub fn word_count(&self, id: WordId) -> Result<u64, IndexError> {
        Ok(self.postings(id)?.iter().map(|p| p.count as u64).sum())
    }

    /// Number of documents containing the word.
    pub fn doc_freq(&self, id: WordId) -> Result<usize, IndexError> {
        Ok(self.postings(id)?.len())
    }

    /// `p_i = c_i / n_i` for the documents where the word occurs, in
    /// document order.
    pub fn doc_probabilities(&self, id: WordId) -> Result<Vec<(u32, f64)>, IndexError> {
        Ok(self
            .postings(id)?
            .iter()
            .map(|p| (p.doc, p.count as f64 / self.doc_sizes[p.doc as usize] as f64))
            .collect())
    }

    pub fn lexicon_stats(&self) -> LexiconStats {
        let l10_size = self
            .postings
            .iter()
            .filter(|list| list.iter().map(|p| p.count as u64).sum::<u64>() >= 10)
            .count();
        LexiconStats {
            lexicon_size: self.vocab.len(),
            l10_size,
        }
    }

    /// `(word, C, df)` rows sorted by count descending, ties by word.
    pub fn frequency_table(&self) -> Vec<(&str, u64, usize)> {
        let mut rows: Vec<(&str, u64, usize)> = self
            .vocab
            .words
            .iter()
            .zip(&self.postings)
            .map(|(w, list)| {
                (
                    w.as_str(),
                    list.iter().map(|p| p.count as u64).sum(),
                    list.len(),
                )
            })
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.vocab.len() as u64)?;
        w.write_u64::<LittleEndian>(self.doc_sizes.len() as u64)?;
        w.write_u64::<LittleEndian>(self.total_tokens)?;
        for word in &self.vocab.words {
            w.write_u32::<LittleEndian>(word.len() as u32)?;
            w.write_all(word.as_bytes())?;
        }
        for &n in &self.doc_sizes {
            w.write_u32::<LittleEndian>(n)?;
        }
        for list in &self.postings {
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for p in list {
                w.write_u32::<LittleEndian>(p.doc)?;
                w.write_u32::<LittleEndian>(p.count)?;
                w.write_u32::<LittleEndian>(p.first_half)?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let bad = |msg: String| IndexError::Format(msg);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let num_words = r.read_u64::<LittleEndian>()? as usize;
        let num_docs = r.read_u64::<LittleEndian>()? as usize;
        let total_tokens = r.read_u64::<LittleEndian>()?;

        let mut vocab = Vocabulary::new();
        for i in 0..num_words {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            let word = String::from_utf8(buf).map_err(|_| bad(format!("word {i} is not UTF-8")))?;
            if vocab.intern(&word).index() != i {
                return Err(bad(format!("duplicate word `{word}`")));
            }
        }
        let mut doc_sizes = Vec::with_capacity(num_docs.min(1 << 24));
        for _ in 0..num_docs {
            doc_sizes.push(r.read_u32::<LittleEndian>()?);
        }
        if doc_sizes.iter().map(|&n| n as u64).sum::<u64>() != total_tokens {
            return Err(bad("document sizes do not sum to the token total".into()));
        }
        let mut postings = Vec::with_capacity(num_words);
        for i in 0..num_words {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut list = Vec::with_capacity(len.min(num_docs));
            let mut prev: Option<u32> = None;
            for _ in 0..len {
                let p = Posting {
                    doc: r.read_u32::<LittleEndian>()?,
                    count: r.read_u32::<LittleEndian>()?,
                    first_half: r.read_u32::<LittleEndian>()?,
                };
                let size = *doc_sizes
                    .get(p.doc as usize)
                    .ok_or_else(|| bad(format!("word {i}: doc {} out of range", p.doc)))?;
                if prev.is_some_and(|d| d >= p.doc)
                    || p.count == 0
                    || p.count > size
                    || p.first_half > p.count
                {
                    return Err(bad(format!("word {i}: invalid posting {p:?}")));
                }
                prev = Some(p.doc);
                list.push(p);
            }
            postings.push(list);
        }
        Ok(Self {
            vocab,
            doc_sizes,
            postings,
            total_tokens,
        })
    }
}

fn partial_index(docs: &[RawDocument], config: &TokenizerConfig) -> CorpusIndex {
    let mut index = CorpusIndex::new();
    let mut tokens = Vec::new();
    for doc in docs {
        tokens.clear();
        tokenize_into(&doc.text, config, &mut tokens);
        index.add_document(&tokens);
    }
    index
}

/// Builds an index from a document stream using the default execution
/// strategy.
pub fn build_index<I>(docs: I, config: &TokenizerConfig) -> Result<CorpusIndex, IndexError>
where
    I: IntoIterator<Item = Result<RawDocument, IngestError>>,
{
    build_index_with(docs, config, Execution::default())
}

/// Builds an index by tokenizing fixed-size partitions of the stream
/// independently and merging them in stream order. The result does not
/// depend on `exec` or the number of workers.
pub fn build_index_with<I>(
    docs: I,
    config: &TokenizerConfig,
    exec: Execution,
) -> Result<CorpusIndex, IndexError>
where
    I: IntoIterator<Item = Result<RawDocument, IngestError>>,
{
    let batch_size = PARTITION_DOCS * PARTITIONS_PER_BATCH;
    let mut index = CorpusIndex::new();
    let mut batch = Vec::with_capacity(batch_size);
    let flush = |batch: &mut Vec<RawDocument>, index: &mut CorpusIndex| {
        let parts: Vec<&[RawDocument]> = batch.chunks(PARTITION_DOCS).collect();
        let partials = exec.map_slice(&parts, |part| partial_index(part, config));
        for partial in partials {
            *index = std::mem::take(index).merge(partial);
        }
        batch.clear();
    };
    for doc in docs {
        batch.push(doc?);
        if batch.len() == batch_size {
            flush(&mut batch, &mut index);
        }
    }
    flush(&mut batch, &mut index);
    Ok(index)
}

/// Builds an index from in-memory texts, one document per entry.
pub fn index_texts<S: AsRef<str>>(texts: &[S], config: &TokenizerConfig) -> CorpusIndex {
    let docs = texts.iter().enumerate().map(|(doc_id, t)| {
        Ok(RawDocument {
            doc_id,
            text: t.as_ref().to_string(),
        })
    });
    build_index(docs, config).expect("in-memory documents cannot fail to load")
}
