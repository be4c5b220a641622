//! Ranked frequency lists and raw-vs-robust lexicon comparison.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use log::warn;
use thiserror::Error;

use crate::index::CorpusIndex;
use crate::report::format_number;
use crate::robust::RobustCount;

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("cutoff k must be at least 1")]
    ZeroCutoff,
    #[error("score list has {scores} entries but the vocabulary has {words}")]
    ScoreLengthMismatch { scores: usize, words: usize },
    #[error("ranked lists cover different vocabularies ({0})")]
    VocabularyMismatch(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingKey {
    Raw,
    Robust,
    Burst,
    /// Read from a file; origin unknown.
    External,
}

impl fmt::Display for RankingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankingKey::Raw => "raw",
            RankingKey::Robust => "robust",
            RankingKey::Burst => "burst",
            RankingKey::External => "external",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub word: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Words ordered by score descending, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub key: RankingKey,
    pub entries: Vec<RankedEntry>,
}

pub const RANKED_HEADER: &str = "rank\tword\tscore";

impl RankedList {
    pub fn from_scores<I, S>(scores: I, key: RankingKey) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut pairs: Vec<(String, f64)> = scores.into_iter().map(|(w, s)| (w.into(), s)).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (word, score))| RankedEntry {
                word,
                score,
                rank: i + 1,
            })
            .collect();
        Self { key, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of a word.
    pub fn rank_of(&self, word: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.word == word).map(|e| e.rank)
    }

    pub fn top(&self, k: usize) -> &[RankedEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    /// `rank<TAB>word<TAB>score` lines, header first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(RANKED_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.rank, e.word, format_number(e.score)));
        }
        out
    }

    /// Parses the ranked-list file format. A leading header line is
    /// optional. Ranks must run 1, 2, 3, ... and words must be unique;
    /// scores are kept as read.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| LexiconError::Parse {
                line: line_no,
                reason,
            };
            let line = line.map_err(|e| err(e.to_string()))?;
            if line_no == 1 && line == RANKED_HEADER {
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            }
            let rank: usize = fields[0]
                .parse()
                .map_err(|_| err(format!("bad rank `{}`", fields[0])))?;
            if rank != entries.len() + 1 {
                return Err(err(format!("expected rank {}, got {rank}", entries.len() + 1)));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|_| err(format!("bad score `{}`", fields[2])))?;
            let word = fields[1].to_string();
            if word.is_empty() || !seen.insert(word.clone()) {
                return Err(err(format!("empty or duplicate word `{word}`")));
            }
            entries.push(RankedEntry { word, score, rank });
        }
        Ok(Self {
            key: RankingKey::External,
            entries,
        })
    }
}

/// Ranks the whole vocabulary of `index` by `scores`, indexed by word id.
pub fn rank_list(index: &CorpusIndex, scores: &[f64], key: RankingKey) -> Result<RankedList, LexiconError> {
    let words = index.vocabulary().words();
    if scores.len() != words.len() {
        return Err(LexiconError::ScoreLengthMismatch {
            scores: scores.len(),
            words: words.len(),
        });
    }
    Ok(RankedList::from_scores(
        words.iter().map(String::as_str).zip(scores.iter().copied()),
        key,
    ))
}

/// Raw-count ranking of the vocabulary.
pub fn raw_list(index: &CorpusIndex) -> RankedList {
    let scores: Vec<f64> = index
        .vocabulary()
        .ids()
        .map(|id| index.word_count(id).unwrap_or(0) as f64)
        .collect();
    rank_list(index, &scores, RankingKey::Raw).expect("one score per word")
}

/// Robust-count ranking from per-word robust counts in word-id order.
pub fn robust_list(index: &CorpusIndex, counts: &[RobustCount]) -> Result<RankedList, LexiconError> {
    let scores: Vec<f64> = counts.iter().map(|rc| rc.robust).collect();
    rank_list(index, &scores, RankingKey::Robust)
}

/// Words ranked by LL burst score, most affected first.
pub fn burst_report(index: &CorpusIndex, counts: &[RobustCount]) -> Result<RankedList, LexiconError> {
    let scores: Vec<f64> = counts.iter().map(|rc| rc.ll).collect();
    rank_list(index, &scores, RankingKey::Burst)
}

/// Top-`k` words of a (robust) ranked list.
pub fn core_lexicon(list: &RankedList, k: usize) -> Result<BTreeSet<String>, LexiconError> {
    if k == 0 {
        return Err(LexiconError::ZeroCutoff);
    }
    if k > list.len() {
        warn!("core lexicon cutoff {k} exceeds list length {}; truncating", list.len());
    }
    Ok(list.top(k).iter().map(|e| e.word.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffEntry {
    pub word: String,
    pub raw_rank: usize,
    pub robust_rank: usize,
}

impl DiffEntry {
    /// Positive when the word moved down in the robust list.
    pub fn rank_delta(&self) -> i64 {
        self.robust_rank as i64 - self.raw_rank as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconDiff {
    pub k: usize,
    /// In the raw top-k but not the robust top-k, largest drop first.
    pub demoted: Vec<DiffEntry>,
    /// In the robust top-k but not the raw top-k, largest rise first.
    pub promoted: Vec<DiffEntry>,
}

/// Compares the top-`k` prefixes of two rankings of the same vocabulary.
pub fn lexdiff(raw: &RankedList, robust: &RankedList, k: usize) -> Result<LexiconDiff, LexiconError> {
    if k == 0 {
        return Err(LexiconError::ZeroCutoff);
    }
    let raw_ranks: HashMap<&str, usize> = raw.entries.iter().map(|e| (e.word.as_str(), e.rank)).collect();
    let robust_ranks: HashMap<&str, usize> =
        robust.entries.iter().map(|e| (e.word.as_str(), e.rank)).collect();
    if raw_ranks.len() != robust_ranks.len() {
        return Err(LexiconError::VocabularyMismatch(format!(
            "{} vs {} words",
            raw_ranks.len(),
            robust_ranks.len()
        )));
    }
    if let Some(missing) = raw.entries.iter().find(|e| !robust_ranks.contains_key(e.word.as_str())) {
        return Err(LexiconError::VocabularyMismatch(format!(
            "`{}` missing from the second list",
            missing.word
        )));
    }
    let k = if k > raw.len() {
        warn!("lexdiff cutoff {k} exceeds list length {}; truncating", raw.len());
        raw.len()
    } else {
        k
    };
    let entry = |word: &str| DiffEntry {
        word: word.to_string(),
        raw_rank: raw_ranks[word],
        robust_rank: robust_ranks[word],
    };
    let mut demoted: Vec<DiffEntry> = raw
        .top(k)
        .iter()
        .filter(|e| robust_ranks[e.word.as_str()] > k)
        .map(|e| entry(&e.word))
        .collect();
    let mut promoted: Vec<DiffEntry> = robust
        .top(k)
        .iter()
        .filter(|e| raw_ranks[e.word.as_str()] > k)
        .map(|e| entry(&e.word))
        .collect();
    demoted.sort_by(|a, b| b.rank_delta().cmp(&a.rank_delta()).then_with(|| a.word.cmp(&b.word)));
    promoted.sort_by(|a, b| a.rank_delta().cmp(&b.rank_delta()).then_with(|| a.word.cmp(&b.word)));
    Ok(LexiconDiff { k, demoted, promoted })
}
