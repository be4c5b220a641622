//! Classical dispersion and burstiness measures over document-level counts.
//!
//! All measures treat documents where the word is absent as zero-count
//! observations; the index stores those implicitly. Statistics that are
//! undefined for a word (no multi-occurrence document for Katz's `B`, no
//! history occurrence for the adaptation rate) are `None`, never zero.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::index::{CorpusIndex, IndexError, WordId};
use crate::par::Execution;

#[derive(Debug, Error, PartialEq)]
pub enum DispersionError {
    #[error("unknown word id {0}")]
    UnknownWord(WordId),
    #[error("word {0} does not occur in the corpus")]
    Absent(WordId),
    #[error("need at least 2 documents, corpus has {0}")]
    TooFewDocuments(usize),
    #[error("no document has at least 2 tokens")]
    NoSplittableDocuments,
}

impl From<IndexError> for DispersionError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::UnknownWord(id) => DispersionError::UnknownWord(id),
            // postings() only fails with UnknownWord
            other => unreachable!("unexpected index error {other}"),
        }
    }
}

fn occurring(index: &CorpusIndex, word: WordId) -> Result<&[crate::index::Posting], DispersionError> {
    let postings = index.postings(word)?;
    if postings.is_empty() {
        return Err(DispersionError::Absent(word));
    }
    Ok(postings)
}

/// Juilland's D, `1 - sigma / (mu * sqrt(T - 1))` over the word's
/// probabilities in all `T` documents, with the population deviation.
pub fn juilland_d(index: &CorpusIndex, word: WordId) -> Result<f64, DispersionError> {
    let postings = occurring(index, word)?;
    let t = index.num_docs();
    if t < 2 {
        return Err(DispersionError::TooFewDocuments(t));
    }
    let sizes = index.doc_sizes();
    let probs = postings
        .iter()
        .map(|p| p.count as f64 / sizes[p.doc as usize] as f64);
    let tf = t as f64;
    let mu = probs.clone().sum::<f64>() / tf;
    let zeros = (t - postings.len()) as f64;
    let ss = probs.map(|p| (p - mu) * (p - mu)).sum::<f64>() + zeros * mu * mu;
    let sigma = (ss / tf).sqrt();
    Ok(1.0 - sigma / (mu * (tf - 1.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationOfProportions {
    pub dp: f64,
    /// DP divided by its maximum `1 - min_i(n_i / N)`; `None` for a
    /// single-document corpus where that maximum is zero.
    pub dp_norm: Option<f64>,
}

/// Gries' DP, `sum_i |c_i / C - n_i / N| / 2` over all documents.
pub fn gries_dp(index: &CorpusIndex, word: WordId) -> Result<DeviationOfProportions, DispersionError> {
    let postings = occurring(index, word)?;
    let sizes = index.doc_sizes();
    let total = index.total_tokens();
    let n = total as f64;
    let c: u64 = postings.iter().map(|p| p.count as u64).sum();
    let cf = c as f64;
    let mut sum = 0.0;
    let mut covered = 0u64;
    for p in postings {
        let size = sizes[p.doc as usize];
        covered += size as u64;
        sum += (p.count as f64 / cf - size as f64 / n).abs();
    }
    // absent documents each contribute n_i / N
    sum += (total - covered) as f64 / n;
    let dp = sum / 2.0;
    let min_size = sizes.iter().copied().min().unwrap_or(0) as u64;
    let dp_norm = (min_size < total).then(|| {
        let max = (total - min_size) as f64 / n;
        (dp / max).clamp(0.0, 1.0)
    });
    Ok(DeviationOfProportions { dp, dp_norm })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatzMeasures {
    pub p0: f64,
    pub p1: f64,
    /// Share of documents containing the word.
    pub alpha: f64,
    /// Share of containing documents that use the word more than once.
    pub gamma: f64,
    /// Mean count in multi-occurrence documents.
    pub burstiness: Option<f64>,
}

/// Distribution `p_r` of per-document counts, `r = 0, 1, 2, ...`, over all
/// `T` documents. Only counts that occur are listed.
pub fn count_distribution(index: &CorpusIndex, word: WordId) -> Result<BTreeMap<u32, f64>, DispersionError> {
    let postings = index.postings(word)?;
    let t = index.num_docs();
    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    if t > postings.len() {
        hist.insert(0, t - postings.len());
    }
    for p in postings {
        *hist.entry(p.count).or_default() += 1;
    }
    Ok(hist.into_iter().map(|(r, n)| (r, n as f64 / t as f64)).collect())
}

pub fn katz_measures(index: &CorpusIndex, word: WordId) -> Result<KatzMeasures, DispersionError> {
    let postings = occurring(index, word)?;
    let t = index.num_docs() as f64;
    let df = postings.len();
    let singles = postings.iter().filter(|p| p.count == 1).count();
    let (multi_docs, multi_tokens) = postings
        .iter()
        .filter(|p| p.count >= 2)
        .fold((0usize, 0u64), |(d, s), p| (d + 1, s + p.count as u64));
    let alpha = df as f64 / t;
    Ok(KatzMeasures {
        p0: (index.num_docs() - df) as f64 / t,
        p1: singles as f64 / t,
        alpha,
        gamma: 1.0 - singles as f64 / df as f64,
        burstiness: (multi_docs > 0).then(|| multi_tokens as f64 / multi_docs as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptation {
    /// P(word in the test half).
    pub prior: f64,
    /// P(word in the test half | word in the history half).
    pub adapt: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
struct AdaptationCounts {
    eligible: usize,
    in_test: usize,
    in_history: usize,
    in_both: usize,
}

impl AdaptationCounts {
    fn observe(&mut self, history: bool, test: bool) {
        self.in_test += test as usize;
        self.in_history += history as usize;
        self.in_both += (history && test) as usize;
    }

    fn finish(self) -> Result<Adaptation, DispersionError> {
        if self.eligible == 0 {
            return Err(DispersionError::NoSplittableDocuments);
        }
        Ok(Adaptation {
            prior: self.in_test as f64 / self.eligible as f64,
            adapt: (self.in_history > 0).then(|| self.in_both as f64 / self.in_history as f64),
        })
    }
}

/// History/test adaptation from token sequences. Each document of `n >= 2`
/// tokens is split at `n / 2` (rounded down), so an odd middle token lands
/// in the test half; shorter documents are skipped.
pub fn church_adaptation<D, S>(docs: D, word: &str) -> Result<Adaptation, DispersionError>
where
    D: IntoIterator,
    D::Item: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut counts = AdaptationCounts::default();
    for doc in docs {
        let tokens = doc.as_ref();
        if tokens.len() < 2 {
            continue;
        }
        counts.eligible += 1;
        let (history, test) = tokens.split_at(tokens.len() / 2);
        counts.observe(
            history.iter().any(|t| t.as_ref() == word),
            test.iter().any(|t| t.as_ref() == word),
        );
    }
    counts.finish()
}

/// The same statistic computed from the index's first-half counts.
pub fn church_adaptation_indexed(index: &CorpusIndex, word: WordId) -> Result<Adaptation, DispersionError> {
    let postings = index.postings(word)?;
    let sizes = index.doc_sizes();
    let mut counts = AdaptationCounts {
        eligible: sizes.iter().filter(|&&n| n >= 2).count(),
        ..Default::default()
    };
    for p in postings {
        if sizes[p.doc as usize] < 2 {
            continue;
        }
        counts.observe(p.first_half > 0, p.count > p.first_half);
    }
    counts.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionRecord {
    pub word: WordId,
    pub count: u64,
    pub doc_freq: usize,
    pub juilland_d: Option<f64>,
    pub dp: DeviationOfProportions,
    pub katz: KatzMeasures,
    pub church: Option<Adaptation>,
}

pub fn dispersion_record(index: &CorpusIndex, word: WordId) -> Result<DispersionRecord, DispersionError> {
    let postings = occurring(index, word)?;
    let juilland = match juilland_d(index, word) {
        Ok(d) => Some(d),
        Err(DispersionError::TooFewDocuments(_)) => None,
        Err(e) => return Err(e),
    };
    let church = match church_adaptation_indexed(index, word) {
        Ok(a) => Some(a),
        Err(DispersionError::NoSplittableDocuments) => None,
        Err(e) => return Err(e),
    };
    Ok(DispersionRecord {
        word,
        count: postings.iter().map(|p| p.count as u64).sum(),
        doc_freq: postings.len(),
        juilland_d: juilland,
        dp: gries_dp(index, word)?,
        katz: katz_measures(index, word)?,
        church,
    })
}

/// Records for every word, in word-id order.
pub fn dispersion_records(index: &CorpusIndex) -> Result<Vec<DispersionRecord>, DispersionError> {
    dispersion_records_with(index, Execution::default())
}

pub fn dispersion_records_with(
    index: &CorpusIndex,
    exec: Execution,
) -> Result<Vec<DispersionRecord>, DispersionError> {
    exec.map_range(index.vocabulary().len(), |i| {
        dispersion_record(index, WordId(i as u32))
    })
    .into_iter()
    .collect()
}
