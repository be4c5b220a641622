//! Seeded synthetic corpora with known structure, for checking the
//! estimators end to end and for benchmarks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Zipf};

use crate::index::CorpusIndex;

/// Zipfian background text with one planted burst word and an optional
/// control word spread uniformly at the same total count.
#[derive(Debug, Clone)]
pub struct BurstCorpusSpec {
    pub docs: usize,
    pub doc_len: usize,
    pub vocab: usize,
    pub zipf_exponent: f64,
    pub burst_word: String,
    /// Per-token probability of the burst word in every document.
    pub background_rate: f64,
    pub burst_docs: usize,
    /// Share of a burst document's tokens taken by the burst word.
    pub burst_fill: f64,
    pub control_word: Option<String>,
    pub seed: u64,
}

impl Default for BurstCorpusSpec {
    fn default() -> Self {
        Self {
            docs: 1000,
            doc_len: 200,
            vocab: 2000,
            zipf_exponent: 1.0,
            burst_word: "burstword".into(),
            background_rate: 0.01,
            burst_docs: 5,
            burst_fill: 0.5,
            control_word: Some("controlword".into()),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BurstCorpus {
    pub docs: Vec<Vec<String>>,
    pub burst_doc_ids: Vec<usize>,
}

/// Name of the Zipf word at 1-based `rank`.
pub fn zipf_word(rank: usize) -> String {
    format!("z{rank}")
}

pub fn burst_corpus(spec: &BurstCorpusSpec) -> BurstCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = Zipf::new(spec.vocab as f64, spec.zipf_exponent).expect("valid Zipf parameters");
    let mut docs: Vec<Vec<String>> = (0..spec.docs)
        .map(|_| {
            (0..spec.doc_len)
                .map(|_| {
                    if rng.random::<f64>() < spec.background_rate {
                        spec.burst_word.clone()
                    } else {
                        zipf_word(zipf.sample(&mut rng) as usize)
                    }
                })
                .collect()
        })
        .collect();

    let mut burst_doc_ids = sample(&mut rng, spec.docs, spec.burst_docs.min(spec.docs)).into_vec();
    burst_doc_ids.sort_unstable();
    let fill = (spec.burst_fill * spec.doc_len as f64).round() as usize;
    for &d in &burst_doc_ids {
        let doc = &mut docs[d];
        let present = doc.iter().filter(|t| **t == spec.burst_word).count();
        let free: Vec<usize> = (0..doc.len()).filter(|&i| doc[i] != spec.burst_word).collect();
        let extra = fill.saturating_sub(present).min(free.len());
        for j in sample(&mut rng, free.len(), extra) {
            doc[free[j]] = spec.burst_word.clone();
        }
    }

    if let Some(control) = &spec.control_word {
        let target: usize = docs
            .iter()
            .map(|d| d.iter().filter(|t| **t == spec.burst_word).count())
            .sum();
        let mut placed = 0;
        while placed < target {
            let d = rng.random_range(0..spec.docs);
            let i = rng.random_range(0..spec.doc_len);
            let tok = &mut docs[d][i];
            if *tok != spec.burst_word && tok != control {
                *tok = control.clone();
                placed += 1;
            }
        }
    }
    BurstCorpus {
        docs,
        burst_doc_ids,
    }
}

/// Documents drawn from the LDA generative process.
#[derive(Debug, Clone)]
pub struct LdaCorpusSpec {
    pub docs: usize,
    pub doc_len: usize,
    pub vocab: usize,
    pub topics: usize,
    /// Dirichlet concentration of the document-topic mixtures.
    pub alpha: f64,
    /// Dirichlet concentration of the topic-word distributions.
    pub topic_concentration: f64,
    pub seed: u64,
}

impl Default for LdaCorpusSpec {
    fn default() -> Self {
        Self {
            docs: 2000,
            doc_len: 100,
            vocab: 500,
            topics: 5,
            alpha: 0.1,
            topic_concentration: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdaCorpus {
    pub docs: Vec<Vec<String>>,
    pub words: Vec<String>,
    /// Generating topic-word distributions over `words`.
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

fn dirichlet(rng: &mut ChaCha8Rng, concentration: f64, dim: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn lda_corpus(spec: &LdaCorpusSpec) -> LdaCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let words: Vec<String> = (0..spec.vocab).map(|i| format!("v{i}")).collect();
    let phi: Vec<Vec<f64>> = (0..spec.topics)
        .map(|_| dirichlet(&mut rng, spec.topic_concentration, spec.vocab))
        .collect();
    let mut theta = Vec::with_capacity(spec.docs);
    let docs = (0..spec.docs)
        .map(|_| {
            let mix = dirichlet(&mut rng, spec.alpha, spec.topics);
            let doc = (0..spec.doc_len)
                .map(|_| {
                    let z = categorical(&mut rng, &mix);
                    words[categorical(&mut rng, &phi[z])].clone()
                })
                .collect();
            theta.push(mix);
            doc
        })
        .collect();
    LdaCorpus {
        docs,
        words,
        phi,
        theta,
    }
}

/// Indexes pre-tokenized documents.
pub fn index_tokens<S: AsRef<str>>(docs: &[Vec<S>]) -> CorpusIndex {
    let mut index = CorpusIndex::new();
    for doc in docs {
        index.add_document(doc);
    }
    index
}

/// Writes documents in the one-document-per-line format.
pub fn write_lines_corpus<S: AsRef<str>>(docs: &[Vec<S>], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for doc in docs {
        let line: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()
}
