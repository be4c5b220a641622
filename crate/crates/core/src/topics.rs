//! LDA topic models fitted by collapsed Gibbs sampling, corpus-level topic
//! proportions, and Jensen–Shannon comparison of topics across corpora.
//!
//! `phi` holds one topic-word distribution per topic and `theta` one
//! document-topic distribution per document. Both are computed from the
//! sampler's counts averaged over the post-burn-in sweeps, smoothed by the
//! Dirichlet priors.
//!
//! The default sampler is a single sequential chain and is bit-reproducible
//! for a given seed. The sharded mode splits documents across workers that
//! each sample against a snapshot of the topic-word counts and merge their
//! changes after every sweep. That is an approximation of the collapsed
//! sampler; its output depends on the shard count but not on scheduling.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::index::CorpusIndex;
use crate::par::Execution;

const MAGIC: &[u8; 4] = b"CALD";
const FORMAT_VERSION: u32 = 1;
/// Tolerance on the total mass of a distribution.
const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("invalid LDA configuration: {0}")]
    InvalidConfig(String),
    #[error("vocabulary is empty after pruning")]
    EmptyVocabulary,
    #[error("{topics} topics requested but only {words} words survive pruning")]
    TooManyTopics { topics: usize, words: usize },
    #[error("topic {topic} out of range for {topics} topics")]
    TopicOutOfRange { topic: usize, topics: usize },
    #[error("distribution lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input is not a probability distribution: {0}")]
    NotNormalized(String),
    #[error("the two models share no vocabulary")]
    NoSharedVocabulary,
    #[error("topic {0} has no probability mass on the shared vocabulary")]
    NoSharedMass(usize),
    #[error("invalid model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    /// Total Gibbs sweeps.
    pub iters: usize,
    /// Sweeps discarded before averaging.
    pub burn_in: usize,
    pub seed: u64,
    /// Keep words occurring in at least this many documents.
    pub min_df: usize,
    /// Keep words occurring in at most this share of documents.
    pub max_df_frac: f64,
    /// Use the sharded approximate sampler.
    pub parallel: bool,
    /// Shard count for the sharded sampler; 0 means one per worker thread.
    pub shards: usize,
}

impl LdaConfig {
    /// Defaults for `topics` topics: `alpha = 50 / K`, `beta = 0.01`.
    pub fn new(topics: usize) -> Self {
        Self {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: 0.01,
            iters: 1000,
            burn_in: 200,
            seed: 0,
            min_df: 5,
            max_df_frac: 0.5,
            parallel: false,
            shards: 0,
        }
    }

    /// Keeps every word regardless of document frequency.
    pub fn without_pruning(mut self) -> Self {
        self.min_df = 1;
        self.max_df_frac = 1.0;
        self
    }

    pub fn validate(&self) -> Result<(), TopicsError> {
        let fail = |m: String| Err(TopicsError::InvalidConfig(m));
        if self.topics < 2 {
            return fail(format!("need at least 2 topics, got {}", self.topics));
        }
        if self.topics > u32::MAX as usize {
            return fail("too many topics".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return fail(format!("beta must be > 0, got {}", self.beta));
        }
        if self.iters <= self.burn_in {
            return fail(format!(
                "iters ({}) must exceed burn-in ({})",
                self.iters, self.burn_in
            ));
        }
        if !(self.max_df_frac > 0.0 && self.max_df_frac <= 1.0) {
            return fail(format!("max_df_frac must be in (0, 1], got {}", self.max_df_frac));
        }
        Ok(())
    }
}

/// Sampler state. Tokens are stored document by document; `doc_offsets`
/// has `T + 1` entries delimiting each document's tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub topics: usize,
    pub vocab_size: usize,
    /// `K x V`, row-major.
    pub topic_word: Vec<u32>,
    pub topic_totals: Vec<u32>,
    /// `T x K`, row-major.
    pub doc_topic: Vec<u32>,
    pub doc_offsets: Vec<usize>,
    pub tokens: Vec<u32>,
    pub assignments: Vec<u32>,
}

impl GibbsState {
    pub fn num_docs(&self) -> usize {
        self.doc_offsets.len().saturating_sub(1)
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Checks that every count matrix agrees with the token assignments.
    pub fn is_consistent(&self) -> bool {
        let k = self.topics;
        let mut tw = vec![0u32; k * self.vocab_size];
        let mut dt = vec![0u32; self.doc_topic.len()];
        for d in 0..self.num_docs() {
            for t in self.doc_offsets[d]..self.doc_offsets[d + 1] {
                let z = self.assignments[t] as usize;
                tw[z * self.vocab_size + self.tokens[t] as usize] += 1;
                dt[d * k + z] += 1;
            }
        }
        let totals: Vec<u32> = (0..k)
            .map(|z| tw[z * self.vocab_size..(z + 1) * self.vocab_size].iter().sum())
            .collect();
        let sum = |v: &[u32]| v.iter().map(|&x| x as u64).sum::<u64>();
        tw == self.topic_word
            && dt == self.doc_topic
            && totals == self.topic_totals
            && sum(&self.topic_word) == self.tokens.len() as u64
            && sum(&self.doc_topic) == self.tokens.len() as u64
    }
}

/// Samples one token's topic given counts with the token removed.
#[inline]
#[allow(clippy::too_many_arguments)]
fn draw_topic(
    rng: &mut ChaCha8Rng,
    weights: &mut [f64],
    doc_row: &[u32],
    topic_word: &[u32],
    topic_totals: &[u32],
    word: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
) -> usize {
    let vbeta = vocab_size as f64 * beta;
    let mut total = 0.0;
    for (z, w) in weights.iter_mut().enumerate() {
        let p = (doc_row[z] as f64 + alpha) * (topic_word[z * vocab_size + word] as f64 + beta)
            / (topic_totals[z] as f64 + vbeta);
        total += p;
        *w = total;
    }
    let u = rng.random::<f64>() * total;
    weights.iter().position(|&c| u < c).unwrap_or(weights.len() - 1)
}

/// One document-range worth of sampler state for the sharded mode.
struct Shard<'a> {
    first_doc: usize,
    offsets: &'a [usize],
    tokens: &'a [u32],
    assignments: &'a mut [u32],
    doc_topic: &'a mut [u32],
    topic_word: Vec<u32>,
    topic_totals: Vec<u32>,
}

pub struct LdaSampler {
    config: LdaConfig,
    vocab: Vec<String>,
    state: GibbsState,
    rng: ChaCha8Rng,
    sweeps: usize,
    acc_topic_word: Vec<f64>,
    acc_doc_topic: Vec<f64>,
    samples: usize,
    exec: Execution,
}

impl LdaSampler {
    /// Prunes the vocabulary, lays out the tokens and draws initial topics.
    pub fn new(index: &CorpusIndex, config: &LdaConfig) -> Result<Self, TopicsError> {
        Self::with_execution(index, config, Execution::default())
    }

    pub fn with_execution(
        index: &CorpusIndex,
        config: &LdaConfig,
        exec: Execution,
    ) -> Result<Self, TopicsError> {
        config.validate()?;
        let t = index.num_docs();
        let max_df = config.max_df_frac * t as f64;
        let mut vocab = Vec::new();
        let mut kept: Vec<(u32, &[crate::index::Posting])> = Vec::new();
        for id in index.vocabulary().ids() {
            let postings = index.postings(id).expect("id from this vocabulary");
            let df = postings.len();
            if df >= config.min_df && df as f64 <= max_df && df > 0 {
                kept.push((vocab.len() as u32, postings));
                vocab.push(index.word(id).expect("id from this vocabulary").to_string());
            }
        }
        if vocab.is_empty() {
            return Err(TopicsError::EmptyVocabulary);
        }
        if config.topics > vocab.len() {
            return Err(TopicsError::TooManyTopics {
                topics: config.topics,
                words: vocab.len(),
            });
        }

        // Bag-of-words layout: within a document, tokens are grouped by word
        // in vocabulary order.
        let mut per_doc: Vec<Vec<u32>> = vec![Vec::new(); t];
        for (w, postings) in &kept {
            for p in postings.iter() {
                per_doc[p.doc as usize].extend(std::iter::repeat_n(*w, p.count as usize));
            }
        }
        let mut doc_offsets = Vec::with_capacity(t + 1);
        doc_offsets.push(0);
        let mut tokens = Vec::with_capacity(per_doc.iter().map(Vec::len).sum());
        for doc in per_doc {
            tokens.extend(doc);
            doc_offsets.push(tokens.len());
        }

        let k = config.topics;
        let v = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut state = GibbsState {
            topics: k,
            vocab_size: v,
            topic_word: vec![0; k * v],
            topic_totals: vec![0; k],
            doc_topic: vec![0; t * k],
            doc_offsets,
            assignments: Vec::with_capacity(tokens.len()),
            tokens,
        };
        for d in 0..t {
            for i in state.doc_offsets[d]..state.doc_offsets[d + 1] {
                let z = rng.random_range(0..k);
                let w = state.tokens[i] as usize;
                state.assignments.push(z as u32);
                state.topic_word[z * v + w] += 1;
                state.topic_totals[z] += 1;
                state.doc_topic[d * k + z] += 1;
            }
        }
        Ok(Self {
            config: config.clone(),
            vocab,
            acc_topic_word: vec![0.0; k * v],
            acc_doc_topic: vec![0.0; t * k],
            state,
            rng,
            sweeps: 0,
            samples: 0,
            exec,
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    /// Runs one sweep over every token, then accumulates the counts if the
    /// burn-in is over.
    pub fn sweep(&mut self) {
        if self.config.parallel {
            self.sweep_sharded();
        } else {
            self.sweep_sequential();
        }
        if self.sweeps >= self.config.burn_in {
            for (acc, &c) in self.acc_topic_word.iter_mut().zip(&self.state.topic_word) {
                *acc += c as f64;
            }
            for (acc, &c) in self.acc_doc_topic.iter_mut().zip(&self.state.doc_topic) {
                *acc += c as f64;
            }
            self.samples += 1;
        }
        self.sweeps += 1;
    }

    fn sweep_sequential(&mut self) {
        let k = self.config.topics;
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let s = &mut self.state;
        let v = s.vocab_size;
        let mut weights = vec![0.0; k];
        for d in 0..s.num_docs() {
            let row = &mut s.doc_topic[d * k..(d + 1) * k];
            for i in s.doc_offsets[d]..s.doc_offsets[d + 1] {
                let w = s.tokens[i] as usize;
                let old = s.assignments[i] as usize;
                row[old] -= 1;
                s.topic_word[old * v + w] -= 1;
                s.topic_totals[old] -= 1;
                let z = draw_topic(
                    &mut self.rng,
                    &mut weights,
                    row,
                    &s.topic_word,
                    &s.topic_totals,
                    w,
                    v,
                    alpha,
                    beta,
                );
                row[z] += 1;
                s.topic_word[z * v + w] += 1;
                s.topic_totals[z] += 1;
                s.assignments[i] = z as u32;
            }
        }
    }

    fn sweep_sharded(&mut self) {
        let k = self.config.topics;
        let (alpha, beta, seed) = (self.config.alpha, self.config.beta, self.config.seed);
        let sweep = self.sweeps as u64;
        let s = &mut self.state;
        let v = s.vocab_size;
        let t = s.num_docs();
        let shard_count = match self.config.shards {
            0 => self.exec.workers(),
            n => n,
        }
        .clamp(1, t.max(1));

        // contiguous document ranges of near-equal size
        let bounds: Vec<usize> = (0..=shard_count).map(|i| i * t / shard_count).collect();
        let mut shards = Vec::with_capacity(shard_count);
        let mut assignments: &mut [u32] = &mut s.assignments;
        let mut doc_topic: &mut [u32] = &mut s.doc_topic;
        for w in bounds.windows(2) {
            let (d0, d1) = (w[0], w[1]);
            let (t0, t1) = (s.doc_offsets[d0], s.doc_offsets[d1]);
            let (a, rest) = std::mem::take(&mut assignments).split_at_mut(t1 - t0);
            assignments = rest;
            let (dt, rest) = std::mem::take(&mut doc_topic).split_at_mut((d1 - d0) * k);
            doc_topic = rest;
            shards.push(Shard {
                first_doc: d0,
                offsets: &s.doc_offsets[d0..=d1],
                tokens: &s.tokens[t0..t1],
                assignments: a,
                doc_topic: dt,
                topic_word: s.topic_word.clone(),
                topic_totals: s.topic_totals.clone(),
            });
        }

        self.exec.for_each_mut(&mut shards, |shard_idx, shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((sweep << 24) | shard_idx as u64);
            let mut weights = vec![0.0; k];
            let base = shard.offsets[0];
            for local_doc in 0..shard.offsets.len() - 1 {
                let row = &mut shard.doc_topic[local_doc * k..(local_doc + 1) * k];
                for i in shard.offsets[local_doc] - base..shard.offsets[local_doc + 1] - base {
                    let w = shard.tokens[i] as usize;
                    let old = shard.assignments[i] as usize;
                    row[old] -= 1;
                    shard.topic_word[old * v + w] -= 1;
                    shard.topic_totals[old] -= 1;
                    let z = draw_topic(
                        &mut rng,
                        &mut weights,
                        row,
                        &shard.topic_word,
                        &shard.topic_totals,
                        w,
                        v,
                        alpha,
                        beta,
                    );
                    row[z] += 1;
                    shard.topic_word[z * v + w] += 1;
                    shard.topic_totals[z] += 1;
                    shard.assignments[i] = z as u32;
                }
            }
            debug_assert!(shard.first_doc + shard.offsets.len() - 1 <= t);
        });

        // global += sum of per-shard changes
        let mut topic_word: Vec<i64> = s.topic_word.iter().map(|&c| c as i64).collect();
        let mut totals: Vec<i64> = s.topic_totals.iter().map(|&c| c as i64).collect();
        for shard in &shards {
            for ((g, &local), &base) in topic_word.iter_mut().zip(&shard.topic_word).zip(&s.topic_word) {
                *g += local as i64 - base as i64;
            }
            for ((g, &local), &base) in totals.iter_mut().zip(&shard.topic_totals).zip(&s.topic_totals) {
                *g += local as i64 - base as i64;
            }
        }
        drop(shards);
        s.topic_word = topic_word.into_iter().map(|c| c as u32).collect();
        s.topic_totals = totals.into_iter().map(|c| c as u32).collect();
    }

    /// Builds the model from the averaged post-burn-in counts.
    pub fn finish(self) -> TopicModel {
        let k = self.config.topics;
        let v = self.state.vocab_size;
        let t = self.state.num_docs();
        let samples = self.samples.max(1) as f64;
        let (acc_tw, acc_dt) = if self.samples == 0 {
            let tw = self.state.topic_word.iter().map(|&c| c as f64).collect();
            let dt = self.state.doc_topic.iter().map(|&c| c as f64).collect();
            (tw, dt)
        } else {
            (self.acc_topic_word, self.acc_doc_topic)
        };
        let smooth = |row: &[f64], prior: f64| -> Vec<f64> {
            let raw: Vec<f64> = row.iter().map(|&c| c / samples + prior).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        };
        let phi = (0..k).map(|z| smooth(&acc_tw[z * v..(z + 1) * v], self.config.beta)).collect();
        let theta = (0..t).map(|d| smooth(&acc_dt[d * k..(d + 1) * k], self.config.alpha)).collect();
        TopicModel {
            config: self.config,
            vocab: self.vocab,
            phi,
            theta,
            state: self.state,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub config: LdaConfig,
    pub vocab: Vec<String>,
    /// `K` topic-word distributions over `vocab`.
    pub phi: Vec<Vec<f64>>,
    /// `T` document-topic distributions.
    pub theta: Vec<Vec<f64>>,
    /// Final sampler state: count matrices and token assignments.
    pub state: GibbsState,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.phi.len()
    }

    pub fn table(&self) -> TopicTable<'_> {
        TopicTable {
            words: &self.vocab,
            phi: &self.phi,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let c = &self.config;
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(c.topics as u64)?;
        w.write_f64::<LittleEndian>(c.alpha)?;
        w.write_f64::<LittleEndian>(c.beta)?;
        w.write_u64::<LittleEndian>(c.iters as u64)?;
        w.write_u64::<LittleEndian>(c.burn_in as u64)?;
        w.write_u64::<LittleEndian>(c.seed)?;
        w.write_u64::<LittleEndian>(c.min_df as u64)?;
        w.write_f64::<LittleEndian>(c.max_df_frac)?;
        w.write_u8(c.parallel as u8)?;
        w.write_u64::<LittleEndian>(c.shards as u64)?;

        w.write_u64::<LittleEndian>(self.vocab.len() as u64)?;
        for word in &self.vocab {
            w.write_u32::<LittleEndian>(word.len() as u32)?;
            w.write_all(word.as_bytes())?;
        }
        w.write_u64::<LittleEndian>(self.theta.len() as u64)?;
        for x in self.phi.iter().chain(&self.theta).flatten() {
            w.write_f64::<LittleEndian>(*x)?;
        }
        let s = &self.state;
        w.write_u64::<LittleEndian>(s.tokens.len() as u64)?;
        for &o in &s.doc_offsets {
            w.write_u64::<LittleEndian>(o as u64)?;
        }
        for &x in s.topic_word.iter().chain(&s.doc_topic).chain(&s.tokens).chain(&s.assignments) {
            w.write_u32::<LittleEndian>(x)?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, TopicsError> {
        let bad = |m: &str| TopicsError::Format(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        if r.read_u32::<LittleEndian>()? != FORMAT_VERSION {
            return Err(bad("unsupported version"));
        }
        let config = LdaConfig {
            topics: r.read_u64::<LittleEndian>()? as usize,
            alpha: r.read_f64::<LittleEndian>()?,
            beta: r.read_f64::<LittleEndian>()?,
            iters: r.read_u64::<LittleEndian>()? as usize,
            burn_in: r.read_u64::<LittleEndian>()? as usize,
            seed: r.read_u64::<LittleEndian>()?,
            min_df: r.read_u64::<LittleEndian>()? as usize,
            max_df_frac: r.read_f64::<LittleEndian>()?,
            parallel: r.read_u8()? != 0,
            shards: r.read_u64::<LittleEndian>()? as usize,
        };
        config.validate().map_err(|e| TopicsError::Format(e.to_string()))?;
        let k = config.topics;
        let v = r.read_u64::<LittleEndian>()? as usize;
        let mut vocab = Vec::with_capacity(v.min(1 << 20));
        for _ in 0..v {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            vocab.push(String::from_utf8(buf).map_err(|_| bad("word is not UTF-8"))?);
        }
        let t = r.read_u64::<LittleEndian>()? as usize;
        let mut read_rows = |rows: usize, cols: usize| -> io::Result<Vec<Vec<f64>>> {
            (0..rows)
                .map(|_| (0..cols).map(|_| r.read_f64::<LittleEndian>()).collect())
                .collect()
        };
        let phi = read_rows(k, v)?;
        let theta = read_rows(t, k)?;
        let n = r.read_u64::<LittleEndian>()? as usize;
        let doc_offsets = (0..=t)
            .map(|_| r.read_u64::<LittleEndian>().map(|o| o as usize))
            .collect::<io::Result<Vec<_>>>()?;
        let mut read_u32s = |len: usize| -> io::Result<Vec<u32>> {
            (0..len).map(|_| r.read_u32::<LittleEndian>()).collect()
        };
        let topic_word = read_u32s(k * v)?;
        let doc_topic = read_u32s(t * k)?;
        let tokens = read_u32s(n)?;
        let assignments = read_u32s(n)?;
        let topic_totals = (0..k)
            .map(|z| topic_word[z * v..(z + 1) * v].iter().sum())
            .collect();
        let state = GibbsState {
            topics: k,
            vocab_size: v,
            topic_word,
            topic_totals,
            doc_topic,
            doc_offsets,
            tokens,
            assignments,
        };
        if state.doc_offsets.first() != Some(&0)
            || state.doc_offsets.last() != Some(&n)
            || state.doc_offsets.windows(2).any(|w| w[0] > w[1])
            || state.tokens.iter().any(|&w| w as usize >= v)
            || state.assignments.iter().any(|&z| z as usize >= k)
            || !state.is_consistent()
        {
            return Err(bad("inconsistent sampler state"));
        }
        Ok(Self {
            config,
            vocab,
            phi,
            theta,
            state,
        })
    }
}

/// Fits an LDA model to the index.
pub fn fit_lda(index: &CorpusIndex, config: &LdaConfig) -> Result<TopicModel, TopicsError> {
    let mut sampler = LdaSampler::new(index, config)?;
    for _ in 0..config.iters {
        sampler.sweep();
    }
    Ok(sampler.finish())
}

/// The `topn` most probable words of a topic, ties broken by word.
pub fn topic_keywords(model: &TopicModel, topic: usize, topn: usize) -> Result<Vec<(String, f64)>, TopicsError> {
    let row = model.phi.get(topic).ok_or(TopicsError::TopicOutOfRange {
        topic,
        topics: model.num_topics(),
    })?;
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| model.vocab[a].cmp(&model.vocab[b])));
    Ok(order
        .into_iter()
        .take(topn)
        .map(|w| (model.vocab[w].clone(), row[w]))
        .collect())
}

/// Mean document-topic distribution: each topic's share of the corpus.
pub fn corpus_topic_proportions(model: &TopicModel) -> Vec<f64> {
    let k = model.num_topics();
    let t = model.theta.len();
    let mut sums = vec![0.0; k];
    for row in &model.theta {
        for (s, x) in sums.iter_mut().zip(row) {
            *s += x;
        }
    }
    if t > 0 {
        for s in &mut sums {
            *s /= t as f64;
        }
    }
    sums
}

fn check_distribution(p: &[f64]) -> Result<(), TopicsError> {
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(TopicsError::NotNormalized(format!("entry {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(TopicsError::NotNormalized(format!("sums to {total}")));
    }
    Ok(())
}

fn kl_to_mixture(p: &[f64], mix: &[f64]) -> f64 {
    p.iter()
        .zip(mix)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &m)| x * (x / m).ln())
        .sum()
}

/// Jensen–Shannon divergence in nats, in `[0, ln 2]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, TopicsError> {
    if p.len() != q.len() {
        return Err(TopicsError::LengthMismatch(p.len(), q.len()));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let mix: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let d = (kl_to_mixture(p, &mix) + kl_to_mixture(q, &mix)) / 2.0;
    Ok(d.max(0.0))
}

/// Topic-word distributions over a vocabulary, borrowed from a model or
/// from any other source of topics.
#[derive(Debug, Clone, Copy)]
pub struct TopicTable<'a> {
    pub words: &'a [String],
    pub phi: &'a [Vec<f64>],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicMatch {
    pub topic_a: usize,
    pub topic_b: usize,
    pub jsd: f64,
}

/// Restricts every topic to `columns` and renormalises.
fn project(table: &TopicTable<'_>, columns: &[usize]) -> Result<Vec<Vec<f64>>, TopicsError> {
    table
        .phi
        .iter()
        .enumerate()
        .map(|(z, row)| {
            let sub: Vec<f64> = columns.iter().map(|&c| row[c]).collect();
            let mass: f64 = sub.iter().sum();
            if mass <= 0.0 || !mass.is_finite() {
                return Err(TopicsError::NoSharedMass(z));
            }
            Ok(sub.into_iter().map(|x| x / mass).collect())
        })
        .collect()
}

/// Greedily pairs topics of `a` and `b` by smallest JSD over their shared
/// vocabulary, until one side runs out. Sorted by JSD ascending.
pub fn align_topics(a: TopicTable<'_>, b: TopicTable<'_>) -> Result<Vec<TopicMatch>, TopicsError> {
    align_topics_with(a, b, Execution::default())
}

pub fn align_topics_with(
    a: TopicTable<'_>,
    b: TopicTable<'_>,
    exec: Execution,
) -> Result<Vec<TopicMatch>, TopicsError> {
    let b_pos: std::collections::HashMap<&str, usize> =
        b.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut shared: Vec<(&str, usize, usize)> = a
        .words
        .iter()
        .enumerate()
        .filter_map(|(i, w)| b_pos.get(w.as_str()).map(|&j| (w.as_str(), i, j)))
        .collect();
    if shared.is_empty() {
        return Err(TopicsError::NoSharedVocabulary);
    }
    shared.sort_unstable_by(|x, y| x.0.cmp(y.0));
    let cols_a: Vec<usize> = shared.iter().map(|s| s.1).collect();
    let cols_b: Vec<usize> = shared.iter().map(|s| s.2).collect();
    let pa = project(&a, &cols_a)?;
    let pb = project(&b, &cols_b)?;

    let rows: Vec<Result<Vec<f64>, TopicsError>> =
        exec.map_slice(&pa, |p| pb.iter().map(|q| jsd(p, q)).collect());
    let mut pairs = Vec::with_capacity(pa.len() * pb.len());
    for (i, row) in rows.into_iter().enumerate() {
        for (j, d) in row?.into_iter().enumerate() {
            pairs.push(TopicMatch {
                topic_a: i,
                topic_b: j,
                jsd: d,
            });
        }
    }
    pairs.sort_by(|x, y| {
        x.jsd
            .total_cmp(&y.jsd)
            .then(x.topic_a.cmp(&y.topic_a))
            .then(x.topic_b.cmp(&y.topic_b))
    });
    let mut used_a = vec![false; pa.len()];
    let mut used_b = vec![false; pb.len()];
    let want = pa.len().min(pb.len());
    let mut out = Vec::with_capacity(want);
    for m in pairs {
        if out.len() == want {
            break;
        }
        if !used_a[m.topic_a] && !used_b[m.topic_b] {
            used_a[m.topic_a] = true;
            used_b[m.topic_b] = true;
            out.push(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::index_texts;
    use crate::ingest::TokenizerConfig;

    fn two_languages(docs_each: usize) -> CorpusIndex {
        let mut texts = Vec::new();
        for i in 0..docs_each {
            texts.push(if i % 2 == 0 { "a b a b b a a b" } else { "b a b b a a" });
            texts.push(if i % 2 == 0 { "x y x y y x x y" } else { "y x y x y y" });
        }
        index_texts(&texts, &TokenizerConfig::default())
    }

    fn config(k: usize, iters: usize, burn_in: usize) -> LdaConfig {
        LdaConfig {
            iters,
            burn_in,
            alpha: 0.1,
            ..LdaConfig::new(k).without_pruning()
        }
    }

    #[test]
    fn config_validation() {
        assert!(LdaConfig::new(1).validate().is_err());
        assert!(LdaConfig { iters: 10, burn_in: 10, ..LdaConfig::new(3) }.validate().is_err());
        assert!(LdaConfig { beta: 0.0, ..LdaConfig::new(3) }.validate().is_err());
        assert!(LdaConfig { max_df_frac: 0.0, ..LdaConfig::new(3) }.validate().is_err());
        let c = LdaConfig::new(4);
        assert_eq!(c.alpha, 12.5);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn separates_disjoint_sublanguages() {
        let index = two_languages(20);
        let model = fit_lda(&index, &config(2, 200, 100)).unwrap();
        let mass = |row: &[f64], words: &[&str]| -> f64 {
            words
                .iter()
                .map(|w| row[model.vocab.iter().position(|v| v == w).unwrap()])
                .sum()
        };
        let ab: Vec<f64> = model.phi.iter().map(|r| mass(r, &["a", "b"])).collect();
        let (ab_topic, xy_topic) = if ab[0] > ab[1] { (0, 1) } else { (1, 0) };
        assert!(ab[ab_topic] >= 0.95, "{ab:?}");
        assert!(mass(&model.phi[xy_topic], &["x", "y"]) >= 0.95);

        let top = topic_keywords(&model, ab_topic, 2).unwrap();
        let mut top: Vec<String> = top.into_iter().map(|(w, _)| w).collect();
        top.sort();
        assert_eq!(top, vec!["a", "b"]);

        let props = corpus_topic_proportions(&model);
        assert!((props[0] - 0.5).abs() < 0.05 && (props[1] - 0.5).abs() < 0.05, "{props:?}");
    }

    #[test]
    fn single_word_corpus() {
        let index = index_texts(&["w w w", "w w", "w w w w"], &TokenizerConfig::default());
        // only one word exists, so two topics cannot be supported
        assert!(matches!(
            fit_lda(&index, &config(2, 20, 10)),
            Err(TopicsError::TooManyTopics { topics: 2, words: 1 })
        ));
    }

    #[test]
    fn near_one_hot_topics() {
        // one dominant word plus a rare one so that K = 2 is admissible
        let mut texts = vec!["w w w w w w w w w w"; 30];
        texts.push("w v");
        let index = index_texts(&texts, &TokenizerConfig::default());
        let model = fit_lda(&index, &config(2, 50, 20)).unwrap();
        let w = model.vocab.iter().position(|x| x == "w").unwrap();
        let dominant = model.phi.iter().filter(|row| row[w] > 0.99).count();
        assert!(dominant >= 1);
        assert_eq!(topic_keywords(&model, 0, 2).unwrap().len(), 2);
    }

    #[test]
    fn pruning_errors() {
        let index = two_languages(3);
        // every word in half the documents; min_df above that empties it
        let cfg = LdaConfig {
            min_df: 100,
            ..config(2, 20, 10)
        };
        assert!(matches!(fit_lda(&index, &cfg), Err(TopicsError::EmptyVocabulary)));
        assert!(matches!(
            fit_lda(&index, &config(5, 20, 10)),
            Err(TopicsError::TooManyTopics { .. })
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let index = two_languages(10);
        let a = fit_lda(&index, &config(2, 60, 30)).unwrap();
        let b = fit_lda(&index, &config(2, 60, 30)).unwrap();
        assert_eq!(a, b);
        let c = fit_lda(&index, &LdaConfig { seed: 9, ..config(2, 60, 30) }).unwrap();
        assert_ne!(a.state.assignments, c.state.assignments);
    }

    #[test]
    fn counts_conserved_every_sweep() {
        let index = two_languages(8);
        for parallel in [false, true] {
            let cfg = LdaConfig {
                parallel,
                shards: 3,
                ..config(3, 30, 10)
            };
            let mut sampler = LdaSampler::new(&index, &cfg).unwrap();
            let n = sampler.state().num_tokens();
            assert!(sampler.state().is_consistent());
            for _ in 0..cfg.iters {
                sampler.sweep();
                let s = sampler.state();
                assert!(s.is_consistent());
                assert_eq!(s.topic_totals.iter().map(|&c| c as usize).sum::<usize>(), n);
            }
        }
    }

    #[test]
    fn sharded_mode_independent_of_scheduling() {
        let index = two_languages(12);
        let cfg = LdaConfig {
            parallel: true,
            shards: 4,
            ..config(2, 40, 20)
        };
        let seq = {
            let mut s = LdaSampler::with_execution(&index, &cfg, Execution::Sequential).unwrap();
            (0..cfg.iters).for_each(|_| s.sweep());
            s.finish()
        };
        let par = {
            let mut s = LdaSampler::with_execution(&index, &cfg, Execution::Parallel).unwrap();
            (0..cfg.iters).for_each(|_| s.sweep());
            s.finish()
        };
        assert_eq!(seq, par);
    }

    #[test]
    fn distributions_are_normalised() {
        let index = two_languages(6);
        let model = fit_lda(&index, &config(3, 30, 10)).unwrap();
        for row in model.phi.iter().chain(&model.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(row.iter().all(|&x| x > 0.0));
        }
        assert!((corpus_topic_proportions(&model).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn keywords_errors_and_full_list() {
        let index = two_languages(4);
        let model = fit_lda(&index, &config(2, 20, 10)).unwrap();
        assert!(matches!(
            topic_keywords(&model, 2, 3),
            Err(TopicsError::TopicOutOfRange { topic: 2, topics: 2 })
        ));
        let all = topic_keywords(&model, 0, 100).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn proportions_of_fixed_theta() {
        let index = two_languages(2);
        let mut model = fit_lda(&index, &config(2, 4, 2)).unwrap();
        model.theta = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(corpus_topic_proportions(&model), vec![0.5, 0.5]);
        model.theta = vec![vec![0.3, 0.7]; 3];
        let p = corpus_topic_proportions(&model);
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn jsd_values() {
        assert_eq!(jsd(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        let eps = 1e-12;
        let d = jsd(&[0.5, 0.5], &[1.0 - eps, eps]).unwrap();
        // B = [0.75, 0.25]: (0.5 ln(2/3) + 0.5 ln 2 + ln(4/3)) / 2
        let expected = (0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln() + (1.0f64 / 0.75).ln()) / 2.0;
        assert!((d - expected).abs() < 1e-9);
        assert!((d - 0.2158).abs() < 1e-4);
        let d = jsd(&[1.0 - eps, eps], &[eps, 1.0 - eps]).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-9);
        assert!(matches!(jsd(&[1.0], &[0.5, 0.5]), Err(TopicsError::LengthMismatch(1, 2))));
        assert!(matches!(jsd(&[0.5, 0.6], &[0.5, 0.5]), Err(TopicsError::NotNormalized(_))));
        assert!(matches!(jsd(&[1.5, -0.5], &[0.5, 0.5]), Err(TopicsError::NotNormalized(_))));
    }

    #[test]
    fn self_alignment_is_identity() {
        let index = two_languages(10);
        let model = fit_lda(&index, &config(3, 40, 20)).unwrap();
        let matches = align_topics(model.table(), model.table()).unwrap();
        assert_eq!(matches.len(), 3);
        for m in matches {
            assert_eq!(m.topic_a, m.topic_b);
            assert_eq!(m.jsd, 0.0);
        }
    }

    #[test]
    fn alignment_needs_shared_words() {
        let wa = vec!["a".to_string(), "b".to_string()];
        let wb = vec!["x".to_string(), "y".to_string()];
        let phi = vec![vec![0.5, 0.5], vec![0.9, 0.1]];
        let a = TopicTable { words: &wa, phi: &phi };
        let b = TopicTable { words: &wb, phi: &phi };
        assert!(matches!(align_topics(a, b), Err(TopicsError::NoSharedVocabulary)));
    }

    #[test]
    fn alignment_projects_onto_shared_words() {
        let wa: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let wb: Vec<String> = ["c", "b", "z"].iter().map(|s| s.to_string()).collect();
        let phi_a = vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.1, 0.8]];
        // b: same shapes on {b, c} after renormalisation, plus mass on z
        let phi_b = vec![vec![0.4, 0.05, 0.55], vec![0.25, 0.25, 0.5]];
        let m = align_topics(
            TopicTable { words: &wa, phi: &phi_a },
            TopicTable { words: &wb, phi: &phi_b },
        )
        .unwrap();
        let mut m = m;
        m.sort_by_key(|x| x.topic_a);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].topic_a, m[0].topic_b), (0, 1));
        assert!(m[0].jsd < 1e-15);
        assert_eq!((m[1].topic_a, m[1].topic_b), (1, 0));
        assert!(m[1].jsd < 1e-15);
    }

    #[test]
    fn model_file_round_trip() {
        let index = two_languages(5);
        let model = fit_lda(&index, &config(2, 20, 10)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = TopicModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        let mut broken = buf.clone();
        let last = broken.len() - 1;
        broken[last] ^= 1; // last assignment now disagrees with the counts
        assert!(TopicModel::read_from(broken.as_slice()).is_err());
        assert!(TopicModel::read_from(&buf[..10]).is_err());
    }
}
