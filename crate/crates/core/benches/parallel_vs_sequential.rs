use std::hint::black_box;

use corpus_anatomy::dispersion::dispersion_records_with;
use corpus_anatomy::index::build_index_with;
use corpus_anatomy::robust::robust_counts_with;
use corpus_anatomy::synth::{burst_corpus, index_tokens, lda_corpus, BurstCorpusSpec, LdaCorpusSpec};
use corpus_anatomy::topics::{align_topics_with, LdaSampler, TopicTable};
use corpus_anatomy::{Execution, LdaConfig, RawDocument, RobustParams, TokenizerConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STRATEGIES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn burst_docs() -> Vec<Vec<String>> {
    burst_corpus(&BurstCorpusSpec {
        docs: 4000,
        ..BurstCorpusSpec::default()
    })
    .docs
}

fn bench_index(c: &mut Criterion) {
    let raw: Vec<RawDocument> = burst_docs()
        .into_iter()
        .enumerate()
        .map(|(doc_id, tokens)| RawDocument {
            doc_id,
            text: tokens.join(" "),
        })
        .collect();
    let config = TokenizerConfig::default();
    let mut group = c.benchmark_group("build_index");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_index_with(raw.iter().cloned().map(Ok), &config, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_word_statistics(c: &mut Criterion) {
    let index = index_tokens(&burst_docs());
    let params = RobustParams::default();
    let mut group = c.benchmark_group("robust_counts");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| robust_counts_with(black_box(&index), &params, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("dispersion_records");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dispersion_records_with(black_box(&index), exec).unwrap())
        });
    }
    group.finish();
}

fn random_topics(rng: &mut ChaCha8Rng, k: usize, v: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let row: Vec<f64> = (0..v).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

fn bench_alignment(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let words: Vec<String> = (0..5000).map(|i| format!("w{i}")).collect();
    let a = random_topics(&mut rng, 100, words.len());
    let b = random_topics(&mut rng, 100, words.len());
    let mut group = c.benchmark_group("align_topics");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| {
                align_topics_with(
                    TopicTable { words: &words, phi: &a },
                    TopicTable { words: &words, phi: &b },
                    exec,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_gibbs(c: &mut Criterion) {
    let corpus = lda_corpus(&LdaCorpusSpec {
        docs: 1000,
        topics: 20,
        ..LdaCorpusSpec::default()
    });
    let index = index_tokens(&corpus.docs);
    let config = LdaConfig {
        iters: 10,
        burn_in: 0,
        parallel: true,
        shards: 4,
        ..LdaConfig::new(20).without_pruning()
    };
    let mut group = c.benchmark_group("sharded_gibbs_sweep");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        let mut sampler = LdaSampler::with_execution(&index, &config, exec).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| sampler.sweep()));
    }
    group.finish();
}

criterion_group!(benches, bench_index, bench_word_statistics, bench_alignment, bench_gibbs);
criterion_main!(benches);
