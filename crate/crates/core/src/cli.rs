//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on data errors, 2 on usage errors.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dispersion::dispersion_records;
use crate::index::{build_index, CorpusIndex};
use crate::ingest::{load_corpus, CorpusFormat, TokenizerConfig};
use crate::lexicon::{lexdiff, raw_list, robust_list, RankedList};
use crate::report;
use crate::robust::{robust_counts, RobustParams};
use crate::topics::{align_topics, fit_lda, LdaConfig, TopicModel};

#[derive(Debug, Parser)]
#[command(name = "corpus-anatomy", version, about = "Burst-robust frequency lists, dispersion and topic comparison for corpora")]
pub struct Cli {
    /// Random seed for stochastic commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true, env = "CORPUS_ANATOMY_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Suppress warnings on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Report destination; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a binary index from a corpus and print its summary line.
    Index(IndexArgs),
    /// Robust counts and LL burst scores.
    Robust(RobustArgs),
    /// Dispersion and burstiness measures.
    Disperse(DisperseArgs),
    /// Compare the top-k prefixes of two ranked lists.
    Lexdiff(LexdiffArgs),
    /// Fit an LDA model and report the largest topics.
    Lda(LdaArgs),
    /// Align the topics of two models by Jensen-Shannon divergence.
    Topicsim(TopicsimArgs),
    /// Export the frequency list or a ranked list.
    ExportFreq(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Lines,
    Delim,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Lines => CorpusFormat::Lines,
            FormatArg::Delim => CorpusFormat::Delimited,
        }
    }
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "lines")]
    pub format: FormatArg,
    /// Where to write the binary index.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub keep_case: bool,
    #[arg(long)]
    pub keep_punct: bool,
    #[arg(long)]
    pub keep_numbers: bool,
}

#[derive(Debug, Args)]
pub struct RobustFlags {
    /// MAD normalising constant.
    #[arg(long = "b", default_value_t = 1.48)]
    pub b: f64,
    /// Sn normalising constant.
    #[arg(long = "c", default_value_t = 1.19)]
    pub c: f64,
    /// Huber tuning constant.
    #[arg(long = "K", default_value_t = 1.28)]
    pub huber_k: f64,
    /// Winsorisation scale constant.
    #[arg(long = "k", default_value_t = 2.24)]
    pub winsor_k: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

impl RobustFlags {
    fn params(&self) -> RobustParams {
        RobustParams {
            b: self.b,
            c: self.c,
            huber_k: self.huber_k,
            winsor_k: self.winsor_k,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Args)]
pub struct RobustArgs {
    pub index: PathBuf,
    #[command(flatten)]
    pub robust: RobustFlags,
    /// Leave out words with a raw count below this.
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
}

#[derive(Debug, Args)]
pub struct DisperseArgs {
    pub index: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RankedArg {
    Raw,
    Robust,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub index: PathBuf,
    /// Write a ranked list (`rank word score`) instead of `word C df`.
    #[arg(long, value_enum)]
    pub ranked: Option<RankedArg>,
    #[command(flatten)]
    pub robust: RobustFlags,
}

#[derive(Debug, Args)]
pub struct LexdiffArgs {
    /// Reference ranking, e.g. raw counts.
    pub list_a: PathBuf,
    /// Comparison ranking, e.g. robust counts.
    pub list_b: PathBuf,
    #[arg(long = "k", value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

#[derive(Debug, Args)]
pub struct LdaArgs {
    pub index: PathBuf,
    /// Where to write the binary model.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "K", default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    pub topics: u64,
    /// Document-topic prior; 50/K when absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub min_df: usize,
    #[arg(long, default_value_t = 0.5)]
    pub max_df_frac: f64,
    /// Sharded approximate sampler across worker threads.
    #[arg(long)]
    pub parallel: bool,
    /// Keywords listed per topic.
    #[arg(long, default_value_t = 10)]
    pub topn: usize,
}

#[derive(Debug, Args)]
pub struct TopicsimArgs {
    pub model_a: PathBuf,
    pub model_b: PathBuf,
}

fn read_index(path: &Path) -> Result<CorpusIndex> {
    let file = File::open(path).with_context(|| format!("cannot open index {}", path.display()))?;
    CorpusIndex::read_from(BufReader::new(file)).with_context(|| format!("cannot load index {}", path.display()))
}

fn read_model(path: &Path) -> Result<TopicModel> {
    let file = File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    TopicModel::read_from(BufReader::new(file)).with_context(|| format!("cannot load model {}", path.display()))
}

fn read_ranked(path: &Path) -> Result<RankedList> {
    let file = File::open(path).with_context(|| format!("cannot open ranked list {}", path.display()))?;
    RankedList::from_tsv(BufReader::new(file)).with_context(|| format!("cannot parse ranked list {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Index(args) => {
            let config = TokenizerConfig {
                lowercase: !args.keep_case,
                drop_punct_only: !args.keep_punct,
                drop_number_only: !args.keep_numbers,
            };
            let docs = load_corpus(&args.corpus, args.format.into())?;
            let index = build_index(docs, &config)?;
            let mut w = create(&args.index)?;
            index.write_to(&mut w)?;
            emit(out, &report::index_summary(&index))
        }
        Command::Robust(args) => {
            let index = read_index(&args.index)?;
            let counts = robust_counts(&index, &args.robust.params())?;
            emit(out, &report::robust_tsv(&index, &counts, args.min_count))
        }
        Command::Disperse(args) => {
            let index = read_index(&args.index)?;
            let records = dispersion_records(&index)?;
            emit(out, &report::dispersion_tsv(&index, &records, args.min_count))
        }
        Command::ExportFreq(args) => {
            let index = read_index(&args.index)?;
            let text = match args.ranked {
                None => report::frequency_tsv(&index),
                Some(RankedArg::Raw) => raw_list(&index).to_tsv(),
                Some(RankedArg::Robust) => {
                    let counts = robust_counts(&index, &args.robust.params())?;
                    robust_list(&index, &counts)?.to_tsv()
                }
            };
            emit(out, &text)
        }
        Command::Lexdiff(args) => {
            let a = read_ranked(&args.list_a)?;
            let b = read_ranked(&args.list_b)?;
            let diff = lexdiff(&a, &b, args.k as usize)?;
            emit(out, &report::lexdiff_tsv(&diff))
        }
        Command::Lda(args) => {
            let index = read_index(&args.index)?;
            let topics = args.topics as usize;
            let config = LdaConfig {
                topics,
                alpha: args.alpha.unwrap_or(50.0 / topics as f64),
                beta: args.beta,
                iters: args.iters,
                burn_in: args.burn_in,
                seed: cli.seed,
                min_df: args.min_df,
                max_df_frac: args.max_df_frac,
                parallel: args.parallel,
                shards: cli.threads.map_or(0, usize::from),
            };
            let model = fit_lda(&index, &config)?;
            let mut w = create(&args.model)?;
            model.write_to(&mut w)?;
            emit(out, &report::topics_tsv(&model, args.topn))
        }
        Command::Topicsim(args) => {
            let a = read_model(&args.model_a)?;
            let b = read_model(&args.model_b)?;
            let matches = align_topics(a.table(), b.table())?;
            emit(out, &report::align_tsv(&matches))
        }
    }
}

/// Runs a parsed command, inside a dedicated thread pool when `--threads`
/// is given.
pub fn run(cli: &Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .context("cannot start worker threads")?;
        return pool.install(|| execute(cli));
    }
    execute(cli)
}
