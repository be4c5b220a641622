//! Corpus curation toolkit: burst-robust word frequencies, dispersion and
//! burstiness measures, core-lexicon comparison and LDA topic composition
//! for document-segmented corpora.
//!
//! The pipeline runs `ingest` → `index` → `robust` / `dispersion` →
//! `lexicon`, with `topics` fitting LDA models on the same index.
//! Per-word work is data-parallel when the `parallel` feature (on by
//! default) is enabled; see [`par::Execution`].

pub mod cli;
pub mod dispersion;
pub mod index;
pub mod ingest;
pub mod lexicon;
pub mod par;
pub mod report;
pub mod robust;
pub mod synth;
pub mod topics;

pub use index::{build_index, CorpusIndex, WordId};
pub use ingest::{load_corpus, tokenize, CorpusFormat, RawDocument, TokenizerConfig};
pub use par::Execution;
pub use robust::{RobustCount, RobustParams};
pub use topics::{LdaConfig, TopicModel};
