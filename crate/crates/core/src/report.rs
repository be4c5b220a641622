//! TSV report writers.
//!
//! Numbers are written with a decimal point, no digit grouping and six
//! significant digits (`%g` style), so reports are stable across locales and
//! diffable. Undefined values are written as `NA`.

use std::fmt::Write as _;

use crate::dispersion::DispersionRecord;
use crate::index::{CorpusIndex, LexiconStats};
use crate::lexicon::LexiconDiff;
use crate::robust::RobustCount;
use crate::topics::{TopicMatch, TopicModel};

pub const NA: &str = "NA";

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Formats `x` with six significant digits, switching to exponent notation
/// outside `1e-4 <= |x| < 1e6`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), format_number)
}

/// `texts<TAB>words<TAB>lexicon<TAB>L10`.
pub fn index_summary(index: &CorpusIndex) -> String {
    let LexiconStats {
        lexicon_size,
        l10_size,
    } = index.lexicon_stats();
    format!(
        "{}\t{}\t{}\t{}\n",
        index.num_docs(),
        index.total_tokens(),
        lexicon_size,
        l10_size
    )
}

/// `word<TAB>C<TAB>df`, count descending.
pub fn frequency_tsv(index: &CorpusIndex) -> String {
    let mut out = String::from("word\tC\tdf\n");
    for (word, c, df) in index.frequency_table() {
        let _ = writeln!(out, "{word}\t{c}\t{df}");
    }
    out
}

/// `word<TAB>C<TAB>R<TAB>LL<TAB>capped_docs`, LL descending with ties by
/// word. Words with `C < min_count` are left out.
pub fn robust_tsv(index: &CorpusIndex, counts: &[RobustCount], min_count: u64) -> String {
    let mut rows: Vec<(&str, &RobustCount)> = counts
        .iter()
        .filter(|rc| rc.raw >= min_count)
        .map(|rc| (index.word(rc.word).expect("word from this index"), rc))
        .collect();
    rows.sort_by(|a, b| b.1.ll.total_cmp(&a.1.ll).then_with(|| a.0.cmp(b.0)));
    let mut out = String::from("word\tC\tR\tLL\tcapped_docs\n");
    for (word, rc) in rows {
        let _ = writeln!(
            out,
            "{word}\t{}\t{}\t{}\t{}",
            rc.raw,
            format_number(rc.robust),
            format_number(rc.ll),
            rc.capped_docs
        );
    }
    out
}

/// One row per word, count descending with ties by word.
pub fn dispersion_tsv(index: &CorpusIndex, records: &[DispersionRecord], min_count: u64) -> String {
    let mut rows: Vec<(&str, &DispersionRecord)> = records
        .iter()
        .filter(|r| r.count >= min_count)
        .map(|r| (index.word(r.word).expect("word from this index"), r))
        .collect();
    rows.sort_by(|a, b| b.1.count.cmp(&a.1.count).then_with(|| a.0.cmp(b.0)));
    let mut out = String::from("word\tC\tdf\tD\tDP\tDPnorm\talpha\tgamma\tB\tprior\tadapt\n");
    for (word, r) in rows {
        let _ = writeln!(
            out,
            "{word}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.count,
            r.doc_freq,
            format_opt(r.juilland_d),
            format_number(r.dp.dp),
            format_opt(r.dp.dp_norm),
            format_number(r.katz.alpha),
            format_number(r.katz.gamma),
            format_opt(r.katz.burstiness),
            format_opt(r.church.map(|c| c.prior)),
            format_opt(r.church.and_then(|c| c.adapt)),
        );
    }
    out
}

/// Demoted rows first, then promoted; each section already ordered by
/// rank change.
pub fn lexdiff_tsv(diff: &LexiconDiff) -> String {
    let mut out = String::from("section\tword\trank_a\trank_b\tdelta\n");
    for (section, entries) in [("demoted", &diff.demoted), ("promoted", &diff.promoted)] {
        for e in entries {
            let _ = writeln!(
                out,
                "{section}\t{}\t{}\t{}\t{}",
                e.word,
                e.raw_rank,
                e.robust_rank,
                e.rank_delta()
            );
        }
    }
    out
}

/// `topic<TAB>proportion<TAB>keywords`, largest topics first.
pub fn topics_tsv(model: &TopicModel, topn: usize) -> String {
    let proportions = crate::topics::corpus_topic_proportions(model);
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| proportions[b].total_cmp(&proportions[a]).then(a.cmp(&b)));
    let mut out = String::from("topic\tproportion\tkeywords\n");
    for k in order {
        let keywords = crate::topics::topic_keywords(model, k, topn)
            .expect("topic index in range")
            .into_iter()
            .map(|(w, _)| w)
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{k}\t{}\t{keywords}", format_number(proportions[k]));
    }
    out
}

pub fn align_tsv(matches: &[TopicMatch]) -> String {
    let mut out = String::from("topicA\ttopicB\tjsd\n");
    for m in matches {
        let _ = writeln!(out, "{}\t{}\t{}", m.topic_a, m.topic_b, format_number(m.jsd));
    }
    out
}
