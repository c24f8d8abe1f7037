//! Training pairs for the substitution filter.
//!
//! Positives are slot substitutions (same label, different value).
//! Negatives replace a span with a value observed only under other labels.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LmError;
use crate::augment::slotsub::{slot_sub_once, SlotSubOptions};
use crate::augment::{replace_span_with_label, OpDetail};
use crate::corpus::{Corpus, SlotSpan, Utterance};
use crate::seed::AugRng;
use crate::slot_index::SlotIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub sent_a: Vec<String>,
    pub sent_b: Vec<String>,
    pub label: PairLabel,
    pub source_id: String,
    /// Label of the replaced span.
    pub span_label: String,
    /// Label the substituted value was drawn from.
    pub value_label: String,
    pub value: Vec<String>,
}

type Foreign<'a> = Vec<(&'a str, &'a [String])>;

/// `(label, value)` pairs usable as a wrong-label substitute for `span`:
/// values never seen under the span's own label.
fn foreign_values<'a>(idx: &'a SlotIndex, span: &SlotSpan) -> Foreign<'a> {
    idx.labels()
        .filter(|l| *l != span.label)
        .flat_map(|l| idx.values(l).map(move |v| (l, v)))
        .filter(|(_, v)| !idx.contains(&span.label, v))
        .collect()
}

fn negative(u: &Utterance, idx: &SlotIndex, rng: &mut AugRng) -> Option<PairExample> {
    let options: Vec<(SlotSpan, Foreign<'_>)> = u
        .spans()
        .into_iter()
        .map(|s| {
            let f = foreign_values(idx, &s);
            (s, f)
        })
        .filter(|(_, f)| !f.is_empty())
        .collect();
    if options.is_empty() {
        return None;
    }
    let (span, foreign) = &options[rng.gen_range(0..options.len())];
    let (value_label, value) = foreign[rng.gen_range(0..foreign.len())];
    let s_prime = replace_span_with_label(u, span, &span.label, value, u.id().to_owned());
    Some(PairExample {
        sent_a: u.tokens().to_vec(),
        sent_b: s_prime.tokens().to_vec(),
        label: PairLabel::Reject,
        source_id: u.id().to_owned(),
        span_label: span.label.clone(),
        value_label: value_label.to_owned(),
        value: value.to_vec(),
    })
}

fn positive(u: &Utterance, idx: &SlotIndex, rng: &mut AugRng) -> Option<PairExample> {
    let rec = slot_sub_once(u, idx, &SlotSubOptions::default(), rng)?;
    let OpDetail::Substitution {
        label, new_value, ..
    } = rec.op_detail
    else {
        unreachable!("slot substitution always records a substitution");
    };
    Some(PairExample {
        sent_a: u.tokens().to_vec(),
        sent_b: rec.result.tokens().to_vec(),
        label: PairLabel::Accept,
        source_id: u.id().to_owned(),
        span_label: label.clone(),
        value_label: label,
        value: new_value,
    })
}

/// Builds a balanced accept/reject set, alternating positive and negative
/// examples. Each utterance draws from its own stream derived from `seed`.
pub fn build_filter_pairs(
    corpus: &Corpus,
    idx: &SlotIndex,
    seed: u64,
) -> Result<Vec<PairExample>, LmError> {
    if idx.label_count() < 2 {
        return Err(LmError::Pairs(format!(
            "negatives need at least 2 slot labels, the corpus has {}",
            idx.label_count()
        )));
    }
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for u in corpus {
        let mut rng = AugRng::for_utterance(seed, u.id());
        positives.extend(positive(u, idx, &mut rng));
        negatives.extend(negative(u, idx, &mut rng));
    }
    let k = positives.len().min(negatives.len());
    Ok(positives
        .into_iter()
        .zip(negatives)
        .take(k)
        .flat_map(|(p, n)| [p, n])
        .collect())
}

pub fn write_pairs<W: Write>(pairs: &[PairExample], mut sink: W) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut sink, p)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
