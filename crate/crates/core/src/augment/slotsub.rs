//! Slot substitution: swap one span's value for another value observed
//! under the same slot label elsewhere in the corpus.

use std::collections::HashSet;

use rand::Rng;

use super::{derived_id, replace_span, AugRecord, Method, OpDetail};
use crate::corpus::{SlotSpan, Utterance};
use crate::seed::AugRng;
use crate::slot_index::{SlotIndex, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSubOptions {
    pub weighting: Weighting,
    /// Only draw values that occur in some other utterance.
    pub other_sentences_only: bool,
    /// Drop outputs identical to the source or to an earlier output.
    pub dedup: bool,
}

impl Default for SlotSubOptions {
    fn default() -> Self {
        SlotSubOptions {
            weighting: Weighting::Uniform,
            other_sentences_only: false,
            dedup: true,
        }
    }
}

fn candidates_for<'a>(
    idx: &'a SlotIndex,
    u: &Utterance,
    span: &SlotSpan,
    opts: &SlotSubOptions,
) -> Vec<&'a [String]> {
    if opts.other_sentences_only {
        idx.candidates_from_other_sentences(span, u.id())
    } else {
        idx.candidates(span)
    }
}

/// Spans of `u` that have at least one substitute, with their candidates.
fn substitutable<'a>(
    u: &Utterance,
    idx: &'a SlotIndex,
    opts: &SlotSubOptions,
) -> Vec<(SlotSpan, Vec<&'a [String]>)> {
    u.spans()
        .into_iter()
        .map(|span| {
            let cands = candidates_for(idx, u, &span, opts);
            (span, cands)
        })
        .filter(|(_, cands)| !cands.is_empty())
        .collect()
}

fn substitute_one(
    u: &Utterance,
    idx: &SlotIndex,
    spans: &[(SlotSpan, Vec<&[String]>)],
    opts: &SlotSubOptions,
    rng: &mut AugRng,
    variant: usize,
) -> AugRecord {
    let (span, cands) = &spans[rng.gen_range(0..spans.len())];
    let value = idx
        .sample_from(&span.label, cands, opts.weighting, rng)
        .expect("candidate list is nonempty");
    let id = derived_id(u.id(), Method::SlotSub, variant);
    AugRecord {
        result: replace_span(u, span, value, id),
        method: Method::SlotSub,
        source_id: u.id().to_owned(),
        op_detail: OpDetail::Substitution {
            label: span.label.clone(),
            start: span.start,
            end: span.end,
            old_value: span.value.clone(),
            new_value: value.to_vec(),
        },
        seed: rng.seed(),
    }
}

/// Replaces one randomly picked span with a sampled candidate.
///
/// The span is picked uniformly among spans that have at least one
/// candidate; returns `None` when there is no such span.
pub fn slot_sub_once(
    u: &Utterance,
    idx: &SlotIndex,
    opts: &SlotSubOptions,
    rng: &mut AugRng,
) -> Option<AugRecord> {
    let spans = substitutable(u, idx, opts);
    if spans.is_empty() {
        return None;
    }
    Some(substitute_one(u, idx, &spans, opts, rng, 0))
}

/// Result of applying slot substitution `n` times to one utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotSubBatch {
    pub records: Vec<AugRecord>,
    /// Attempts dropped as duplicates of the source or an earlier record.
    pub duplicates: usize,
    /// True if the utterance had no substitutable span at all.
    pub inapplicable: bool,
}

/// Applies slot substitution `n` times, each time re-picking the span and
/// the value. Variant indices count surviving records.
pub fn slot_sub_n(
    u: &Utterance,
    idx: &SlotIndex,
    n: usize,
    opts: &SlotSubOptions,
    rng: &mut AugRng,
) -> SlotSubBatch {
    assert!(n >= 1, "n must be positive");
    let spans = substitutable(u, idx, opts);
    if spans.is_empty() {
        return SlotSubBatch {
            inapplicable: true,
            ..Default::default()
        };
    }
    let mut batch = SlotSubBatch::default();
    let mut seen: HashSet<(Vec<String>, Vec<String>)> = HashSet::new();
    seen.insert((u.tokens().to_vec(), u.slot_tags().to_vec()));
    for _ in 0..n {
        let rec = substitute_one(u, idx, &spans, opts, rng, batch.records.len());
        if opts.dedup {
            let key = (
                rec.result.tokens().to_vec(),
                rec.result.slot_tags().to_vec(),
            );
            if !seen.insert(key) {
                batch.duplicates += 1;
                continue;
            }
        }
        batch.records.push(rec);
    }
    batch
}
