//! Inventory of observed slot values per slot label.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SlotSpan};

/// How a substitute value is drawn from the candidate set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every distinct value is equally likely.
    #[default]
    Uniform,
    /// Values are weighted by how often they occur in the corpus.
    Frequency,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ValueEntry {
    count: usize,
    sources: BTreeSet<String>,
}

/// Distinct slot values per label, with occurrence counts and the ids of
/// the utterances they occur in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotIndex {
    by_label: BTreeMap<String, BTreeMap<Vec<String>, ValueEntry>>,
}

impl SlotIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut by_label: BTreeMap<String, BTreeMap<Vec<String>, ValueEntry>> = BTreeMap::new();
        for u in corpus {
            for span in u.spans() {
                let entry = by_label
                    .entry(span.label)
                    .or_default()
                    .entry(span.value)
                    .or_default();
                entry.count += 1;
                entry.sources.insert(u.id().to_owned());
            }
        }
        SlotIndex { by_label }
    }

    pub fn is_empty(&self) -> bool {
        self.by_label.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.by_label.keys().map(String::as_str)
    }

    pub fn label_count(&self) -> usize {
        self.by_label.len()
    }

    /// Distinct values of `label` in lexicographic order.
    pub fn values<'a>(&'a self, label: &str) -> impl Iterator<Item = &'a [String]> + 'a {
        self.by_label
            .get(label)
            .into_iter()
            .flat_map(|values| values.keys().map(Vec::as_slice))
    }

    pub fn count(&self, label: &str, value: &[String]) -> usize {
        self.by_label
            .get(label)
            .and_then(|v| v.get(value))
            .map_or(0, |e| e.count)
    }

    pub fn contains(&self, label: &str, value: &[String]) -> bool {
        self.count(label, value) > 0
    }

    /// Labels under which `value` has been observed.
    pub fn labels_of<'a>(&'a self, value: &'a [String]) -> impl Iterator<Item = &'a str> + 'a {
        self.by_label
            .iter()
            .filter(move |(_, values)| values.contains_key(value))
            .map(|(label, _)| label.as_str())
    }

    /// Values sharing `span`'s label but differing from its value, in
    /// lexicographic order. Unknown labels yield nothing.
    pub fn candidates<'a>(&'a self, span: &SlotSpan) -> Vec<&'a [String]> {
        self.values(&span.label)
            .filter(|v| *v != span.value.as_slice())
            .collect()
    }

    /// Like [`SlotIndex::candidates`], but only values that also occur in
    /// some utterance other than `source_id`.
    pub fn candidates_from_other_sentences<'a>(
        &'a self,
        span: &SlotSpan,
        source_id: &str,
    ) -> Vec<&'a [String]> {
        let Some(values) = self.by_label.get(&span.label) else {
            return Vec::new();
        };
        values
            .iter()
            .filter(|(v, e)| {
                v.as_slice() != span.value.as_slice() && e.sources.iter().any(|s| s != source_id)
            })
            .map(|(v, _)| v.as_slice())
            .collect()
    }

    /// Draws one value from `candidates`, or `None` if it is empty.
    pub fn sample_from<'a, R: Rng + ?Sized>(
        &self,
        label: &str,
        candidates: &[&'a [String]],
        weighting: Weighting,
        rng: &mut R,
    ) -> Option<&'a [String]> {
        if candidates.is_empty() {
            return None;
        }
        let pick = match weighting {
            Weighting::Uniform => rng.gen_range(0..candidates.len()),
            Weighting::Frequency => {
                let weights = candidates.iter().map(|v| self.count(label, v));
                WeightedIndex::new(weights)
                    .expect("indexed values have positive counts")
                    .sample(rng)
            }
        };
        Some(candidates[pick])
    }

    /// Samples a substitute for `span` uniformly among its candidates.
    pub fn sample_candidate<'a, R: Rng + ?Sized>(
        &'a self,
        span: &SlotSpan,
        rng: &mut R,
    ) -> Option<&'a [String]> {
        let candidates = self.candidates(span);
        self.sample_from(&span.label, &candidates, Weighting::Uniform, rng)
    }

    /// Serializable view for inspection.
    pub fn dump(&self) -> IndexDump {
        IndexDump {
            labels: self
                .by_label
                .iter()
                .map(|(label, values)| {
                    let values = values
                        .iter()
                        .map(|(v, e)| DumpValue {
                            value: v.clone(),
                            count: e.count,
                        })
                        .collect();
                    (label.clone(), values)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpValue {
    pub value: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDump {
    pub labels: BTreeMap<String, Vec<DumpValue>>,
}
