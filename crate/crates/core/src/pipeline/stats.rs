use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

/// Size and label inventory of one corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub utterances: usize,
    pub tokens: usize,
    pub mean_length: f64,
    pub spans: usize,
    pub slot_labels: usize,
    pub intents: usize,
}

impl CorpusStats {
    pub fn of(corpus: &Corpus) -> Self {
        let mut labels = BTreeSet::new();
        let mut intents = BTreeSet::new();
        let mut tokens = 0;
        let mut spans = 0;
        for u in corpus {
            tokens += u.len();
            intents.insert(u.intent());
            for s in u.spans() {
                spans += 1;
                labels.insert(s.label);
            }
        }
        CorpusStats {
            utterances: corpus.len(),
            tokens,
            mean_length: if corpus.is_empty() {
                0.0
            } else {
                tokens as f64 / corpus.len() as f64
            },
            spans,
            slot_labels: labels.len(),
            intents: intents.len(),
        }
    }
}

/// Original vs. augmented corpus statistics, plus what an augmentation run
/// produced and discarded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub original: CorpusStats,
    pub augmented: CorpusStats,
    /// Records kept per method.
    pub yield_by_method: BTreeMap<String, usize>,
    /// Discarded attempts (or skipped utterances) per reason.
    pub discards: BTreeMap<String, usize>,
    /// Kept substitutions per slot label.
    pub substitutions_by_label: BTreeMap<String, usize>,
}

/// Counts for `original` and `augmented`; run-specific maps stay empty.
pub fn stats_report(original: &Corpus, augmented: &Corpus) -> StatsReport {
    StatsReport {
        original: CorpusStats::of(original),
        augmented: CorpusStats::of(augmented),
        ..Default::default()
    }
}
