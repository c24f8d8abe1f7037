//! Corpus-level orchestration: run one method over every utterance, merge
//! and deduplicate the results, and report statistics.

mod stats;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

pub use stats::{stats_report, CorpusStats, StatsReport};

use crate::augment::lm::{
    slot_sub_lm_n, FailPolicy, FillMaskClient, FilterParams, LmParams, PairScorerClient,
};
use crate::augment::slotsub::{slot_sub_n, SlotSubOptions};
use crate::augment::tree::{crop_variants, rotate_variants, TreeOpConfig, TreeVariants};
use crate::augment::{AugRecord, Method, OpDetail};
use crate::corpus::{Corpus, CorpusError, Utterance};
use crate::seed::AugRng;
use crate::slot_index::{SlotIndex, Weighting};

/// Values of N explored when tuning; the default sits in the middle.
pub const N_AUG_GRID: [usize; 3] = [2, 5, 10];

#[derive(Debug, Clone, PartialEq)]
pub struct AugConfig {
    pub method: Method,
    /// Applications per utterance for the substitution methods.
    pub n_aug: usize,
    pub seed: u64,
    pub top_p: f64,
    pub top_k: usize,
    pub max_crop: usize,
    pub max_rotate: usize,
    pub filter_enabled: bool,
    pub filter_threshold: f64,
    pub filter_on_error: FailPolicy,
    pub backend_url: Option<String>,
    pub dedup: bool,
    pub emit_union: bool,
    pub weighting: Weighting,
    /// Slot-Sub draws only values seen in other utterances.
    pub other_sentences_only: bool,
    /// Worker threads, which also bounds concurrent backend requests.
    pub max_in_flight: usize,
    pub tree_ops: TreeOpConfig,
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            method: Method::SlotSub,
            n_aug: 5,
            seed: 13,
            top_p: 0.9,
            top_k: 50,
            max_crop: 3,
            max_rotate: 3,
            filter_enabled: false,
            filter_threshold: 0.5,
            filter_on_error: FailPolicy::Closed,
            backend_url: None,
            dedup: true,
            emit_union: false,
            weighting: Weighting::Uniform,
            other_sentences_only: false,
            max_in_flight: 8,
            tree_ops: TreeOpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("n must be at least 1")]
    ZeroN,
    #[error("top-p must be in (0, 1], got {0}")]
    TopP(f64),
    #[error("top-k must be at least 1")]
    ZeroTopK,
    #[error("max-crop and max-rotate must be at least 1")]
    ZeroTreeLimit,
    #[error("filter threshold must be in [0, 1], got {0}")]
    Threshold(f64),
    #[error("slot-sub-lm needs a backend URL")]
    MissingBackendUrl,
    #[error("a backend URL only applies to slot-sub-lm")]
    UnexpectedBackendUrl,
    #[error("the filter only applies to slot-sub-lm")]
    FilterWithoutLm,
    #[error("max-in-flight must be at least 1")]
    ZeroWorkers,
}

impl AugConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_aug == 0 {
            return Err(ConfigError::ZeroN);
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ConfigError::TopP(self.top_p));
        }
        if self.top_k == 0 {
            return Err(ConfigError::ZeroTopK);
        }
        if self.max_crop == 0 || self.max_rotate == 0 {
            return Err(ConfigError::ZeroTreeLimit);
        }
        if !(0.0..=1.0).contains(&self.filter_threshold) {
            return Err(ConfigError::Threshold(self.filter_threshold));
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::ZeroWorkers);
        }
        let lm = self.method == Method::SlotSubLm;
        match (lm, self.backend_url.is_some()) {
            (true, false) => return Err(ConfigError::MissingBackendUrl),
            (false, true) => return Err(ConfigError::UnexpectedBackendUrl),
            _ => {}
        }
        if self.filter_enabled && !lm {
            return Err(ConfigError::FilterWithoutLm);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} needs dependency trees but the corpus has none")]
    MissingTrees(Method),
    #[error("slot-sub-lm needs a fill-mask backend")]
    MissingFillBackend,
    #[error("the filter needs a pair scorer")]
    MissingScorer,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Service clients used by the LM method.
#[derive(Clone, Copy, Default)]
pub struct Backends<'a> {
    pub fill: Option<&'a dyn FillMaskClient>,
    pub scorer: Option<&'a dyn PairScorerClient>,
}

/// Why an attempt or an utterance produced nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Discard {
    /// Slot-Sub: no span with a substitute (including spanless utterances).
    NoCandidates,
    /// Slot-Sub-LM: no span to blank.
    NoSpans,
    NoTree,
    /// Crop/rotate: nothing to crop or fewer than two blocks.
    NotApplicable,
    SplitSpan,
    /// Tree variant equal to the source or to another variant.
    Identical,
    /// Duplicate within one utterance's outputs.
    Duplicate,
    /// Duplicate of an utterance elsewhere in the emitted corpus.
    DuplicateGlobal,
    SameValue,
    BackendError,
    FilterRejected,
}

impl Discard {
    pub fn as_str(self) -> &'static str {
        match self {
            Discard::NoCandidates => "no-candidates",
            Discard::NoSpans => "no-spans",
            Discard::NoTree => "no-tree",
            Discard::NotApplicable => "not-applicable",
            Discard::SplitSpan => "split-span",
            Discard::Identical => "identical",
            Discard::Duplicate => "duplicate",
            Discard::DuplicateGlobal => "duplicate-global",
            Discard::SameValue => "same-value",
            Discard::BackendError => "backend-error",
            Discard::FilterRejected => "filter-rejected",
        }
    }
}

#[derive(Default)]
struct Outcome {
    records: Vec<AugRecord>,
    discards: Vec<(Discard, usize)>,
}

impl Outcome {
    fn discard(&mut self, reason: Discard, n: usize) {
        if n > 0 {
            self.discards.push((reason, n));
        }
    }

    fn from_tree(v: TreeVariants) -> Self {
        let mut o = Outcome::default();
        if v.inapplicable {
            o.discard(Discard::NotApplicable, 1);
        }
        o.discard(Discard::SplitSpan, v.split_spans);
        o.discard(Discard::Identical, v.identical);
        o.records = v.records;
        o
    }
}

/// Output of one augmentation run.
#[derive(Debug, Clone)]
pub struct AugmentOutput {
    /// Augmented records in (source, variant) order, after deduplication.
    pub records: Vec<AugRecord>,
    /// The corpus to write: D' alone, or D followed by D'.
    pub emitted: Corpus,
    pub stats: StatsReport,
}

impl AugmentOutput {
    pub fn augmented(&self) -> impl Iterator<Item = &Utterance> {
        self.records.iter().map(|r| &r.result)
    }
}

struct Prepared<'a> {
    index: Option<SlotIndex>,
    fill: Option<&'a dyn FillMaskClient>,
    filter: Option<FilterParams<'a>>,
}

fn augment_one(u: &Utterance, corpus: &Corpus, cfg: &AugConfig, prep: &Prepared<'_>) -> Outcome {
    let mut rng = AugRng::for_utterance(cfg.seed, u.id());
    match cfg.method {
        Method::SlotSub => {
            let opts = SlotSubOptions {
                weighting: cfg.weighting,
                other_sentences_only: cfg.other_sentences_only,
                dedup: cfg.dedup,
            };
            let idx = prep.index.as_ref().expect("index built for slot-sub");
            let batch = slot_sub_n(u, idx, cfg.n_aug, &opts, &mut rng);
            let mut o = Outcome::default();
            if batch.inapplicable {
                o.discard(Discard::NoCandidates, 1);
            }
            o.discard(Discard::Duplicate, batch.duplicates);
            o.records = batch.records;
            o
        }
        Method::SlotSubLm => {
            let fill = prep.fill.expect("fill backend checked");
            let params = LmParams {
                top_p: cfg.top_p,
                top_k: cfg.top_k,
            };
            let batch = slot_sub_lm_n(
                u,
                fill,
                prep.filter.as_ref(),
                cfg.n_aug,
                &params,
                cfg.dedup,
                &mut rng,
            );
            let mut o = Outcome::default();
            if batch.inapplicable {
                o.discard(Discard::NoSpans, 1);
            }
            o.discard(Discard::SameValue, batch.same_value);
            o.discard(Discard::Duplicate, batch.duplicates);
            o.discard(Discard::BackendError, batch.backend_errors);
            o.discard(Discard::FilterRejected, batch.filter_rejected);
            o.records = batch.records;
            o
        }
        Method::Crop | Method::Rotate => {
            let Some(tree) = corpus.tree(u.id()) else {
                log::warn!("no dependency tree for {}; skipping {}", u.id(), cfg.method);
                let mut o = Outcome::default();
                o.discard(Discard::NoTree, 1);
                return o;
            };
            let v = if cfg.method == Method::Crop {
                crop_variants(u, tree, &cfg.tree_ops, cfg.max_crop, &mut rng)
            } else {
                rotate_variants(u, tree, &cfg.tree_ops, cfg.max_rotate, &mut rng)
            };
            Outcome::from_tree(v)
        }
    }
}

type ContentKey = (Vec<String>, Vec<String>, String);

fn content_key(u: &Utterance) -> ContentKey {
    (
        u.tokens().to_vec(),
        u.slot_tags().to_vec(),
        u.intent().to_owned(),
    )
}

/// Runs `cfg.method` over every utterance of `corpus`.
///
/// Each utterance draws from its own stream seeded by `(cfg.seed, id)`, so
/// the output does not depend on scheduling or on the other utterances.
/// `corpus` is never modified.
pub fn run_augment(
    corpus: &Corpus,
    cfg: &AugConfig,
    backends: Backends<'_>,
) -> Result<AugmentOutput, PipelineError> {
    cfg.validate()?;
    if cfg.method.uses_trees() && corpus.trees().is_empty() && !corpus.is_empty() {
        return Err(PipelineError::MissingTrees(cfg.method));
    }
    let fill = match cfg.method {
        Method::SlotSubLm => Some(backends.fill.ok_or(PipelineError::MissingFillBackend)?),
        _ => None,
    };
    let filter = if cfg.filter_enabled {
        Some(FilterParams {
            scorer: backends.scorer.ok_or(PipelineError::MissingScorer)?,
            threshold: cfg.filter_threshold,
            on_error: cfg.filter_on_error,
        })
    } else {
        None
    };
    let prep = Prepared {
        index: (cfg.method == Method::SlotSub).then(|| SlotIndex::build(corpus)),
        fill,
        filter,
    };

    let outcomes: Vec<Outcome> = if cfg.max_in_flight == 1 {
        corpus
            .iter()
            .map(|u| augment_one(u, corpus, cfg, &prep))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.max_in_flight)
            .build()
            .expect("thread pool");
        pool.install(|| {
            corpus
                .utterances()
                .par_iter()
                .map(|u| augment_one(u, corpus, cfg, &prep))
                .collect()
        })
    };

    let mut discards: BTreeMap<Discard, usize> = BTreeMap::new();
    let mut seen: HashSet<ContentKey> = HashSet::new();
    let mut ids: HashSet<String> = corpus.iter().map(|u| u.id().to_owned()).collect();
    let mut emitted_source = Vec::new();
    if cfg.emit_union {
        for u in corpus {
            if cfg.dedup && !seen.insert(content_key(u)) {
                *discards.entry(Discard::DuplicateGlobal).or_default() += 1;
                continue;
            }
            emitted_source.push(u.clone());
        }
    } else if cfg.dedup {
        seen.extend(corpus.iter().map(content_key));
    }

    let mut records = Vec::new();
    for outcome in outcomes {
        for (reason, n) in outcome.discards {
            *discards.entry(reason).or_default() += n;
        }
        for mut rec in outcome.records {
            if cfg.dedup && !seen.insert(content_key(&rec.result)) {
                *discards.entry(Discard::DuplicateGlobal).or_default() += 1;
                continue;
            }
            if ids.contains(rec.result.id()) {
                let base = rec.result.id().to_owned();
                let fresh = (2..)
                    .map(|k| format!("{base}.{k}"))
                    .find(|id| !ids.contains(id))
                    .expect("unbounded suffixes");
                rec.result = rec.result.with_id(fresh);
            }
            ids.insert(rec.result.id().to_owned());
            records.push(rec);
        }
    }

    let d_prime = Corpus::new(records.iter().map(|r| r.result.clone()).collect())?;
    let mut stats = stats_report(corpus, &d_prime);
    stats.discards = discards
        .into_iter()
        .map(|(k, v)| (k.as_str().to_owned(), v))
        .collect();
    stats
        .yield_by_method
        .insert(cfg.method.to_string(), records.len());
    for r in &records {
        if let OpDetail::Substitution { label, .. } = &r.op_detail {
            *stats
                .substitutions_by_label
                .entry(label.clone())
                .or_default() += 1;
        }
    }

    let emitted = if cfg.emit_union {
        emitted_source.extend(d_prime.iter().cloned());
        Corpus::new(emitted_source)?
    } else {
        d_prime
    };
    Ok(AugmentOutput {
        records,
        emitted,
        stats,
    })
}
