//! Slot substitution with a masked language model.
//!
//! A span is blanked and refilled one word at a time, left to right. Each
//! word is drawn by nucleus sampling from the backend's distribution for the
//! leftmost remaining blank, then written into the query before the next
//! call. The new value has as many words as the original one.

mod backend;
mod pairs;

use rand::Rng;
use thiserror::Error;

pub use backend::{
    BackendError, FillMaskClient, FillRequest, FillResponse, HttpBackend, PairScorerClient,
    ScoreRequest, ScoreResponse, BLANK_TOKEN,
};
pub use pairs::{build_filter_pairs, write_pairs, PairExample, PairLabel};

use super::{derived_id, replace_span, AugRecord, Method, OpDetail};
use crate::corpus::{SlotSpan, Utterance};
use crate::seed::AugRng;

/// Allowed deviation of total probability mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-3;

/// Slack when comparing cumulative mass against `p`.
const NUCLEUS_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("backend returned an empty distribution")]
    EmptyDistribution,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("top-p must be in (0, 1], got {0}")]
    InvalidTopP(f64),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot build filter pairs: {0}")]
    Pairs(String),
}

/// Word candidates for one blank, most probable first.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    entries: Vec<(String, f64)>,
    residual_mass: f64,
}

impl TokenDistribution {
    /// Validates ordering, probability ranges and total mass. Tokens must be
    /// single nonempty words. An empty entry list is representable (all mass
    /// residual) but cannot be sampled from.
    pub fn new(entries: Vec<(String, f64)>, residual_mass: f64) -> Result<Self, LmError> {
        let bad = |m: String| Err(LmError::InvalidDistribution(m));
        for (token, p) in &entries {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return bad(format!("`{token}` is not a single word"));
            }
            if !(p.is_finite() && *p > 0.0 && *p <= 1.0) {
                return bad(format!("probability {p} of `{token}` outside (0, 1]"));
            }
        }
        if entries.windows(2).any(|w| w[0].1 < w[1].1) {
            return bad("entries not in descending order".into());
        }
        if !residual_mass.is_finite() || residual_mass < -MASS_TOLERANCE {
            return bad(format!("residual mass {residual_mass}"));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum::<f64>() + residual_mass;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return bad(format!("total mass {total}"));
        }
        Ok(TokenDistribution {
            entries,
            residual_mass,
        })
    }

    /// All mass on one token.
    pub fn point(token: impl Into<String>) -> Self {
        TokenDistribution {
            entries: vec![(token.into(), 1.0)],
            residual_mass: 0.0,
        }
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn residual_mass(&self) -> f64 {
        self.residual_mass
    }
}

/// The smallest prefix of `d`'s entries with cumulative mass at least `p`.
/// If the entries together fall short of `p`, all of them.
pub fn nucleus(d: &TokenDistribution, p: f64) -> &[(String, f64)] {
    let mut cum = 0.0;
    for (i, (_, prob)) in d.entries.iter().enumerate() {
        cum += prob;
        if cum >= p - NUCLEUS_EPS {
            return &d.entries[..=i];
        }
    }
    &d.entries
}

/// Samples a token from the renormalized nucleus of `d`.
pub fn nucleus_sample<R: Rng + ?Sized>(
    d: &TokenDistribution,
    p: f64,
    rng: &mut R,
) -> Result<String, LmError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(LmError::InvalidTopP(p));
    }
    if d.entries.is_empty() {
        return Err(LmError::EmptyDistribution);
    }
    let core = nucleus(d, p);
    let mass: f64 = core.iter().map(|(_, q)| q).sum();
    let mut target = rng.gen::<f64>() * mass;
    for (token, q) in core {
        if target < *q {
            return Ok(token.clone());
        }
        target -= q;
    }
    Ok(core[core.len() - 1].0.clone())
}

/// A sentence with one span blanked and partially refilled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskQuery {
    tokens: Vec<String>,
    blank_start: usize,
    blank_len: usize,
    filled: Vec<String>,
}

impl MaskQuery {
    pub fn new(u: &Utterance, span: &SlotSpan) -> Self {
        assert!(!span.is_empty(), "cannot blank an empty span");
        let mut tokens = u.tokens().to_vec();
        for t in &mut tokens[span.start..span.end] {
            *t = BLANK_TOKEN.to_owned();
        }
        MaskQuery {
            tokens,
            blank_start: span.start,
            blank_len: span.len(),
            filled: Vec::new(),
        }
    }

    pub fn blank_start(&self) -> usize {
        self.blank_start
    }

    pub fn blank_len(&self) -> usize {
        self.blank_len
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Words chosen so far, left to right.
    pub fn filled(&self) -> &[String] {
        &self.filled
    }

    /// Position of the leftmost remaining blank.
    pub fn next_blank(&self) -> Option<usize> {
        (self.filled.len() < self.blank_len).then(|| self.blank_start + self.filled.len())
    }

    pub fn request(&self, top_k: usize) -> Option<FillRequest> {
        self.next_blank().map(|blank_index| FillRequest {
            tokens: self.tokens.clone(),
            blank_index,
            top_k,
        })
    }

    /// Writes `token` into the leftmost blank.
    pub fn fill(&mut self, token: String) {
        let pos = self.next_blank().expect("query already complete");
        self.tokens[pos] = token.clone();
        self.filled.push(token);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmParams {
    pub top_p: f64,
    pub top_k: usize,
}

impl Default for LmParams {
    fn default() -> Self {
        LmParams {
            top_p: 0.9,
            top_k: 50,
        }
    }
}

/// Refills `span` word by word from the backend. Issues exactly
/// `span.len()` backend calls on success.
pub fn lm_fill_span(
    u: &Utterance,
    span: &SlotSpan,
    backend: &dyn FillMaskClient,
    params: &LmParams,
    rng: &mut AugRng,
    variant: usize,
) -> Result<AugRecord, LmError> {
    let mut query = MaskQuery::new(u, span);
    while let Some(req) = query.request(params.top_k) {
        let dist = backend.fill(&req)?;
        let token = nucleus_sample(&dist, params.top_p, rng)?;
        query.fill(token);
    }
    let value = query.filled;
    let id = derived_id(u.id(), Method::SlotSubLm, variant);
    Ok(AugRecord {
        result: replace_span(u, span, &value, id),
        method: Method::SlotSubLm,
        source_id: u.id().to_owned(),
        op_detail: OpDetail::Substitution {
            label: span.label.clone(),
            start: span.start,
            end: span.end,
            old_value: span.value.clone(),
            new_value: value,
        },
        seed: rng.seed(),
    })
}

/// What to do when the pair scorer cannot be reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FailPolicy {
    /// Accept the candidate.
    Open,
    /// Reject the candidate.
    #[default]
    Closed,
}

/// Accepts `s_prime` iff the scorer's accept probability is at least
/// `threshold`.
pub fn filter_accept(
    s: &Utterance,
    s_prime: &Utterance,
    scorer: &dyn PairScorerClient,
    threshold: f64,
    on_error: FailPolicy,
) -> bool {
    match scorer.accept_prob(s.tokens(), s_prime.tokens()) {
        Ok(p) => p >= threshold,
        Err(e) => {
            log::warn!("pair scorer failed for {}: {e}", s_prime.id());
            on_error == FailPolicy::Open
        }
    }
}

#[derive(Clone, Copy)]
pub struct FilterParams<'a> {
    pub scorer: &'a dyn PairScorerClient,
    pub threshold: f64,
    pub on_error: FailPolicy,
}

/// Outcome of `n` LM substitutions on one utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LmBatch {
    pub records: Vec<AugRecord>,
    pub inapplicable: bool,
    pub same_value: usize,
    pub duplicates: usize,
    pub backend_errors: usize,
    pub filter_rejected: usize,
}

/// Applies LM substitution `n` times, re-picking the span uniformly each
/// time. Values equal to the original are dropped, then filtered (if a
/// scorer is given), then deduplicated.
pub fn slot_sub_lm_n(
    u: &Utterance,
    backend: &dyn FillMaskClient,
    filter: Option<&FilterParams<'_>>,
    n: usize,
    params: &LmParams,
    dedup: bool,
    rng: &mut AugRng,
) -> LmBatch {
    assert!(n >= 1, "n must be positive");
    let spans = u.spans();
    let mut batch = LmBatch::default();
    if spans.is_empty() {
        batch.inapplicable = true;
        return batch;
    }
    let mut seen = std::collections::HashSet::new();
    seen.insert((u.tokens().to_vec(), u.slot_tags().to_vec()));
    for _ in 0..n {
        let span = &spans[rng.gen_range(0..spans.len())];
        let rec = match lm_fill_span(u, span, backend, params, rng, batch.records.len()) {
            Ok(rec) => rec,
            Err(e) => {
                log::warn!("skipping LM substitution for {}: {e}", u.id());
                batch.backend_errors += 1;
                continue;
            }
        };
        if let OpDetail::Substitution {
            old_value,
            new_value,
            ..
        } = &rec.op_detail
        {
            if old_value == new_value {
                batch.same_value += 1;
                continue;
            }
        }
        if let Some(f) = filter {
            if !filter_accept(u, &rec.result, f.scorer, f.threshold, f.on_error) {
                batch.filter_rejected += 1;
                continue;
            }
        }
        if dedup
            && !seen.insert((
                rec.result.tokens().to_vec(),
                rec.result.slot_tags().to_vec(),
            ))
        {
            batch.duplicates += 1;
            continue;
        }
        batch.records.push(rec);
    }
    batch
}
