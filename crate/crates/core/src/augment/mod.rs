//! Augmentation methods and the record type they all produce.

pub mod lm;
pub mod slotsub;
pub mod tree;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{span_tags, SlotSpan, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SlotSub,
    SlotSubLm,
    Crop,
    Rotate,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::SlotSub,
        Method::SlotSubLm,
        Method::Crop,
        Method::Rotate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SlotSub => "slot_sub",
            Method::SlotSubLm => "slot_sub_lm",
            Method::Crop => "crop",
            Method::Rotate => "rotate",
        }
    }

    pub fn uses_trees(self) -> bool {
        matches!(self, Method::Crop | Method::Rotate)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown method `{0}` (expected slot-sub, slot-sub-lm, crop or rotate)")]
pub struct ParseMethodError(String);

impl FromStr for Method {
    type Err = ParseMethodError;

    /// Accepts both `slot-sub` and `slot_sub` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "slot_sub" => Ok(Method::SlotSub),
            "slot_sub_lm" => Ok(Method::SlotSubLm),
            "crop" => Ok(Method::Crop),
            "rotate" => Ok(Method::Rotate),
            _ => Err(ParseMethodError(s.to_owned())),
        }
    }
}

/// What was done to the source utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpDetail {
    /// Span `[start, end)` of the source, labelled `label`, was replaced.
    Substitution {
        label: String,
        start: usize,
        end: usize,
        old_value: Vec<String>,
        new_value: Vec<String>,
    },
    /// Kept the root, its fixed dependents and the subtree of `kept_child`.
    Crop {
        kept_child: usize,
        rel: String,
        kept_tokens: Vec<usize>,
    },
    /// Concatenated blocks in the given order; each block is named by its
    /// head token in the source.
    Rotate { block_order: Vec<usize> },
}

/// An augmented utterance with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugRecord {
    pub result: Utterance,
    pub method: Method,
    pub source_id: String,
    pub op_detail: OpDetail,
    pub seed: u64,
}

impl AugRecord {
    pub fn provenance(&self) -> Provenance<'_> {
        Provenance {
            id: self.result.id(),
            source_id: &self.source_id,
            method: self.method,
            seed: self.seed,
            detail: &self.op_detail,
        }
    }
}

/// One line of the provenance sidecar.
#[derive(Debug, Serialize)]
pub struct Provenance<'a> {
    pub id: &'a str,
    pub source_id: &'a str,
    pub method: Method,
    pub seed: u64,
    pub detail: &'a OpDetail,
}

pub fn write_provenance<'a, W, I>(records: I, mut sink: W) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a AugRecord>,
{
    for r in records {
        serde_json::to_writer(&mut sink, &r.provenance())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

/// Id of the `variant`-th augmentation of `source_id`.
pub fn derived_id(source_id: &str, method: Method, variant: usize) -> String {
    format!("{source_id}:{method}:{variant}")
}

/// Replaces `span` in `u` with `value`, tagging the new tokens as a span of
/// the same label. Everything outside the span is copied unchanged.
pub(crate) fn replace_span(
    u: &Utterance,
    span: &SlotSpan,
    value: &[String],
    id: String,
) -> Utterance {
    replace_span_with_label(u, span, &span.label, value, id)
}

pub(crate) fn replace_span_with_label(
    u: &Utterance,
    span: &SlotSpan,
    label: &str,
    value: &[String],
    id: String,
) -> Utterance {
    let mut tokens = Vec::with_capacity(u.len() - span.len() + value.len());
    tokens.extend_from_slice(&u.tokens()[..span.start]);
    tokens.extend_from_slice(value);
    tokens.extend_from_slice(&u.tokens()[span.end..]);

    let mut tags = Vec::with_capacity(tokens.len());
    tags.extend_from_slice(&u.slot_tags()[..span.start]);
    tags.extend(span_tags(label, value.len()));
    tags.extend_from_slice(&u.slot_tags()[span.end..]);

    // The tag after the span may be I- of the old label only if the span was
    // not maximal, which extract_spans rules out.
    Utterance::new(id, tokens, tags, u.intent()).expect("span replacement keeps BIO validity")
}
