//! Utterances, BIO slot tags, slot spans and corpora.
//!
//! An [`Utterance`] is validated on construction and immutable afterwards:
//! tags always line up with tokens and always form a valid BIO sequence.

mod conllu;
mod jsonl;
mod three_file;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use conllu::{parse_trees, write_trees, DepTree};
pub use jsonl::{parse_corpus, write_corpus, write_utterance};
pub use three_file::{parse_three_file, read_three_file_dir};

/// Errors raised while reading or validating corpora and dependency trees.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("utterance {id}: no tokens")]
    EmptyUtterance { id: String },
    #[error("utterance {id}: {tokens} tokens but {tags} slot tags")]
    LengthMismatch {
        id: String,
        tokens: usize,
        tags: usize,
    },
    #[error("utterance {id}: invalid tag `{tag}` at position {position}")]
    InvalidTag {
        id: String,
        position: usize,
        tag: String,
    },
    #[error(
        "utterance {id}: `{tag}` at position {position} does not continue a span of the same type"
    )]
    BioViolation {
        id: String,
        position: usize,
        tag: String,
    },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Conllu { line: usize, message: String },
    #[error("tree {id}: {message}")]
    InvalidTree { id: String, message: String },
    #[error("tree {id}: token {position} is `{found}` but the corpus has `{expected}`")]
    TokenMismatch {
        id: String,
        position: usize,
        expected: String,
        found: String,
    },
    #[error("tree id `{0}` does not match any utterance")]
    UnknownTreeId(String),
    #[error("three-file input: {0}")]
    ThreeFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parsed BIO tag borrowing its slot type from the tag string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    /// Parses `O`, `B-<type>` or `I-<type>`. The type must be nonempty.
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, label) = tag.split_at_checked(2)?;
        if label.is_empty() {
            return None;
        }
        match prefix {
            "B-" => Some(Tag::Begin(label)),
            "I-" => Some(Tag::Inside(label)),
            _ => None,
        }
    }

    /// The slot type, or `None` for `O`.
    pub fn label(self) -> Option<&'a str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }
}

impl fmt::Display for Tag<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

/// Returns the slot type carried by a tag string, ignoring its prefix.
///
/// Anything that is not `O` and has no recognizable `B-`/`I-` prefix is
/// treated as a bare slot type.
pub fn slot_type(tag: &str) -> Option<&str> {
    if tag == "O" {
        return None;
    }
    match tag.split_at_checked(2) {
        Some(("B-" | "I-", label)) if !label.is_empty() => Some(label),
        _ => Some(tag),
    }
}

/// A tokenized utterance with per-token BIO slot tags and an intent label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Utterance {
    id: String,
    tokens: Vec<String>,
    slot_tags: Vec<String>,
    intent: String,
}

impl Utterance {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        slot_tags: Vec<String>,
        intent: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        validate_tags(&id, &tokens, &slot_tags)?;
        Ok(Utterance {
            id,
            tokens,
            slot_tags,
            intent: intent.into(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn slot_tags(&self) -> &[String] {
        &self.slot_tags
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: utterances hold at least one token.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn spans(&self) -> Vec<SlotSpan> {
        extract_spans(self)
    }

    /// Same utterance under a different id.
    pub fn with_id(&self, id: impl Into<String>) -> Utterance {
        Utterance {
            id: id.into(),
            ..self.clone()
        }
    }

    /// Identity used for deduplication: everything but the id.
    pub fn content_key(&self) -> (&[String], &[String], &str) {
        (&self.tokens, &self.slot_tags, &self.intent)
    }
}

fn validate_tags(id: &str, tokens: &[String], tags: &[String]) -> Result<(), CorpusError> {
    if tokens.is_empty() {
        return Err(CorpusError::EmptyUtterance { id: id.to_owned() });
    }
    if tokens.len() != tags.len() {
        return Err(CorpusError::LengthMismatch {
            id: id.to_owned(),
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    let mut prev: Option<&str> = None;
    for (position, raw) in tags.iter().enumerate() {
        let tag = Tag::parse(raw).ok_or_else(|| CorpusError::InvalidTag {
            id: id.to_owned(),
            position,
            tag: raw.clone(),
        })?;
        if let Tag::Inside(label) = tag {
            if prev != Some(label) {
                return Err(CorpusError::BioViolation {
                    id: id.to_owned(),
                    position,
                    tag: raw.clone(),
                });
            }
        }
        prev = tag.label();
    }
    Ok(())
}

/// Checks a tag sequence for BIO validity without building an utterance.
pub fn is_bio_valid(tags: &[String]) -> bool {
    let mut prev: Option<&str> = None;
    for raw in tags {
        match Tag::parse(raw) {
            None => return false,
            Some(Tag::Inside(label)) if prev != Some(label) => return false,
            Some(tag) => prev = tag.label(),
        }
    }
    true
}

/// A maximal B-I run: a slot label and the tokens `[start, end)` carrying it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotSpan {
    pub label: String,
    pub start: usize,
    pub end: usize,
    pub value: Vec<String>,
}

impl SlotSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Extracts the slot spans of an utterance in left-to-right order.
pub fn extract_spans(u: &Utterance) -> Vec<SlotSpan> {
    let mut spans: Vec<SlotSpan> = Vec::new();
    for (i, raw) in u.slot_tags.iter().enumerate() {
        // Tags were validated on construction.
        match Tag::parse(raw) {
            Some(Tag::Begin(label)) => spans.push(SlotSpan {
                label: label.to_owned(),
                start: i,
                end: i + 1,
                value: vec![u.tokens[i].clone()],
            }),
            Some(Tag::Inside(_)) => {
                let span = spans.last_mut().expect("I- tag follows a span");
                span.end = i + 1;
                span.value.push(u.tokens[i].clone());
            }
            _ => {}
        }
    }
    spans
}

/// Renders the tags for a span value: `B-label` followed by `I-label`s.
pub fn span_tags(label: &str, len: usize) -> impl Iterator<Item = String> + '_ {
    (0..len).map(move |i| {
        if i == 0 {
            format!("B-{label}")
        } else {
            format!("I-{label}")
        }
    })
}

/// Renders a tag sequence of length `len` from non-overlapping spans.
pub fn render_tags(len: usize, spans: &[SlotSpan]) -> Vec<String> {
    let mut tags = vec!["O".to_owned(); len];
    for span in spans {
        for (slot, tag) in tags[span.start..span.end]
            .iter_mut()
            .zip(span_tags(&span.label, span.len()))
        {
            *slot = tag;
        }
    }
    tags
}

/// Rewrites tag prefixes so the sequence is BIO-valid.
///
/// A `B-` tag always opens a span. An `I-` tag (or a bare slot type) that
/// does not continue a span of its own type opens a new one. `O` tags and
/// slot types are never changed, and already valid input is left as is, so
/// two adjacent spans of the same type stay separate.
pub fn repair_bio(tags: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev: Option<&str> = None;
    for raw in tags {
        let begins = raw.starts_with("B-");
        match slot_type(raw) {
            None => {
                out.push("O".to_owned());
                prev = None;
            }
            Some(label) => {
                if begins || prev != Some(label) {
                    out.push(format!("B-{label}"));
                } else {
                    out.push(format!("I-{label}"));
                }
                prev = Some(label);
            }
        }
    }
    out
}

/// An ordered collection of utterances, optionally with dependency trees.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    utterances: Vec<Utterance>,
    trees: BTreeMap<String, DepTree>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(utterances: Vec<Utterance>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(utterances.len());
        for u in &utterances {
            if !seen.insert(u.id()) {
                return Err(CorpusError::DuplicateId(u.id().to_owned()));
            }
        }
        Ok(Corpus {
            utterances,
            trees: BTreeMap::new(),
        })
    }

    /// Attaches dependency trees after checking each against its utterance.
    pub fn with_trees(mut self, trees: BTreeMap<String, DepTree>) -> Result<Self, CorpusError> {
        for (id, tree) in &trees {
            let u = self
                .get(id)
                .ok_or_else(|| CorpusError::UnknownTreeId(id.clone()))?;
            tree.check_alignment(u)?;
        }
        self.trees = trees;
        Ok(self)
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn trees(&self) -> &BTreeMap<String, DepTree> {
        &self.trees
    }

    pub fn tree(&self, id: &str) -> Option<&DepTree> {
        self.trees.get(id)
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id() == id)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Utterance> {
        self.utterances.iter()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Utterance;
    type IntoIter = std::slice::Iter<'a, Utterance>;

    fn into_iter(self) -> Self::IntoIter {
        self.utterances.iter()
    }
}
