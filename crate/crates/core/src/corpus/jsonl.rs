use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Utterance};

/// Width of auto-assigned ids (1-based line numbers).
const AUTO_ID_WIDTH: usize = 6;

#[derive(Deserialize)]
struct InRecord {
    id: Option<String>,
    tokens: Option<Vec<String>>,
    slots: Option<Vec<String>>,
    intent: Option<String>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    tokens: &'a [String],
    slots: &'a [String],
    intent: &'a str,
}

/// Reads a JSON-Lines corpus: one `{id?, tokens, slots, intent}` object per
/// line. Blank lines are skipped. Missing ids become zero-padded 1-based
/// line numbers.
pub fn parse_corpus<R: BufRead>(input: R) -> Result<Corpus, CorpusError> {
    let mut utterances = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InRecord = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            line: line_no,
            source,
        })?;
        let id = rec
            .id
            .unwrap_or_else(|| format!("{line_no:0width$}", width = AUTO_ID_WIDTH));
        let tokens = rec.tokens.ok_or(CorpusError::MissingField {
            line: line_no,
            field: "tokens",
        })?;
        let slots = rec.slots.ok_or(CorpusError::MissingField {
            line: line_no,
            field: "slots",
        })?;
        // Tag errors are more informative than a missing intent, so check them first.
        super::validate_tags(&id, &tokens, &slots)?;
        let intent = rec.intent.ok_or(CorpusError::MissingField {
            line: line_no,
            field: "intent",
        })?;
        utterances.push(Utterance::new(id, tokens, slots, intent)?);
    }
    Corpus::new(utterances)
}

/// Writes one utterance as a JSON line with fields in `id, tokens, slots,
/// intent` order.
pub fn write_utterance<W: Write>(u: &Utterance, sink: &mut W) -> std::io::Result<()> {
    let rec = OutRecord {
        id: u.id(),
        tokens: u.tokens(),
        slots: u.slot_tags(),
        intent: u.intent(),
    };
    serde_json::to_writer(&mut *sink, &rec)?;
    sink.write_all(b"\n")
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut sink: W) -> std::io::Result<()> {
    for u in corpus {
        write_utterance(u, &mut sink)?;
    }
    sink.flush()
}
