//! The `seq.in` / `seq.out` / `label` layout common to ATIS and SNIPS
//! distributions: one whitespace-tokenized utterance, tag sequence and
//! intent per line.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{Corpus, CorpusError, Utterance};

fn read_lines<R: Read>(r: R) -> Result<Vec<String>, CorpusError> {
    let mut out: Vec<String> = BufReader::new(r).lines().collect::<Result<_, _>>()?;
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    Ok(out)
}

/// Zips the three streams line by line into a corpus with ids `000001`...
pub fn parse_three_file<A: Read, B: Read, C: Read>(
    seq_in: A,
    seq_out: B,
    labels: C,
) -> Result<Corpus, CorpusError> {
    let tokens = read_lines(seq_in)?;
    let tags = read_lines(seq_out)?;
    let intents = read_lines(labels)?;
    if tokens.len() != tags.len() || tokens.len() != intents.len() {
        return Err(CorpusError::ThreeFile(format!(
            "line counts differ: seq.in {}, seq.out {}, label {}",
            tokens.len(),
            tags.len(),
            intents.len()
        )));
    }
    let utterances = tokens
        .iter()
        .zip(&tags)
        .zip(&intents)
        .enumerate()
        .map(|(i, ((t, s), intent))| {
            let split = |l: &str| l.split_whitespace().map(str::to_owned).collect();
            Utterance::new(format!("{:06}", i + 1), split(t), split(s), intent.trim())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(utterances)
}

/// Reads `seq.in`, `seq.out` and `label` from a directory.
pub fn read_three_file_dir(dir: &Path) -> Result<Corpus, CorpusError> {
    let open = |name: &str| -> Result<File, CorpusError> {
        File::open(dir.join(name))
            .map_err(|e| CorpusError::ThreeFile(format!("{}: {e}", dir.join(name).display())))
    };
    parse_three_file(open("seq.in")?, open("seq.out")?, open("label")?)
}
