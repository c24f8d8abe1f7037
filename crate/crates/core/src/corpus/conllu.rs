//! Dependency trees and their CoNLL-U serialization.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{CorpusError, Utterance};

/// A dependency tree aligned to one utterance.
///
/// `heads[i]` is the 0-based index of token `i`'s head, or `None` for the
/// root token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    id: String,
    heads: Vec<Option<usize>>,
    rels: Vec<String>,
    forms: Vec<String>,
}

impl DepTree {
    /// Builds a tree, checking that there is exactly one root and that the
    /// head relation is acyclic and in range.
    pub fn new(
        id: impl Into<String>,
        heads: Vec<Option<usize>>,
        rels: Vec<String>,
        forms: Vec<String>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let invalid = |message: String| CorpusError::InvalidTree {
            id: id.clone(),
            message,
        };
        if heads.is_empty() {
            return Err(invalid("no tokens".into()));
        }
        if heads.len() != rels.len() || heads.len() != forms.len() {
            return Err(invalid(format!(
                "{} heads, {} relations, {} forms",
                heads.len(),
                rels.len(),
                forms.len()
            )));
        }
        let roots = heads.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(invalid(format!("{roots} root tokens, expected exactly 1")));
        }
        for (i, h) in heads.iter().enumerate() {
            if let Some(h) = *h {
                if h >= heads.len() {
                    return Err(invalid(format!("token {i} has head {h} out of range")));
                }
            }
        }
        // Every walk towards the root must finish within n steps.
        for start in 0..heads.len() {
            let mut node = start;
            let mut steps = 0;
            while let Some(h) = heads[node] {
                node = h;
                steps += 1;
                if steps > heads.len() {
                    return Err(invalid(format!("cycle through token {start}")));
                }
            }
        }
        Ok(DepTree {
            id,
            heads,
            rels,
            forms,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn rels(&self) -> &[String] {
        &self.rels
    }

    pub fn forms(&self) -> &[String] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn root(&self) -> usize {
        self.heads
            .iter()
            .position(Option::is_none)
            .expect("validated tree has a root")
    }

    /// Direct dependents of `node` in ascending order.
    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.heads[i] == Some(node))
            .collect()
    }

    /// `node` and all of its descendants in ascending order.
    pub fn subtree(&self, node: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.dominates(node, i))
            .collect()
    }

    /// True if `ancestor` equals `node` or lies on its path to the root.
    pub fn dominates(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.heads[n];
        }
        false
    }

    pub(super) fn check_alignment(&self, u: &Utterance) -> Result<(), CorpusError> {
        if self.len() != u.len() {
            return Err(CorpusError::InvalidTree {
                id: self.id.clone(),
                message: format!(
                    "{} tree tokens but {} utterance tokens",
                    self.len(),
                    u.len()
                ),
            });
        }
        for (position, (form, token)) in self.forms.iter().zip(u.tokens()).enumerate() {
            if form != token {
                return Err(CorpusError::TokenMismatch {
                    id: self.id.clone(),
                    position,
                    expected: token.clone(),
                    found: form.clone(),
                });
            }
        }
        Ok(())
    }
}

struct Block {
    id: Option<String>,
    start_line: usize,
    heads: Vec<Option<usize>>,
    rels: Vec<String>,
    forms: Vec<String>,
}

impl Block {
    fn new(start_line: usize) -> Self {
        Block {
            id: None,
            start_line,
            heads: Vec::new(),
            rels: Vec::new(),
            forms: Vec::new(),
        }
    }

    fn is_blank(&self) -> bool {
        self.id.is_none() && self.heads.is_empty()
    }

    fn finish(self, out: &mut BTreeMap<String, DepTree>) -> Result<(), CorpusError> {
        let id = self.id.ok_or(CorpusError::Conllu {
            line: self.start_line,
            message: "sentence without `# sent_id =` comment".into(),
        })?;
        if out.contains_key(&id) {
            return Err(CorpusError::Conllu {
                line: self.start_line,
                message: format!("duplicate sent_id `{id}`"),
            });
        }
        let tree = DepTree::new(id.clone(), self.heads, self.rels, self.forms)?;
        out.insert(id, tree);
        Ok(())
    }
}

/// Reads blank-line-delimited CoNLL-U sentences keyed by their
/// `# sent_id = <id>` comment. Multiword-token ranges and empty nodes are
/// skipped.
pub fn parse_trees<R: BufRead>(input: R) -> Result<BTreeMap<String, DepTree>, CorpusError> {
    let mut trees = BTreeMap::new();
    let mut block = Block::new(1);
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !block.is_blank() {
                std::mem::replace(&mut block, Block::new(line_no + 1)).finish(&mut trees)?;
            } else {
                block.start_line = line_no + 1;
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("sent_id") {
                let id = id.trim_start().strip_prefix('=').unwrap_or(id).trim();
                block.id = Some(id.to_owned());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let err = |message: String| CorpusError::Conllu {
            line: line_no,
            message,
        };
        if cols.len() != 10 {
            return Err(err(format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let token_id: usize = cols[0]
            .parse()
            .map_err(|_| err(format!("bad token id `{}`", cols[0])))?;
        if token_id != block.heads.len() + 1 {
            return Err(err(format!(
                "token id {token_id} out of sequence, expected {}",
                block.heads.len() + 1
            )));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| err(format!("bad head `{}`", cols[6])))?;
        block.forms.push(cols[1].to_owned());
        block.heads.push(head.checked_sub(1));
        block.rels.push(cols[7].to_owned());
    }
    if !block.is_blank() {
        block.finish(&mut trees)?;
    }
    Ok(trees)
}

/// Writes trees as minimal CoNLL-U (unused columns are `_`).
pub fn write_trees<'a, W, I>(trees: I, mut sink: W) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a DepTree>,
{
    for tree in trees {
        writeln!(sink, "# sent_id = {}", tree.id)?;
        for i in 0..tree.len() {
            let head = tree.heads[i].map_or(0, |h| h + 1);
            writeln!(
                sink,
                "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_",
                i + 1,
                tree.forms[i],
                head,
                tree.rels[i]
            )?;
        }
        writeln!(sink)?;
    }
    sink.flush()
}
