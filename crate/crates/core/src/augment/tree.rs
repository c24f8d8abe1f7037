//! Crop and rotate over the dependency tree of an utterance.
//!
//! Both operations work on the direct dependents of the root. Crop keeps the
//! root, its fixed dependents and exactly one argument subtree. Rotate cuts
//! the sentence into blocks (one per argument subtree, plus the root with
//! everything else attached to it) and concatenates them in a new order.
//! Slot tags travel with their tokens; variants that would split a slot
//! span are discarded.

use std::collections::{BTreeSet, HashSet};

use itertools::Itertools;
use rand::seq::{index, SliceRandom};

use super::{derived_id, AugRecord, Method, OpDetail};
use crate::corpus::{repair_bio, DepTree, Utterance};
use crate::seed::AugRng;

/// Relation sets driving both operations. Relations are compared on their
/// lowercased base form (`obl:tmod` matches `obl`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeOpConfig {
    /// Root dependents that crop may keep one of and rotate may move.
    pub flexible: BTreeSet<String>,
    /// Root dependents that crop always keeps.
    pub keep: BTreeSet<String>,
}

impl Default for TreeOpConfig {
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        TreeOpConfig {
            flexible: set(&[
                "nsubj", "obj", "dobj", "iobj", "dative", "obl", "attr", "prep",
            ]),
            keep: set(&["aux", "auxpass", "neg", "prt", "cop", "expl"]),
        }
    }
}

/// Punctuation attached to the root stays with the root.
const PUNCT: &str = "punct";

fn base_rel(rel: &str) -> String {
    rel.split(':').next().unwrap_or(rel).to_lowercase()
}

impl TreeOpConfig {
    pub fn is_flexible(&self, rel: &str) -> bool {
        self.flexible.contains(&base_rel(rel))
    }

    fn is_kept(&self, rel: &str) -> bool {
        let rel = base_rel(rel);
        rel == PUNCT || self.keep.contains(&rel)
    }
}

/// A direct dependent of the root together with its whole subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeSlice {
    pub root_child_index: usize,
    pub rel: String,
    /// Ascending token indices of the subtree, the child included.
    pub token_indices: Vec<usize>,
}

impl SubtreeSlice {
    /// Non-projective subtrees are not contiguous in the sentence.
    pub fn is_contiguous(&self) -> bool {
        self.token_indices.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

/// Subtrees of all root dependents, in sentence order of their heads.
pub fn root_slices(tree: &DepTree) -> Vec<SubtreeSlice> {
    let root = tree.root();
    tree.children(root)
        .into_iter()
        .map(|child| SubtreeSlice {
            root_child_index: child,
            rel: tree.rels()[child].clone(),
            token_indices: tree.subtree(child),
        })
        .collect()
}

/// Variants produced for one utterance plus what was thrown away.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeVariants {
    pub records: Vec<AugRecord>,
    /// The operation does not apply (no croppable child, fewer than two
    /// blocks, or a tree that does not fit the utterance).
    pub inapplicable: bool,
    /// Candidate variants that would split a slot span.
    pub split_spans: usize,
    /// Candidate variants identical to the source or to another variant.
    pub identical: usize,
}

fn aligned(u: &Utterance, tree: &DepTree) -> bool {
    if tree.len() != u.len() {
        log::warn!(
            "tree for {} has {} tokens, utterance has {}; skipping",
            u.id(),
            tree.len(),
            u.len()
        );
        return false;
    }
    true
}

fn build_variant(u: &Utterance, order: &[usize], id: String) -> Utterance {
    let tokens = order.iter().map(|&i| u.tokens()[i].clone()).collect();
    let tags: Vec<String> = order.iter().map(|&i| u.slot_tags()[i].clone()).collect();
    Utterance::new(id, tokens, repair_bio(&tags), u.intent()).expect("repaired tags are valid")
}

fn record(
    u: &Utterance,
    result: Utterance,
    method: Method,
    op_detail: OpDetail,
    rng: &AugRng,
) -> AugRecord {
    AugRecord {
        result,
        method,
        source_id: u.id().to_owned(),
        op_detail,
        seed: rng.seed(),
    }
}

/// Picks at most `max` of `n` items uniformly, returned in ascending order.
fn choose_subset(n: usize, max: usize, rng: &mut AugRng) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut picked = index::sample(rng, n, max).into_vec();
    picked.sort_unstable();
    picked
}

/// Crop: one variant per flexible root dependent, keeping the root, the
/// fixed dependents and that dependent's subtree. At most `max_crop`
/// variants, chosen at random when more are valid.
pub fn crop_variants(
    u: &Utterance,
    tree: &DepTree,
    cfg: &TreeOpConfig,
    max_crop: usize,
    rng: &mut AugRng,
) -> TreeVariants {
    assert!(max_crop >= 1, "max_crop must be positive");
    let mut out = TreeVariants::default();
    if !aligned(u, tree) {
        out.inapplicable = true;
        return out;
    }
    let slices = root_slices(tree);
    let mut base = vec![false; u.len()];
    base[tree.root()] = true;
    for s in slices.iter().filter(|s| cfg.is_kept(&s.rel)) {
        for &i in &s.token_indices {
            base[i] = true;
        }
    }
    let croppable: Vec<&SubtreeSlice> = slices.iter().filter(|s| cfg.is_flexible(&s.rel)).collect();
    if croppable.is_empty() {
        out.inapplicable = true;
        return out;
    }

    let spans = u.spans();
    let mut candidates: Vec<(&SubtreeSlice, Vec<usize>)> = Vec::new();
    for slice in croppable {
        let mut keep = base.clone();
        for &i in &slice.token_indices {
            keep[i] = true;
        }
        let partial = spans.iter().any(|sp| {
            let kept = (sp.start..sp.end).filter(|&i| keep[i]).count();
            kept != 0 && kept != sp.len()
        });
        if partial {
            out.split_spans += 1;
            continue;
        }
        let kept: Vec<usize> = (0..u.len()).filter(|&i| keep[i]).collect();
        if kept.len() == u.len() {
            out.identical += 1;
            continue;
        }
        candidates.push((slice, kept));
    }

    for pick in choose_subset(candidates.len(), max_crop, rng) {
        let (slice, kept) = &candidates[pick];
        let id = derived_id(u.id(), Method::Crop, out.records.len());
        let result = build_variant(u, kept, id);
        let detail = OpDetail::Crop {
            kept_child: slice.root_child_index,
            rel: slice.rel.clone(),
            kept_tokens: kept.clone(),
        };
        out.records
            .push(record(u, result, Method::Crop, detail, rng));
    }
    out
}

/// Blocks for rotation: one per flexible root dependent plus the root block,
/// sorted by first token. Each block is `(head token, ascending indices)`.
fn rotation_blocks(tree: &DepTree, cfg: &TreeOpConfig) -> Vec<(usize, Vec<usize>)> {
    let flexible: Vec<SubtreeSlice> = root_slices(tree)
        .into_iter()
        .filter(|s| cfg.is_flexible(&s.rel))
        .collect();
    let mut in_flexible = vec![false; tree.len()];
    for s in &flexible {
        for &i in &s.token_indices {
            in_flexible[i] = true;
        }
    }
    let root_block: Vec<usize> = (0..tree.len()).filter(|&i| !in_flexible[i]).collect();
    let mut blocks: Vec<(usize, Vec<usize>)> = flexible
        .into_iter()
        .map(|s| (s.root_child_index, s.token_indices))
        .collect();
    blocks.push((tree.root(), root_block));
    blocks.sort_by_key(|(_, toks)| toks[0]);
    blocks
}

/// Largest block count for which every permutation is enumerated.
const ENUMERATE_BLOCKS: usize = 7;

/// Rotate: permutations of the root block and the flexible-dependent
/// blocks, each block keeping its internal order. The identity order and
/// orders reproducing the source are excluded; at most `max_rotate`
/// distinct variants are drawn uniformly without replacement.
pub fn rotate_variants(
    u: &Utterance,
    tree: &DepTree,
    cfg: &TreeOpConfig,
    max_rotate: usize,
    rng: &mut AugRng,
) -> TreeVariants {
    assert!(max_rotate >= 1, "max_rotate must be positive");
    let mut out = TreeVariants::default();
    if !aligned(u, tree) {
        out.inapplicable = true;
        return out;
    }
    let blocks = rotation_blocks(tree, cfg);
    let k = blocks.len();
    if k < 2 {
        out.inapplicable = true;
        return out;
    }

    let mut block_of = vec![0; u.len()];
    for (b, (_, toks)) in blocks.iter().enumerate() {
        for &i in toks {
            block_of[i] = b;
        }
    }
    let splits = u
        .spans()
        .iter()
        .any(|sp| (sp.start..sp.end).any(|i| block_of[i] != block_of[sp.start]));
    if splits {
        out.split_spans += 1;
        return out;
    }

    let order_of = |perm: &[usize]| -> Vec<usize> {
        perm.iter()
            .flat_map(|&b| blocks[b].1.iter().copied())
            .collect()
    };
    let source: (Vec<&String>, Vec<&String>) =
        (u.tokens().iter().collect(), u.slot_tags().iter().collect());
    let mut seen: HashSet<(Vec<&String>, Vec<&String>)> = HashSet::new();
    seen.insert(source);
    let identity: Vec<usize> = (0..k).collect();

    let mut accept = |perm: &[usize], identical: &mut usize| -> Option<Vec<usize>> {
        if perm == identity.as_slice() {
            return None;
        }
        let order = order_of(perm);
        let key = (
            order.iter().map(|&i| &u.tokens()[i]).collect(),
            order.iter().map(|&i| &u.slot_tags()[i]).collect(),
        );
        if !seen.insert(key) {
            *identical += 1;
            return None;
        }
        Some(perm.to_vec())
    };

    let mut chosen: Vec<Vec<usize>> = Vec::new();
    if k <= ENUMERATE_BLOCKS {
        let valid: Vec<Vec<usize>> = (0..k)
            .permutations(k)
            .filter_map(|p| accept(&p, &mut out.identical))
            .collect();
        for pick in choose_subset(valid.len(), max_rotate, rng) {
            chosen.push(valid[pick].clone());
        }
    } else {
        // k! is too large to list; shuffles almost never collide.
        let mut perm = identity.clone();
        let mut attempts = 0;
        while chosen.len() < max_rotate && attempts < max_rotate * 50 {
            attempts += 1;
            perm.shuffle(rng);
            if let Some(p) = accept(&perm, &mut out.identical) {
                chosen.push(p);
            }
        }
    }

    for perm in chosen {
        let id = derived_id(u.id(), Method::Rotate, out.records.len());
        let result = build_variant(u, &order_of(&perm), id);
        let detail = OpDetail::Rotate {
            block_order: perm.iter().map(|&b| blocks[b].0).collect(),
        };
        out.records
            .push(record(u, result, Method::Rotate, detail, rng));
    }
    out
}
