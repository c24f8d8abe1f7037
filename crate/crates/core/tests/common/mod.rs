//! Fixtures, generators and brute-force reference checks shared by the
//! integration tests. Nothing here calls into the code under test except to
//! construct inputs.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sluaug_core::augment::lm::{BackendError, FillRequest, TokenDistribution};
use sluaug_core::corpus::{parse_corpus, parse_trees, repair_bio, DepTree};
use sluaug_core::{Corpus, Utterance};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn toy10() -> Corpus {
    parse_corpus(BufReader::new(File::open(fixture("toy10.jsonl")).unwrap())).unwrap()
}

pub fn figure() -> Corpus {
    let c = parse_corpus(BufReader::new(File::open(fixture("figure.jsonl")).unwrap())).unwrap();
    let trees = parse_trees(BufReader::new(
        File::open(fixture("figure.conllu")).unwrap(),
    ))
    .unwrap();
    c.with_trees(trees).unwrap()
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// BIO validity checked from scratch.
pub fn check_bio(u: &Utterance) -> Result<(), String> {
    let tags = u.slot_tags();
    if tags.len() != u.tokens().len() || tags.is_empty() {
        return Err(format!("{}: length", u.id()));
    }
    for (i, t) in tags.iter().enumerate() {
        if t == "O" {
            continue;
        }
        let (prefix, ty) = match (t.get(..2), t.get(2..)) {
            (Some(p), Some(ty)) if !ty.is_empty() => (p, ty),
            _ => return Err(format!("{}: malformed tag {t}", u.id())),
        };
        match prefix {
            "B-" => {}
            "I-" => {
                let ok =
                    i > 0 && (tags[i - 1] == format!("B-{ty}") || tags[i - 1] == format!("I-{ty}"));
                if !ok {
                    return Err(format!("{}: dangling {t} at {i}", u.id()));
                }
            }
            _ => return Err(format!("{}: malformed tag {t}", u.id())),
        }
    }
    Ok(())
}

/// Spans as `(label, start, end)` found by scanning for `B-` and extending
/// over matching `I-` tags.
pub fn naive_spans(tags: &[String]) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if let Some(label) = tags[i].strip_prefix("B-") {
            let cont = format!("I-{label}");
            let mut j = i + 1;
            while j < tags.len() && tags[j] == cont {
                j += 1;
            }
            out.push((label.to_owned(), i, j));
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

pub fn label_multiset(u: &Utterance) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for (l, _, _) in naive_spans(u.slot_tags()) {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Every `(label, value)` occurrence in the corpus, by nested loops.
pub fn all_pairs(c: &Corpus) -> Vec<(String, Vec<String>)> {
    let mut out = Vec::new();
    for u in c.utterances() {
        for (l, s, e) in naive_spans(u.slot_tags()) {
            out.push((l, u.tokens()[s..e].to_vec()));
        }
    }
    out
}

/// Candidate set for a span by comparing it with every other span.
pub fn brute_force_candidates(c: &Corpus, label: &str, value: &[String]) -> BTreeSet<Vec<String>> {
    all_pairs(c)
        .into_iter()
        .filter(|(l, v)| l == label && v.as_slice() != value)
        .map(|(_, v)| v)
        .collect()
}

/// If `out` is `src` with exactly one span's value swapped for a different
/// value tagged with the same label, returns `(label, old, new)` for every
/// source span that explains the edit.
pub fn explain_substitution(
    src: &Utterance,
    out: &Utterance,
) -> Vec<(String, Vec<String>, Vec<String>)> {
    let mut found = Vec::new();
    let (st, sg) = (src.tokens(), src.slot_tags());
    let (ot, og) = (out.tokens(), out.slot_tags());
    for (label, start, end) in naive_spans(sg) {
        let context = st.len() - (end - start);
        if ot.len() <= context {
            continue;
        }
        let new_len = ot.len() - context;
        let tail = st.len() - end;
        if ot[..start] != st[..start] || og[..start] != sg[..start] {
            continue;
        }
        if ot[start + new_len..] != st[end..] || og[start + new_len..] != sg[end..] {
            continue;
        }
        debug_assert_eq!(ot.len() - (start + new_len), tail);
        let mid_tags = &og[start..start + new_len];
        let tags_ok = mid_tags.iter().enumerate().all(|(i, t)| {
            *t == if i == 0 {
                format!("B-{label}")
            } else {
                format!("I-{label}")
            }
        });
        let new_value = ot[start..start + new_len].to_vec();
        if tags_ok && new_value.as_slice() != &st[start..end] {
            found.push((label, st[start..end].to_vec(), new_value));
        }
    }
    found
}

pub fn is_subsequence(small: &[String], big: &[String]) -> bool {
    let mut it = big.iter();
    small.iter().all(|t| it.any(|b| b == t))
}

pub const FLEXIBLE: [&str; 8] = [
    "nsubj", "obj", "dobj", "iobj", "dative", "obl", "attr", "prep",
];
pub const KEEP: [&str; 7] = ["aux", "auxpass", "neg", "prt", "cop", "expl", "punct"];

fn base(rel: &str) -> String {
    rel.split(':').next().unwrap().to_lowercase()
}

/// Direct root child each token hangs under (`None` for the root itself).
pub fn top_child(tree: &DepTree, mut i: usize) -> Option<usize> {
    let heads = tree.heads();
    heads[i]?;
    loop {
        match heads[i] {
            Some(h) if heads[h].is_none() => return Some(i),
            Some(h) => i = h,
            None => unreachable!(),
        }
    }
}

/// Reference crop: all keep-one-flexible variants as kept index lists,
/// minus those that cut a span or keep everything.
pub fn reference_crops(u: &Utterance, tree: &DepTree) -> Vec<Vec<usize>> {
    let n = u.len();
    let tops: Vec<Option<usize>> = (0..n).map(|i| top_child(tree, i)).collect();
    let root_children: BTreeSet<usize> = tops.iter().flatten().copied().collect();
    let flexible: Vec<usize> = root_children
        .iter()
        .copied()
        .filter(|&c| FLEXIBLE.contains(&base(&tree.rels()[c]).as_str()))
        .collect();
    let spans = naive_spans(u.slot_tags());
    let mut out = Vec::new();
    for &chosen in &flexible {
        let kept: Vec<usize> = (0..n)
            .filter(|&i| match tops[i] {
                None => true,
                Some(c) => c == chosen || KEEP.contains(&base(&tree.rels()[c]).as_str()),
            })
            .collect();
        if kept.len() == n {
            continue;
        }
        let cuts = spans.iter().any(|(_, s, e)| {
            let k = (*s..*e).filter(|i| kept.contains(i)).count();
            k != 0 && k != e - s
        });
        if !cuts {
            out.push(kept);
        }
    }
    out
}

/// Reference rotation blocks keyed by head token: the root block holds the
/// root and everything not under a flexible root child.
pub fn reference_blocks(tree: &DepTree) -> BTreeMap<usize, Vec<usize>> {
    let root = tree.heads().iter().position(Option::is_none).unwrap();
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..tree.len() {
        let key = match top_child(tree, i) {
            Some(c) if FLEXIBLE.contains(&base(&tree.rels()[c]).as_str()) => c,
            _ => root,
        };
        blocks.entry(key).or_default().push(i);
    }
    blocks
}

const CITIES: [&str; 20] = [
    "atlanta",
    "boston",
    "denver",
    "dallas",
    "baltimore",
    "pittsburgh",
    "oakland",
    "philadelphia",
    "washington",
    "charlotte",
    "miami",
    "seattle",
    "phoenix",
    "detroit",
    "san francisco",
    "new york",
    "los angeles",
    "salt lake city",
    "las vegas",
    "st. louis",
];
const DAYS: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const PERIODS: [&str; 5] = ["morning", "afternoon", "evening", "night", "early morning"];
const COSTS: [&str; 5] = [
    "cheapest",
    "lowest",
    "most expensive",
    "least expensive",
    "economy",
];
const AIRLINES: [&str; 8] = [
    "delta",
    "united",
    "american",
    "us air",
    "continental",
    "twa",
    "northwest",
    "alaska airlines",
];

type Piece = (
    &'static str,
    Option<(&'static str, &'static [&'static str])>,
);

/// ATIS-shaped corpus: flight queries with ATIS-style slot labels drawn from
/// small value inventories.
pub fn atis_like(n: usize, seed: u64) -> Corpus {
    let templates: Vec<(&str, Vec<Piece>)> = vec![
        (
            "flight",
            vec![
                ("show me the", None),
                ("", Some(("cost_relative", &COSTS))),
                ("flight from", None),
                ("", Some(("fromloc.city_name", &CITIES))),
                ("to", None),
                ("", Some(("toloc.city_name", &CITIES))),
            ],
        ),
        (
            "flight",
            vec![
                ("flights from", None),
                ("", Some(("fromloc.city_name", &CITIES))),
                ("to", None),
                ("", Some(("toloc.city_name", &CITIES))),
                ("on", None),
                ("", Some(("depart_date.day_name", &DAYS))),
            ],
        ),
        (
            "flight",
            vec![
                ("i want a", None),
                ("", Some(("airline_name", &AIRLINES))),
                ("flight from", None),
                ("", Some(("fromloc.city_name", &CITIES))),
                ("to", None),
                ("", Some(("toloc.city_name", &CITIES))),
                ("in the", None),
                ("", Some(("depart_time.period_of_day", &PERIODS))),
            ],
        ),
        (
            "airfare",
            vec![
                ("what is the", None),
                ("", Some(("cost_relative", &COSTS))),
                ("fare from", None),
                ("", Some(("fromloc.city_name", &CITIES))),
                ("to", None),
                ("", Some(("toloc.city_name", &CITIES))),
            ],
        ),
        (
            "airline",
            vec![
                ("which airlines fly from", None),
                ("", Some(("fromloc.city_name", &CITIES))),
                ("to", None),
                ("", Some(("toloc.city_name", &CITIES))),
                ("on", None),
                ("", Some(("depart_date.day_name", &DAYS))),
            ],
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut utts = Vec::with_capacity(n);
    for i in 0..n {
        let (intent, pieces) = &templates[rng.gen_range(0..templates.len())];
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        for (text, slot) in pieces {
            match slot {
                None => {
                    for w in text.split_whitespace() {
                        tokens.push(w.to_owned());
                        tags.push("O".to_owned());
                    }
                }
                Some((label, values)) => {
                    let v = values.choose(&mut rng).unwrap();
                    for (k, w) in v.split_whitespace().enumerate() {
                        tokens.push(w.to_owned());
                        tags.push(if k == 0 {
                            format!("B-{label}")
                        } else {
                            format!("I-{label}")
                        });
                    }
                }
            }
        }
        utts.push(Utterance::new(format!("a{i:04}"), tokens, tags, *intent).unwrap());
    }
    Corpus::new(utts).unwrap()
}

const VOCAB: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
const RELS: [&str; 14] = [
    "nsubj", "dobj", "dative", "prep", "obl:tmod", "iobj", "aux", "neg", "punct", "det", "amod",
    "advmod", "compound", "pobj",
];
const TAGS: [&str; 7] = ["O", "O", "B-x", "I-x", "B-y", "I-y", "I-z"];

/// A random tree over `n` tokens: each non-root token attaches to a
/// uniformly chosen earlier-placed node.
pub fn random_tree<R: Rng>(id: &str, forms: &[String], rng: &mut R) -> DepTree {
    let n = forms.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![None; n];
    let mut rels = vec![String::new(); n];
    rels[order[0]] = "ROOT".to_owned();
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        heads[order[k]] = Some(parent);
        rels[order[k]] = RELS.choose(rng).unwrap().to_string();
    }
    DepTree::new(id, heads, rels, forms.to_vec()).unwrap()
}

/// A random corpus of 1-5 utterances (1-8 tokens each) with trees.
pub fn random_corpus<R: Rng>(rng: &mut R) -> Corpus {
    let n = rng.gen_range(1..=5);
    random_corpus_n(rng, n)
}

pub fn random_corpus_n<R: Rng>(rng: &mut R, n: usize) -> Corpus {
    let mut utts = Vec::with_capacity(n);
    let mut trees = BTreeMap::new();
    for i in 0..n {
        let len = rng.gen_range(1..=8);
        let tokens: Vec<String> = (0..len)
            .map(|_| VOCAB.choose(rng).unwrap().to_string())
            .collect();
        let raw: Vec<String> = (0..len)
            .map(|_| TAGS.choose(rng).unwrap().to_string())
            .collect();
        let id = format!("r{i}");
        let intent = if rng.gen_bool(0.5) { "p" } else { "q" };
        utts.push(Utterance::new(&id, tokens.clone(), repair_bio(&raw), intent).unwrap());
        trees.insert(id.clone(), random_tree(&id, &tokens, rng));
    }
    Corpus::new(utts).unwrap().with_trees(trees).unwrap()
}

/// Stub fill-mask backend: a fixed four-word distribution whose words
/// depend on the blank position.
pub fn stub_fill(req: &FillRequest) -> Result<TokenDistribution, BackendError> {
    let w = |k: usize| VOCAB[(req.blank_index + k) % VOCAB.len()].to_owned();
    Ok(TokenDistribution::new(
        vec![(w(0), 0.4), (w(1), 0.3), (w(2), 0.2), (w(3), 0.05)],
        0.05,
    )
    .unwrap())
}

/// Stub scorer that rejects rewrites containing an odd number of "a"s.
pub fn stub_scorer(_a: &[String], b: &[String]) -> Result<f64, BackendError> {
    let odd = b.iter().filter(|t| *t == "a").count() % 2 == 1;
    Ok(if odd { 0.1 } else { 0.9 })
}
