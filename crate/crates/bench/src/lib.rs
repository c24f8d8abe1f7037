//! Synthetic corpora for benchmarks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use sluaug_core::{AugRng, Corpus, DepTree, Utterance};

const CITIES: [&str; 12] = [
    "atlanta",
    "boston",
    "denver",
    "dallas",
    "baltimore",
    "pittsburgh",
    "oakland",
    "seattle",
    "miami",
    "phoenix",
    "detroit",
    "charlotte",
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

/// `n` flight queries of the form "show me flights from X to Y [on D]",
/// each with its dependency tree.
pub fn flight_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = AugRng::new(seed);
    let mut utts = Vec::with_capacity(n);
    let mut trees = BTreeMap::new();
    for i in 0..n {
        let from = *CITIES.choose(&mut rng).unwrap();
        let to = *CITIES.choose(&mut rng).unwrap();
        let mut tokens = vec!["show", "me", "flights", "from", from, "to", to];
        let mut tags = vec!["O", "O", "O", "O", "B-fromloc", "O", "B-toloc"];
        let mut heads = vec![None, Some(0), Some(0), Some(2), Some(3), Some(2), Some(5)];
        let mut rels = vec!["ROOT", "dative", "dobj", "prep", "pobj", "prep", "pobj"];
        if rng.gen_bool(0.5) {
            tokens.extend(["on", *DAYS.choose(&mut rng).unwrap()]);
            tags.extend(["O", "B-day"]);
            heads.extend([Some(0), Some(7)]);
            rels.extend(["prep", "pobj"]);
        }
        let id = format!("b{i:05}");
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let forms = owned(&tokens);
        utts.push(Utterance::new(&id, forms.clone(), owned(&tags), "flight").expect("valid tags"));
        let tree = DepTree::new(&id, heads, owned(&rels), forms).expect("valid tree");
        trees.insert(id, tree);
    }
    Corpus::new(utts)
        .and_then(|c| c.with_trees(trees))
        .expect("ids are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded_and_aligned() {
        let a = flight_corpus(50, 9);
        assert_eq!(a.len(), 50);
        assert_eq!(a.trees().len(), 50);
        assert_eq!(a.utterances(), flight_corpus(50, 9).utterances());
    }
}
