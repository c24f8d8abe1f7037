//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sluaug_core::augment::lm::{
    build_filter_pairs, nucleus_sample, FailPolicy, FillMaskClient, PairLabel, PairScorerClient,
    TokenDistribution,
};
use sluaug_core::augment::slotsub::{slot_sub_once, SlotSubOptions};
use sluaug_core::augment::tree::{crop_variants, rotate_variants, TreeOpConfig};
use sluaug_core::augment::write_provenance;
use sluaug_core::corpus::write_corpus;
use sluaug_core::pipeline::PipelineError;
use sluaug_core::{
    run_augment, AugConfig, AugRng, Backends, Corpus, Method, OpDetail, SlotIndex, Utterance,
};

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const ALL_METHODS: [Method; 4] = [
    Method::SlotSub,
    Method::SlotSubLm,
    Method::Crop,
    Method::Rotate,
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn stubs() -> Backends<'static> {
    Backends {
        fill: Some(&stub_fill as &dyn FillMaskClient),
        scorer: Some(&stub_scorer as &dyn PairScorerClient),
    }
}

fn config(method: Method, seed: u64) -> AugConfig {
    AugConfig {
        method,
        seed,
        backend_url: (method == Method::SlotSubLm).then(|| "http://stub.invalid".to_owned()),
        ..AugConfig::default()
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn bio_validity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0usize;
    for case in 0..10_000u64 {
        let corpus = random_corpus(&mut rng);
        for method in ALL_METHODS {
            let cfg = AugConfig {
                n_aug: 3,
                max_in_flight: 1,
                ..config(method, case)
            };
            let out = run_augment(&corpus, &cfg, stubs()).map_err(|e| e.to_string())?;
            for u in out.emitted.utterances() {
                check_bio(u).map_err(|e| format!("case {case} {method}: {e}"))?;
                checked += 1;
            }
        }
    }
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "{checked} records from 10000 corpora in {:.1?}",
        start.elapsed()
    ))
}

fn slot_sub_oracle() -> Outcome {
    let corpus = toy10();
    let idx = SlotIndex::build(&corpus);
    let mut oracle: BTreeMap<(String, usize), BTreeSet<Vec<String>>> = BTreeMap::new();
    let mut spans = 0;
    for u in corpus.utterances() {
        for span in u.spans() {
            let expected = brute_force_candidates(&corpus, &span.label, &span.value);
            let got: BTreeSet<Vec<String>> =
                idx.candidates(&span).iter().map(|v| v.to_vec()).collect();
            ensure(got == expected, || {
                format!(
                    "{} span {}..{}: {got:?} != {expected:?}",
                    u.id(),
                    span.start,
                    span.end
                )
            })?;
            oracle.insert((u.id().to_owned(), span.start), expected);
            spans += 1;
        }
    }
    let in_oracle = |src: &str, label: &str, start: usize, value: &[String]| {
        oracle
            .get(&(src.to_owned(), start))
            .is_some_and(|set| set.contains(value))
            && corpus
                .get(src)
                .unwrap()
                .spans()
                .iter()
                .any(|s| s.start == start && s.label == label)
    };
    let mut samples = 0;
    for seed in 0..1000u64 {
        for u in corpus.utterances() {
            let mut rng = AugRng::new(seed);
            if let Some(rec) = slot_sub_once(u, &idx, &SlotSubOptions::default(), &mut rng) {
                let OpDetail::Substitution {
                    label,
                    start,
                    new_value,
                    ..
                } = &rec.op_detail
                else {
                    return Err("slot-sub produced a non-substitution record".into());
                };
                ensure(in_oracle(u.id(), label, *start, new_value), || {
                    format!("seed {seed} {}: {new_value:?} not a candidate", u.id())
                })?;
                samples += 1;
            }
        }
        let out = run_augment(&corpus, &config(Method::SlotSub, seed), Backends::default())
            .map_err(|e| e.to_string())?;
        for rec in &out.records {
            let OpDetail::Substitution {
                label,
                start,
                new_value,
                ..
            } = &rec.op_detail
            else {
                return Err("slot-sub produced a non-substitution record".into());
            };
            ensure(in_oracle(&rec.source_id, label, *start, new_value), || {
                format!(
                    "seed {seed} {}: {new_value:?} not a candidate",
                    rec.result.id()
                )
            })?;
            samples += 1;
        }
    }
    Ok(format!(
        "{spans} candidate sets exact, {samples} sampled values in set"
    ))
}

fn check_locality(corpus: &Corpus, method: Method, seed: u64) -> Result<usize, String> {
    let out = run_augment(corpus, &config(method, seed), stubs()).map_err(|e| e.to_string())?;
    for rec in &out.records {
        let src = corpus.get(&rec.source_id).ok_or("unknown source")?;
        let OpDetail::Substitution {
            label,
            start,
            old_value,
            new_value,
            ..
        } = &rec.op_detail
        else {
            return Err("substitution record expected".into());
        };
        let explained = explain_substitution(src, &rec.result);
        ensure(
            explained.contains(&(label.clone(), old_value.clone(), new_value.clone())),
            || {
                format!(
                    "{}: not a single span replacement at {start}",
                    rec.result.id()
                )
            },
        )?;
        ensure(label_multiset(src) == label_multiset(&rec.result), || {
            format!("{}: label multiset changed", rec.result.id())
        })?;
        ensure(rec.result.intent() == src.intent(), || {
            "intent changed".into()
        })?;
    }
    Ok(out.records.len())
}

fn edit_locality() -> Outcome {
    let mut total = 0;
    for method in [Method::SlotSub, Method::SlotSubLm] {
        total += check_locality(&toy10(), method, 13)?;
        total += check_locality(&atis_like(200, 3), method, 13)?;
    }
    let mut runner = TestRunner::new(Config {
        cases: 2000,
        failure_persistence: None,
        ..Config::default()
    });
    let counted = std::cell::Cell::new(0usize);
    runner
        .run(&(any::<u64>(), 1usize..=8), |(seed, size)| {
            let corpus = random_corpus_n(&mut ChaCha8Rng::seed_from_u64(seed), size);
            for method in [Method::SlotSub, Method::SlotSubLm] {
                let n = check_locality(&corpus, method, seed).map_err(TestCaseError::fail)?;
                counted.set(counted.get() + n);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    total += counted.get();
    Ok(format!("{total} substitutions, each one span replacement"))
}

fn tokens_at(u: &Utterance, order: &[usize]) -> (Vec<String>, Vec<String>) {
    (
        order.iter().map(|&i| u.tokens()[i].clone()).collect(),
        order.iter().map(|&i| u.slot_tags()[i].clone()).collect(),
    )
}

fn check_tree_ops(u: &Utterance, corpus: &Corpus, seed: u64) -> Result<(usize, usize), String> {
    let tree = corpus.tree(u.id()).unwrap();
    let cfg = TreeOpConfig::default();

    let crops = crop_variants(u, tree, &cfg, 3, &mut AugRng::new(seed));
    let reference = reference_crops(u, tree);
    ensure(crops.records.len() == reference.len().min(3), || {
        format!(
            "{}: {} crops, expected {}",
            u.id(),
            crops.records.len(),
            reference.len().min(3)
        )
    })?;
    for rec in &crops.records {
        let OpDetail::Crop { kept_tokens, .. } = &rec.op_detail else {
            return Err("crop record expected".into());
        };
        ensure(reference.contains(kept_tokens), || {
            format!("{}: unexpected crop {kept_tokens:?}", u.id())
        })?;
        let (toks, tags) = tokens_at(u, kept_tokens);
        ensure(
            rec.result.tokens() == toks && rec.result.slot_tags() == tags,
            || format!("{}: crop output does not match kept tokens", u.id()),
        )?;
        ensure(is_subsequence(rec.result.tokens(), u.tokens()), || {
            "crop not a subsequence".into()
        })?;
    }

    let rotations = rotate_variants(u, tree, &cfg, 3, &mut AugRng::new(seed));
    let blocks = reference_blocks(tree);
    let block_of: BTreeMap<usize, usize> = blocks
        .iter()
        .flat_map(|(&head, toks)| toks.iter().map(move |&t| (t, head)))
        .collect();
    let crosses = u
        .spans()
        .iter()
        .any(|s| (s.start..s.end).any(|i| block_of[&i] != block_of[&s.start]));
    let heads_in_order: Vec<usize> = blocks
        .keys()
        .copied()
        .sorted_by_key(|h| blocks[h][0])
        .collect();
    if crosses || blocks.len() < 2 {
        ensure(rotations.records.is_empty(), || {
            format!("{}: rotation should not apply", u.id())
        })?;
    } else if blocks.len() <= 7 {
        let source = (u.tokens().to_vec(), u.slot_tags().to_vec());
        let distinct: HashSet<(Vec<String>, Vec<String>)> = heads_in_order
            .iter()
            .copied()
            .permutations(blocks.len())
            .filter(|p| *p != heads_in_order)
            .map(|p| {
                let order: Vec<usize> = p.iter().flat_map(|h| blocks[h].clone()).collect();
                tokens_at(u, &order)
            })
            .filter(|v| *v != source)
            .collect();
        ensure(rotations.records.len() == distinct.len().min(3), || {
            format!(
                "{}: {} rotations, expected {}",
                u.id(),
                rotations.records.len(),
                distinct.len().min(3)
            )
        })?;
    }
    ensure(rotations.records.len() <= 3, || {
        "more than max_rotate rotations".into()
    })?;
    for rec in &rotations.records {
        let OpDetail::Rotate { block_order } = &rec.op_detail else {
            return Err("rotate record expected".into());
        };
        let as_set: BTreeSet<usize> = block_order.iter().copied().collect();
        ensure(
            block_order.len() == blocks.len() && as_set == blocks.keys().copied().collect(),
            || {
                format!(
                    "{}: block order {block_order:?} is not a block permutation",
                    u.id()
                )
            },
        )?;
        ensure(*block_order != heads_in_order, || {
            format!("{}: identity rotation", u.id())
        })?;
        let order: Vec<usize> = block_order.iter().flat_map(|h| blocks[h].clone()).collect();
        let (toks, tags) = tokens_at(u, &order);
        ensure(
            rec.result.tokens() == toks && rec.result.slot_tags() == tags,
            || format!("{}: rotation output is not the block concatenation", u.id()),
        )?;
        let multiset = |t: &[String]| t.iter().cloned().sorted().collect::<Vec<_>>();
        ensure(
            multiset(rec.result.tokens()) == multiset(u.tokens()),
            || "token multiset changed".into(),
        )?;
        ensure(
            rec.result.tokens() != u.tokens() || rec.result.slot_tags() != u.slot_tags(),
            || "rotation equals source".into(),
        )?;
    }
    Ok((crops.records.len(), rotations.records.len()))
}

fn crop_rotate_structure() -> Outcome {
    let defaults = AugConfig::default();
    ensure(defaults.max_crop == 3 && defaults.max_rotate == 3, || {
        "defaults are not 3/3".into()
    })?;

    let fig = figure();
    let u = fig.get("fig").unwrap();
    let tree = fig.tree("fig").unwrap();
    let cfg = TreeOpConfig::default();
    let crops = crop_variants(u, tree, &cfg, 3, &mut AugRng::new(13));
    let cropped: Vec<String> = crops
        .records
        .iter()
        .map(|r| r.result.tokens().join(" "))
        .collect();
    ensure(
        cropped
            .iter()
            .any(|s| s == "show the cheapest flight from atlanta to san francisco"),
        || format!("figure crop missing: {cropped:?}"),
    )?;
    let rotations = rotate_variants(u, tree, &cfg, 5, &mut AugRng::new(13));
    let rotated: Vec<String> = rotations
        .records
        .iter()
        .map(|r| r.result.tokens().join(" "))
        .collect();
    ensure(
        rotated
            .iter()
            .any(|s| s == "me the cheapest flight from atlanta to san francisco show"),
        || format!("figure rotation missing: {rotated:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut n_crop, mut n_rot) = (0, 0);
    for case in 0..3000u64 {
        let corpus = random_corpus(&mut rng);
        for u in corpus.utterances() {
            let (c, r) = check_tree_ops(u, &corpus, case)?;
            n_crop += c;
            n_rot += r;
        }
    }
    Ok(format!(
        "figure variants match; {n_crop} crops and {n_rot} rotations checked"
    ))
}

fn nucleus_sampling() -> Outcome {
    let start = Instant::now();
    let d = TokenDistribution::new(
        vec![("a".into(), 0.5), ("b".into(), 0.3), ("c".into(), 0.2)],
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let mut rng = AugRng::new(99);
    for i in 0..10_000 {
        let t = nucleus_sample(&d, 0.7, &mut rng).map_err(|e| e.to_string())?;
        ensure(t != "c", || format!("draw {i} at p=0.7 returned c"))?;
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..10_000 {
        *counts
            .entry(nucleus_sample(&d, 0.9, &mut rng).map_err(|e| e.to_string())?)
            .or_default() += 1;
    }
    let mut freqs = Vec::new();
    for (tok, want) in [("a", 0.5), ("b", 0.3), ("c", 0.2)] {
        let got = counts.get(tok).copied().unwrap_or(0) as f64 / 10_000.0;
        ensure((got - want).abs() <= 0.02, || {
            format!("p=0.9 freq of {tok} is {got}, want {want}")
        })?;
        freqs.push(format!("{tok}={got:.3}"));
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("p=0.9 frequencies {}", freqs.join(" ")))
}

fn write_run(dir: &Path, out: &sluaug_core::AugmentOutput) -> std::io::Result<()> {
    write_corpus(
        &out.emitted,
        BufWriter::new(File::create(dir.join("out.jsonl"))?),
    )?;
    write_provenance(
        &out.records,
        BufWriter::new(File::create(dir.join("prov.jsonl"))?),
    )?;
    serde_json::to_writer_pretty(File::create(dir.join("stats.json"))?, &out.stats)?;
    Ok(())
}

fn determinism() -> Outcome {
    let mut tree_corpus = random_corpus_n(&mut ChaCha8Rng::seed_from_u64(8), 60);
    tree_corpus = Corpus::new(
        tree_corpus
            .utterances()
            .iter()
            .chain(figure().utterances())
            .cloned()
            .collect(),
    )
    .unwrap()
    .with_trees(
        tree_corpus
            .trees()
            .clone()
            .into_iter()
            .chain(figure().trees().clone())
            .collect(),
    )
    .unwrap();
    let mut runs = 0;
    for method in ALL_METHODS {
        let corpus = if method.uses_trees() {
            tree_corpus.clone()
        } else {
            atis_like(100, 5)
        };
        let base = AugConfig {
            filter_enabled: method == Method::SlotSubLm,
            filter_on_error: FailPolicy::Closed,
            ..config(method, 21)
        };
        let variants = [
            base.clone(),
            base.clone(),
            AugConfig {
                max_in_flight: 1,
                ..base.clone()
            },
            AugConfig {
                emit_union: true,
                ..base.clone()
            },
            AugConfig {
                emit_union: true,
                ..base.clone()
            },
        ];
        let mut files: Vec<Vec<Vec<u8>>> = Vec::new();
        for cfg in &variants {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let out = run_augment(&corpus, cfg, stubs()).map_err(|e| e.to_string())?;
            write_run(dir.path(), &out).map_err(|e| e.to_string())?;
            let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
            files.push(vec![
                read("out.jsonl"),
                read("prov.jsonl"),
                read("stats.json"),
            ]);
            runs += 1;
        }
        ensure(files[0] == files[1] && files[0] == files[2], || {
            format!("{method}: reruns differ")
        })?;
        ensure(files[3] == files[4], || {
            format!("{method}: union reruns differ")
        })?;
        ensure(!files[0][0].is_empty(), || {
            format!("{method}: produced nothing")
        })?;
    }
    Ok(format!(
        "{runs} runs, all output files byte-identical per config"
    ))
}

fn volume() -> Outcome {
    let corpus = atis_like(400, 2024);
    let cfg = AugConfig {
        n_aug: 10,
        ..config(Method::SlotSub, 13)
    };
    let out = run_augment(&corpus, &cfg, Backends::default()).map_err(|e| e.to_string())?;
    let n = out.records.len();
    ensure((2000..=4000).contains(&n), || {
        format!("|D'| = {n} outside [2000, 4000]")
    })?;
    Ok(format!("|D| = 400, |D'| = {n}"))
}

fn filter_pairs() -> Outcome {
    let mut total = 0;
    for (name, corpus) in [("toy10", toy10()), ("atis", atis_like(400, 11))] {
        let idx = SlotIndex::build(&corpus);
        let occurrences = all_pairs(&corpus);
        let seen_under = |label: &str, value: &[String]| {
            occurrences
                .iter()
                .any(|(l, v)| l == label && v.as_slice() == value)
        };
        let pairs = build_filter_pairs(&corpus, &idx, 13).map_err(|e| e.to_string())?;
        let accept = pairs
            .iter()
            .filter(|p| p.label == PairLabel::Accept)
            .count();
        let reject = pairs.len() - accept;
        ensure(accept.abs_diff(reject) <= 1, || {
            format!("{name}: {accept} accept vs {reject} reject")
        })?;
        ensure(reject > 0, || format!("{name}: no reject pairs"))?;
        for p in pairs.iter().filter(|p| p.label == PairLabel::Reject) {
            ensure(p.value_label != p.span_label, || {
                format!("{name}: reject from same label")
            })?;
            ensure(seen_under(&p.value_label, &p.value), || {
                format!("{name}: value not under its label")
            })?;
            ensure(!seen_under(&p.span_label, &p.value), || {
                format!(
                    "{name}: reject value {:?} is valid for {}",
                    p.value, p.span_label
                )
            })?;
        }
        total += pairs.len();
    }
    Ok(format!(
        "{total} pairs, rejects all cross-label, classes balanced"
    ))
}

fn offline() -> Outcome {
    let corpus = toy10();
    let cfg = config(Method::SlotSubLm, 13);
    match run_augment(&corpus, &cfg, Backends::default()) {
        Err(PipelineError::MissingFillBackend) => {}
        other => {
            return Err(format!(
                "expected a missing-backend error, got {:?}",
                other.map(|o| o.records.len())
            ))
        }
    }
    let out = run_augment(&corpus, &cfg, stubs()).map_err(|e| e.to_string())?;
    ensure(!out.records.is_empty(), || {
        "stub LM run produced nothing".into()
    })?;
    Ok("LM method runs on the stub and refuses to run without a backend".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bio-validity-fuzz", bio_validity),
        ("slot-sub-oracle-equivalence", slot_sub_oracle),
        ("slot-sub-edit-locality", edit_locality),
        ("crop-rotate-structure", crop_rotate_structure),
        ("nucleus-sampling", nucleus_sampling),
        ("determinism", determinism),
        ("volume-plausibility", volume),
        ("filter-pair-construction", filter_pairs),
        ("offline-stub-backends", offline),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name} ({detail}) [{:.2?}]", start.elapsed()),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
