//! The acceptance criteria, each run at its stated tolerance. Every
//! criterion prints one PASS or FAIL line and the process exits non-zero if
//! any fails. Runs without the libtest harness so the lines always show.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use compsplit::atomize::{select_k, AtomizeConfig};
use compsplit::augment::{
    augment_loop, discover_fragments, generate_candidates, rank_and_filter, AugmentConfig, Candidate, Fragment, FragmentPair, IterationStats,
    NgramRanker, Operation, Ranker, RankerError,
};
use compsplit::corpus::{save_corpus, write_jsonl, Dataset, Language, LoadOptions};
use compsplit::dbca::{chernoff, divergence, greedy_split, DivergenceKind, LabeledProblem, SplitConfig};
use compsplit::exprtree::canonical_template;
use compsplit::synth::{build_sd, bundled_rules, load_rules, match_rules, parse_rules, IndexedCorpus, KeywordExtractor, Outcome, Synthesizer};
use compsplit::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(started: Instant, limit: Duration) -> Check {
    let took = started.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn distribution(pairs: &[(String, f64)]) -> Distribution {
    Distribution::from_probs(pairs.iter().cloned())
}

#[allow(clippy::approx_constant)]
fn chernoff_and_divergence() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..100 {
        let pairs = common::random_distribution(&mut rng, 1 + i % 10);
        let p = distribution(&pairs);
        for alpha in [0.1, 0.5] {
            let c = chernoff(&p, &p, alpha).map_err(|e| e.to_string())?;
            ensure!((c - 1.0).abs() <= 1e-12, "chernoff(P, P) = {c}");
        }
        // One labeled problem per item with positive mass, on both sides.
        let items: Vec<String> = pairs.iter().filter(|(_, w)| *w > 0.0).map(|(k, _)| k.clone()).collect();
        let side = [LabeledProblem::new("x", items.clone(), items, 1)];
        for (kind, alpha) in [(DivergenceKind::Atom, 0.1), (DivergenceKind::Compound, 0.5)] {
            let d: f64 = divergence(&side, &side, kind, alpha).map_err(|e| e.to_string())?;
            ensure!(d.abs() <= 1e-12, "divergence(A, A) = {d}");
        }
    }
    let p = distribution(&[("a".into(), 0.5), ("b".into(), 0.5)]);
    let q = distribution(&[("a".into(), 1.0), ("b".into(), 0.0)]);
    let c = chernoff(&p, &q, 0.5).map_err(|e| e.to_string())?;
    let direct = common::chernoff_direct(
        &[("a".to_string(), 0.5), ("b".to_string(), 0.5)].into_iter().collect(),
        &[("a".to_string(), 1.0), ("b".to_string(), 0.0)].into_iter().collect(),
        0.5,
    );
    ensure!((c - 0.707107).abs() < 1e-6 && (c - direct).abs() < 1e-12, "hand case gave {c}, direct {direct}");
    within(started, Duration::from_secs(1))
}

fn compound_enumeration() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..500 {
        let tree = common::random_tree(&mut rng, 7);
        let mut got = tree.compounds(&common::leaf_label).map_err(|e| e.to_string())?;
        ensure!(got.len() == tree.operator_count(), "tree {i}: {} compounds for {} operators", got.len(), tree.operator_count());
        got.sort();
        ensure!(got == common::brute_compounds(&tree), "tree {i} ({tree}): multisets differ");
    }
    within(started, Duration::from_secs(5))
}

fn splitter_quality() -> Check {
    let started = Instant::now();
    let config = SplitConfig { target_ratio: 0.25, atom_bound: 0.02, sweeps: 2, ..SplitConfig::default() };
    let mut worst_gap: f64 = 0.0;
    for seed in 0..20 {
        let pool = common::mixed_twelve_item_pool(seed);
        let split = greedy_split(&pool, &config).map_err(|e| e.to_string())?;
        let train: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
        let all: BTreeSet<&str> = pool.iter().map(|p| p.id.as_str()).collect();
        ensure!(train.is_disjoint(&test) && train.union(&test).copied().collect::<BTreeSet<_>>() == all, "pool {seed}: not a partition");
        let share = test.len() as f64 / pool.len() as f64;
        ensure!((share - 0.25).abs() <= 0.025 + 1e-12, "pool {seed}: {} test items", test.len());
        let best = common::exhaustive_best(&pool, test.len() as u32, 0.02).ok_or(format!("pool {seed}: no feasible partition"))?;
        ensure!(split.report.atom_divergence <= 0.02 + 1e-12, "pool {seed}: atom divergence {}", split.report.atom_divergence);
        let gap = best - split.report.compound_divergence;
        ensure!(gap <= 0.05, "pool {seed}: compound divergence {} vs optimum {best}", split.report.compound_divergence);
        worst_gap = worst_gap.max(gap);
    }
    within(started, Duration::from_secs(30))?;

    let pool = common::load("families.jsonl");
    let (best, trials) = select_k::<f64>(&pool, &[5, 10, 20], &AtomizeConfig::default(), &SplitConfig::default()).map_err(|e| e.to_string())?;
    let report = &trials[best].split.report;
    println!(
        "  pools: worst gap to optimum {worst_gap:.4}; families (k = {}): DBCA_c {:.4}, DBCA_a {:.4}",
        trials[best].k, report.compound_divergence, report.atom_divergence
    );
    ensure!(report.compound_divergence >= 0.6, "families: DBCA_c {}", report.compound_divergence);
    ensure!(report.atom_divergence <= 0.02, "families: DBCA_a {}", report.atom_divergence);
    Ok(())
}

fn rule_table_fidelity() -> Check {
    let pool = common::load("sd_pool.jsonl");
    let (corpus, extractor, options) = (IndexedCorpus::from_dataset(&pool), KeywordExtractor::bundled(Language::En), LoadOptions::default());
    let synth = Synthesizer { corpus: &corpus, extractor: &extractor, options: &options };
    let seed = pool.get("d1").ok_or("fixture lacks d1")?;
    ensure!(seed.sentences.len() == 4 && seed.template() == "n1 * n2 / n3", "d1 is not a 4-sentence n1 * n2 / n3 problem");
    let table = bundled_rules();
    let rules = match_rules(seed, &table);
    ensure!(rules.len() == 1 && rules[0].id == 2, "matched rules {:?}", rules.iter().map(|r| r.id).collect::<Vec<_>>());
    let (a, b) = synth.decompose(seed, rules[0]).map_err(|e| format!("{e:?}"))?;
    ensure!(a.problem.template() == "n1 * n2" && b.problem.template() == "n1 / n2", "products {} and {}", a.problem.template(), b.problem.template());

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("resources").join("rules.json");
    let loaded = load_rules(&path).map_err(|e| e.to_string())?;
    let round_trip = parse_rules(&serde_json::to_string(&loaded).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(round_trip == loaded && loaded == table, "rules.json does not round-trip");
    ensure!(loaded.len() == 13, "{} rules", loaded.len());
    let printed = |t: &str| canonical_template(&t.replace('×', "*")).map_err(|e| e.to_string());
    let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    for (rule, (id, sentences, template, products)) in loaded.iter().zip(common::PRINTED_TABLE) {
        ensure!(rule.id == *id && rule.seed_sentences == words(sentences), "rule {id}: seed shape");
        ensure!(printed(&rule.seed_template)? == printed(template)?, "rule {id}: seed template");
        ensure!(rule.products.len() == products.len(), "rule {id}: product count");
        for (p, (s, t)) in rule.products.iter().zip(products.iter()) {
            ensure!(p.sentences_with_delta == words(s) && printed(&p.template)? == printed(t)?, "rule {id}: product {s} / {t}");
        }
    }
    Ok(())
}

fn synthesis_allocation() -> Check {
    let started = Instant::now();
    let pool = common::load("sd_pool.jsonl");
    ensure!(pool.len() == 6, "fixture has {} problems", pool.len());
    let (corpus, extractor, options) = (IndexedCorpus::from_dataset(&pool), KeywordExtractor::bundled(Language::En), LoadOptions::default());
    let synth = Synthesizer { corpus: &corpus, extractor: &extractor, options: &options };
    let out = build_sd(&pool, &bundled_rules(), &synth);
    let ids = |d: &Dataset| d.problems.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
    ensure!(ids(&out.train) == ["d1~r2.1", "d1~r2.2", "s1"], "train {:?}", ids(&out.train));
    ensure!(ids(&out.test) == ["d1", "s1~r10.1"], "test {:?}", ids(&out.test));
    let tag = |id: &str| out.test.get(id).and_then(|p| p.extra.get("generalization")).and_then(|v| v.as_str()).map(str::to_string);
    ensure!(tag("d1").as_deref() == Some("structural") && tag("s1~r10.1").as_deref() == Some("lexical"), "generalization tags");
    let log: Vec<(&str, Outcome)> = out.log.iter().map(|e| (e.seed_id.as_str(), e.outcome)).collect();
    let expected = [
        ("d1", Outcome::Accepted),
        ("m1", Outcome::Abandoned),
        ("v1", Outcome::Abandoned),
        ("s1", Outcome::Accepted),
        ("s2", Outcome::Abandoned),
        ("z1", Outcome::Abandoned),
    ];
    ensure!(log == expected, "log {log:?}");
    let zero: Vec<&str> = out
        .log
        .iter()
        .filter(|e| matches!(e.abandonment, Some(compsplit::synth::Abandonment::ZeroSimilarity { .. })))
        .map(|e| e.seed_id.as_str())
        .collect();
    ensure!(zero == ["z1"], "zero-similarity abandonments {zero:?}");
    within(started, Duration::from_secs(1))
}

struct Scripted(Vec<f64>);

impl Ranker for Scripted {
    fn token_probs(&mut self, candidate: &Candidate) -> Result<Vec<f64>, RankerError> {
        let i: usize = candidate.id[1..].parse().map_err(|_| RankerError::Missing(candidate.id.clone()))?;
        Ok(vec![self.0[i], 0.9])
    }
}

fn augmentation_soundness() -> Check {
    let started = Instant::now();
    let pool = common::load("aug_pool.jsonl");
    ensure!(pool.len() == 10, "fixture has {} problems", pool.len());
    let spans = |f: &Fragment| f.spans.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>();
    let key = |p: &FragmentPair| (p.f1.problem_id.clone(), p.f1.sentence, spans(&p.f1), p.f2.problem_id.clone(), p.f2.sentence, spans(&p.f2));
    let pairs = discover_fragments(&pool, 4);
    let found: BTreeSet<common::PairKey> = pairs.iter().map(key).collect();
    ensure!(found.len() == pairs.len(), "duplicate pairs");
    let oracle = common::brute_fragment_pairs(&pool, 4);
    ensure!(found == oracle, "{} pairs found, {} from brute force", found.len(), oracle.len());

    let mut stats = IterationStats::default();
    let candidates = generate_candidates(&pool, 4, None, None, 0, &LoadOptions::default(), &mut stats);
    let (mut op1, mut op2) = (0, 0);
    for c in &candidates {
        let q = pool.get(&c.sources[0]).ok_or("unknown source")?;
        let other = pool.get(&c.sources[1]).ok_or("unknown source")?;
        match c.operation {
            Operation::Op1 => {
                op1 += 1;
                ensure!(common::op1_consistent(&c.problem, q, other), "{}: answer inconsistent", c.id);
            }
            Operation::Op2 => {
                op2 += 1;
                ensure!(c.problem.expression == q.expression, "{}: expression changed", c.id);
            }
        }
    }
    ensure!(op1 > 0 && op2 > 0, "{op1} operation 1 and {op2} operation 2 candidates");

    let probs = [0.30, 0.95, 0.50, 0.10, 0.85, 0.40, 0.70, 0.20, 0.60, 0.05];
    let batch: Vec<Candidate> = (0..10)
        .map(|i| Candidate {
            id: format!("c{i}"),
            problem: pool.problems[i].clone(),
            operation: Operation::Op2,
            sources: vec![],
            rule: String::new(),
            confidence: None,
        })
        .collect();
    let outcome = rank_and_filter(batch, &mut Scripted(probs.to_vec()), 0.2).map_err(|e| e.to_string())?;
    let kept: Vec<&str> = outcome.kept.iter().map(|c| c.id.as_str()).collect();
    ensure!(kept == ["c1", "c4"], "kept {kept:?}");
    println!("  {} fragment pairs; {op1} operation 1 and {op2} operation 2 candidates", pairs.len());
    within(started, Duration::from_secs(5))
}

fn jsonl_bytes(dataset: &Dataset, provenance: &[compsplit::augment::ProvenanceRecord]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (data, prov) = (dir.path().join("data.jsonl"), dir.path().join("provenance.jsonl"));
    save_corpus(dataset, &data).map_err(|e| e.to_string())?;
    write_jsonl(&prov, provenance).map_err(|e| e.to_string())?;
    Ok((std::fs::read(data).map_err(|e| e.to_string())?, std::fs::read(prov).map_err(|e| e.to_string())?))
}

fn iterative_loop() -> Check {
    let pool = common::load("aug_pool.jsonl");
    let config = AugmentConfig { iterations: 7, keep: 0.2, ..AugmentConfig::default() };
    let run = |train: &Dataset| -> Result<compsplit::augment::AugmentOutput, String> {
        let mut ranker = NgramRanker::fit(train, 2).map_err(|e| e.to_string())?;
        augment_loop(train, &mut ranker, &config, &LoadOptions::default()).map_err(|e| e.to_string())
    };
    let (a, b) = (run(&pool)?, run(&pool)?);
    ensure!(jsonl_bytes(&a.dataset, &a.provenance)? == jsonl_bytes(&b.dataset, &b.provenance)?, "outputs differ between runs");
    let mut size = pool.len();
    for s in &a.stats {
        ensure!(s.pool_size >= size, "pool shrank to {} in iteration {}", s.pool_size, s.iteration);
        size = s.pool_size;
    }
    ensure!(a.stats.len() == 7, "{} iterations", a.stats.len());

    // Hold two problems out as a test set and augment the rest.
    let test_ids = ["a09", "a10"];
    let train = common::dataset(pool.problems.iter().filter(|p| !test_ids.contains(&p.id.as_str())).cloned().collect());
    let held = run(&train)?;
    let leaked = held.provenance.iter().flat_map(|r| r.sources.iter().chain([&r.id])).find(|id| test_ids.contains(&id.as_str()));
    ensure!(leaked.is_none(), "provenance mentions {leaked:?}");
    println!("  pool grew from {} to {} over 7 iterations", pool.len(), size);
    Ok(())
}

const TRAIN: &str = r#"{"id":"t1","text":"Tom has 3 apples. How many apples?","expression":"3"}
{"id":"t2","text":"Sam has 4 pears. Sam buys 2 pears. How many pears?","expression":"4+2"}
{"id":"t3","text":"Ann has 7 cats and 2 dogs. How many more cats than dogs does Ann have?","expression":"7-2"}
"#;
const TEST: &str = r#"{"id":"e1","text":"Ann has 5 cats. How many cats does Ann have?","expression":"5"}
{"id":"e2","text":"Bob has 6 pens. He gives 2 pens to Sue. How many pens are left?","expression":"6-2"}
"#;

fn stats_fidelity() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (train, test, out) = (dir.path().join("train.jsonl"), dir.path().join("test.jsonl"), dir.path().join("out"));
    std::fs::write(&train, TRAIN).map_err(|e| e.to_string())?;
    std::fs::write(&test, TEST).map_err(|e| e.to_string())?;
    let run = common::compsplit(&["stats", "--k", "2", "--out", common::s(&out), common::s(&train), common::s(&test)]);
    ensure!(run.status.success(), "stats failed: {}", String::from_utf8_lossy(&run.stderr));
    let report = common::json(out.join("report.json"));
    // Tokens per sentence, punctuation included: t1 5 + 4, t2 5 + 5 + 4,
    // t3 8 + 10; e1 5 + 7, e2 5 + 7 + 6.
    let expected = ((9.0 + 14.0 + 18.0) / 3.0) / ((12.0 + 18.0) / 2.0);
    let lr = report["LR"].as_f64().ok_or("LR missing")?;
    ensure!((lr - expected).abs() <= 1e-9, "LR {lr}, expected {expected}");
    ensure!(report["NR"] == "3/2", "NR {}", report["NR"]);
    for column in ["DBCA_a", "DBCA_c"] {
        ensure!(report[column].is_number(), "{column} missing");
    }
    ensure!(report["schema_version"] == 1, "schema_version {}", report["schema_version"]);
    Ok(())
}

fn end_to_end_determinism() -> Check {
    let families = common::fixture("families.jsonl");
    let sd = common::fixture("sd_pool.jsonl");
    let aug = common::fixture("aug_pool.jsonl");
    let stats_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (train, test) = (stats_dir.path().join("train.jsonl"), stats_dir.path().join("test.jsonl"));
    std::fs::write(&train, TRAIN).map_err(|e| e.to_string())?;
    std::fs::write(&test, TEST).map_err(|e| e.to_string())?;
    let s = common::s;
    let attempt = catch_unwind(AssertUnwindSafe(|| {
        common::assert_deterministic(&["train.jsonl", "test.jsonl", "labels.jsonl", "report.json"], |dir| {
            common::compsplit(&["split", s(&families), s(dir)])
        });
        common::assert_deterministic(&["train.jsonl", "test.jsonl", "provenance.jsonl", "report.json"], |dir| {
            common::compsplit(&["synthesize", s(&sd), s(dir)])
        });
        common::assert_deterministic(&["aug.jsonl", "provenance.jsonl", "report.json"], |dir| {
            common::compsplit(&["augment", s(&aug), s(&dir.join("aug.jsonl"))])
        });
        common::assert_deterministic(&["report.json"], |dir| common::compsplit(&["stats", "--k", "2", "--out", s(dir), s(&train), s(&test)]));
        common::assert_deterministic(&["report.json"], |dir| common::compsplit(&["validate", "--out", s(dir), s(&aug)]));
    }));
    attempt.map_err(|e| e.downcast_ref::<String>().cloned().unwrap_or_else(|| "a subcommand was not deterministic".into()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 chernoff and divergence", chernoff_and_divergence),
        ("2 compound enumeration", compound_enumeration),
        ("3 greedy splitter quality", splitter_quality),
        ("4 rule table fidelity", rule_table_fidelity),
        ("5 synthesis allocation", synthesis_allocation),
        ("6 augmentation soundness", augmentation_soundness),
        ("7 iterative loop", iterative_loop),
        ("8 stats fidelity", stats_fidelity),
        ("9 end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let result = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(()) => println!("PASS criterion {name}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        println!("{} of 9 criteria failed", failed.len());
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
