//! Fixtures and brute-force oracles shared by the integration tests. The
//! oracles are written from the definitions, without calling the library
//! routine they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use compsplit::corpus::{load_corpus, Dataset, Language, LoadOptions, MathWordProblem, RawRecord};
use compsplit::dbca::LabeledProblem;
use compsplit::exprtree::{ExpressionTree, Leaf, Operator};
use compsplit::Rational;
use serde_json::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn load(name: &str) -> Dataset {
    load_corpus(&fixture(name), Language::En).expect("fixture loads")
}

pub fn problem(id: &str, text: &str, expression: &str) -> MathWordProblem {
    let record = RawRecord {
        id: id.into(),
        text: Some(text.into()),
        sentences: None,
        expression: expression.into(),
        answer: None,
        extra: BTreeMap::new(),
    };
    MathWordProblem::from_record(&record, Language::En, &LoadOptions::default()).expect("fixture problem aligns")
}

pub fn dataset(problems: Vec<MathWordProblem>) -> Dataset {
    Dataset::new(problems, Language::En).expect("unique ids")
}

// ---------------------------------------------------------------------------
// Distributions

/// Relative frequencies of a multiset of items.
pub fn frequencies(items: &[String]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for item in items {
        *counts.entry(item.clone()).or_default() += 1.0;
    }
    let total = items.len() as f64;
    counts.values_mut().for_each(|c| *c /= total);
    counts
}

/// Direct summation of `p_i^a * q_i^(1-a)` over the shared support.
pub fn chernoff_direct(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>, alpha: f64) -> f64 {
    let mut sum = 0.0;
    for (key, pi) in p {
        if let Some(qi) = q.get(key) {
            if *pi > 0.0 && *qi > 0.0 {
                sum += pi.powf(alpha) * qi.powf(1.0 - alpha);
            }
        }
    }
    sum
}

pub fn divergence_direct(train: &[String], test: &[String], alpha: f64) -> f64 {
    1.0 - chernoff_direct(&frequencies(train), &frequencies(test), alpha)
}

/// A random probability vector over `support` keys, some of them zero.
pub fn random_distribution(rng: &mut ChaCha8Rng, support: usize) -> Vec<(String, f64)> {
    let raw: Vec<f64> = (0..support).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() + 1e-3 }).collect();
    let total: f64 = raw.iter().sum::<f64>().max(1e-12);
    let mut out: Vec<(String, f64)> = raw.iter().enumerate().map(|(i, w)| (format!("k{i}"), w / total)).collect();
    if out.iter().all(|(_, w)| *w == 0.0) {
        out[0].1 = 1.0;
    }
    out
}

// ---------------------------------------------------------------------------
// Expression trees

fn operator_symbol(op: Operator) -> &'static str {
    match op {
        Operator::Add => "+",
        Operator::Sub => "-",
        Operator::Mul => "*",
        Operator::Div => "/",
    }
}

/// Random tree over slots `0..leaves` with at most `max_ops` operators.
pub fn random_tree(rng: &mut ChaCha8Rng, max_ops: usize) -> ExpressionTree {
    let ops = rng.gen_range(0..=max_ops);
    build_tree(rng, ops)
}

fn build_tree(rng: &mut ChaCha8Rng, ops: usize) -> ExpressionTree {
    if ops == 0 {
        return if rng.gen_bool(0.15) {
            ExpressionTree::literal(["1", "2", "100"][rng.gen_range(0..3)]).unwrap()
        } else {
            ExpressionTree::slot(rng.gen_range(0..5))
        };
    }
    let left_ops = rng.gen_range(0..ops);
    let op = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div][rng.gen_range(0..4)];
    ExpressionTree::op(op, build_tree(rng, left_ops), build_tree(rng, ops - 1 - left_ops))
}

/// Leaf labels for the compound oracle: slot `i` gets atom `A{i % 3}`,
/// literals get `#text`.
pub fn leaf_label(leaf: &Leaf) -> Option<String> {
    Some(match leaf {
        Leaf::Slot(i) => format!("A{}", i % 3),
        Leaf::Literal(l) => format!("#{}", l.text),
    })
}

fn signature(tree: &ExpressionTree) -> String {
    match tree {
        ExpressionTree::Leaf(leaf) => leaf_label(leaf).unwrap(),
        ExpressionTree::Op { op, left, right } => format!("({} {} {})", operator_symbol(*op), signature(left), signature(right)),
    }
}

/// Every operator node's signature, as a sorted multiset.
pub fn brute_compounds(tree: &ExpressionTree) -> Vec<String> {
    fn walk(tree: &ExpressionTree, out: &mut Vec<String>) {
        if let ExpressionTree::Op { left, right, .. } = tree {
            out.push(signature(tree));
            walk(left, out);
            walk(right, out);
        }
    }
    let mut out = Vec::new();
    walk(tree, &mut out);
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Splits

/// Twelve items with two atoms and additive or multiplicative compounds.
pub fn twelve_item_pool(seed: u64) -> Vec<LabeledProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..12)
        .map(|i| {
            let op = if rng.gen_bool(0.4) { "*" } else { "+" };
            let atoms: Vec<String> = (0..2).map(|_| format!("A{}", rng.gen_range(0..2))).collect();
            let compounds = vec![format!("({op} {} {})", atoms[0], atoms[1])];
            LabeledProblem::new(&format!("p{i}"), atoms, compounds, 5)
        })
        .collect()
}

/// Best compound divergence over every partition with `test_size` test
/// items whose atom divergence stays within `atom_bound`.
pub fn exhaustive_best(pool: &[LabeledProblem], test_size: u32, atom_bound: f64) -> Option<f64> {
    let n = pool.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != test_size {
            continue;
        }
        let side = |test: bool| -> (Vec<String>, Vec<String>) {
            let members = (0..n).filter(|i| (mask & (1 << i) != 0) == test);
            let mut atoms = Vec::new();
            let mut compounds = Vec::new();
            for i in members {
                atoms.extend(pool[i].atoms.iter().cloned());
                compounds.extend(pool[i].compounds.iter().cloned());
            }
            (atoms, compounds)
        };
        let (train_atoms, train_compounds) = side(false);
        let (test_atoms, test_compounds) = side(true);
        if divergence_direct(&train_atoms, &test_atoms, 0.1) > atom_bound {
            continue;
        }
        let c = divergence_direct(&train_compounds, &test_compounds, 0.5);
        best = Some(best.map_or(c, |b| b.max(c)));
    }
    best
}

// ---------------------------------------------------------------------------
// Fragments

/// (problem id, sentence, spans as (start, end)) on each side.
pub type PairKey = (String, usize, Vec<(usize, usize)>, String, usize, Vec<(usize, usize)>);

fn oracle_tokens(problem: &MathWordProblem, sentence: usize) -> Vec<String> {
    let mut tokens: Vec<String> = problem.sentences[sentence]
        .tokens
        .iter()
        .map(|t| if t.is_quantity() { "NUM".to_string() } else { t.surface.to_lowercase() })
        .collect();
    if tokens.last().is_some_and(|t| [".", "?", "!"].contains(&t.as_str())) {
        tokens.pop();
    }
    tokens
}

fn oracle_span_sets(len: usize, max_span: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for a in 0..len {
        for b in a + 1..=len {
            if b - a > max_span {
                continue;
            }
            out.push(vec![(a, b)]);
            for c in b + 1..len {
                for d in c + 1..=len {
                    if d - c <= max_span {
                        out.push(vec![(a, b), (c, d)]);
                    }
                }
            }
        }
    }
    out
}

fn remove_spans(tokens: &[String], spans: &[(usize, usize)]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    for &(a, b) in spans {
        out.extend_from_slice(&tokens[i..a]);
        out.push("<hole>".to_string());
        i = b;
    }
    out.extend_from_slice(&tokens[i..]);
    out
}

/// Every ordered pair of fragments from two different sentence locations
/// whose remainders coincide and whose removed texts differ.
pub fn brute_fragment_pairs(pool: &Dataset, max_span: usize) -> BTreeSet<PairKey> {
    type Entry = (Vec<(usize, usize)>, Vec<Vec<String>>);
    let mut locations: Vec<(String, usize, HashMap<Vec<String>, Vec<Entry>>)> = Vec::new();
    for p in &pool.problems {
        for s in 0..p.sentences.len() {
            let tokens = oracle_tokens(p, s);
            let mut by_remainder: HashMap<Vec<String>, Vec<Entry>> = HashMap::new();
            for spans in oracle_span_sets(tokens.len(), max_span) {
                let text = spans.iter().map(|&(a, b)| tokens[a..b].to_vec()).collect();
                by_remainder.entry(remove_spans(&tokens, &spans)).or_default().push((spans, text));
            }
            locations.push((p.id.clone(), s, by_remainder));
        }
    }
    let mut out = BTreeSet::new();
    for (id1, s1, frags1) in &locations {
        for (id2, s2, frags2) in &locations {
            if id1 == id2 && s1 == s2 {
                continue;
            }
            for (remainder, entries1) in frags1 {
                let Some(entries2) = frags2.get(remainder) else { continue };
                for (f1, text1) in entries1 {
                    for (f2, text2) in entries2 {
                        if text1 != text2 {
                            out.insert((id1.clone(), *s1, f1.clone(), id2.clone(), *s2, f2.clone()));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Twelve items whose compounds are drawn from a small shared vocabulary,
/// so that every test side overlaps the train side and the optimum is
/// usually below 1.
pub fn mixed_twelve_item_pool(seed: u64) -> Vec<LabeledProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..12)
        .map(|i| {
            let atoms: Vec<String> = (0..2).map(|_| format!("A{}", rng.gen_range(0..3))).collect();
            let base = if rng.gen_bool(0.7) { "(+ A0 A1)" } else { "(* A0 A1)" };
            let mut compounds = vec![base.to_string()];
            if rng.gen_bool(0.6) {
                compounds.push(["(- A0 A2)", "(/ A1 A2)", "(+ A2 A2)"][rng.gen_range(0..3)].to_string());
            }
            LabeledProblem::new(&format!("p{i}"), atoms, compounds, 5 + i % 3)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Augmentation

/// Checks exact answer consistency for an operation 1 candidate: some slot
/// `s` of the donor makes the candidate's quantities equal to donor[..s] +
/// source narrative + donor[s+1..] and the values agree.
pub fn op1_consistent(c: &MathWordProblem, q: &MathWordProblem, q2: &MathWordProblem) -> bool {
    let values = |p: &MathWordProblem| p.bindings::<Rational>();
    let source_value = q.evaluate::<Rational>().unwrap();
    let narrative: Vec<Rational> = {
        let question_quantities = q.question().quantity_count();
        let all = values(q);
        all[..all.len() - question_quantities].to_vec()
    };
    let donor = values(q2);
    let composed = c.evaluate::<Rational>().unwrap();
    (0..donor.len()).any(|s| {
        let mut expected_quantities = donor[..s].to_vec();
        expected_quantities.extend(narrative.iter().cloned());
        expected_quantities.extend(donor[s + 1..].iter().cloned());
        let mut substituted = donor.clone();
        substituted[s] = source_value.clone();
        expected_quantities == values(c) && q2.tree.evaluate(&substituted).ok() == Some(composed.clone())
    })
}


// ---------------------------------------------------------------------------
// Rule table

/// The rule table as printed: id, seed sentences, seed template, then each
/// product's sentences and template. `×` is multiplication.
pub const PRINTED_TABLE: &[(u32, &str, &str, &[(&str, &str)])] = &[
    (1, "s1 s2 s3", "n1 × (1 - n2)", &[("s1 Δ s3", "n1 × n2"), ("s2 Δ", "1 - n1")]),
    (2, "s1 s2 s3 s4", "n1 × n2 / n3", &[("s1 s2 Δ", "n1 × n2"), ("Δ s3 s4", "n1 / n2")]),
    (3, "s1 s2 s3 s4", "n1 × n2 + n3", &[("s1 s2 Δ", "n1 × n2"), ("Δ s3 s4", "n1 + n2")]),
    (4, "s1 s2 s3 s4", "n1 × n2 × n3", &[("s1 s2 Δ", "n1 × n2"), ("Δ s3 s4", "n1 × n2")]),
    (5, "s1 s2 s3", "n1 / (1 - n2)", &[("s1 Δ s3", "n1 / n2"), ("s2 Δ", "1 - n1")]),
    (6, "s1 s2 s3 s4", "(n1 - n2) / n3", &[("s1 s2 Δ", "n1 - n2"), ("Δ s3 s4", "n1 / n2")]),
    (7, "s1 s2 s3 s4", "(n1 + n2) × n3", &[("s1 s2 Δ", "n1 + n2"), ("Δ s3 s4", "n1 × n2")]),
    (8, "s1 s2 s3 s4", "n1 / n2 × n3", &[("s1 s2 Δ", "n1 / n2"), ("Δ s3 s4", "n1 × n2")]),
    (9, "s1 s2 s3 s4", "n1 × n2 - n3", &[("s1 s2 Δ", "n1 × n2"), ("Δ s3 s4", "n1 - n2")]),
    (10, "s1 s2 s3", "n1 + n2", &[("s1 s2 Δ", "n1 - n2")]),
    (11, "s1 s2 s3", "n1 - n2", &[("s1 s2 Δ", "n1 + n2")]),
    (12, "s1 s2 s3", "n1 × n2", &[("s1 s2 Δ", "n1 / n2")]),
    (13, "s1 s2 s3", "n1 / n2", &[("s1 s2 Δ", "n1 × n2")]),
];


// ---------------------------------------------------------------------------
// Command line

pub fn compsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compsplit")).arg("--quiet").args(args).output().expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn json(p: PathBuf) -> Value {
    serde_json::from_str(&read(p)).unwrap()
}

pub fn without_timestamps(mut manifest: Value) -> Value {
    let object = manifest.as_object_mut().unwrap();
    assert!(object.remove("started_at").is_some());
    assert!(object.remove("finished_at").is_some());
    manifest
}

/// Runs a subcommand twice into separate directories and compares every
/// output file, ignoring only the manifest timestamps.
pub fn assert_deterministic(files: &[&str], run: impl Fn(&Path) -> Output) {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let _ = std::fs::remove_dir_all(&dir);
        let out = run(&dir);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let contents: Vec<String> = files.iter().map(|f| read(dir.join(f))).collect();
        runs.push((contents, without_timestamps(json(dir.join("manifest.json")))));
    }
    for (i, f) in files.iter().enumerate() {
        assert_eq!(runs[0].0[i], runs[1].0[i], "{f} differs");
    }
    assert_eq!(runs[0].1, runs[1].1);
}

