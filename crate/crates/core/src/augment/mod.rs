//! Iterative data augmentation by fragment substitution.
//!
//! Each iteration discovers alternative fragments over the current training
//! pool, derives candidates with two operations, scores them with a ranker,
//! keeps the most confident fraction and merges it back into the pool.
//!
//! * Operation 1: the narrative of a problem whose question holds `f1`
//!   replaces the sentence of another problem holding `f2`, and that
//!   sentence's quantity is replaced by the first problem's expression.
//! * Operation 2: every occurrence of `f1` in a non-question sentence is
//!   replaced by `f2`; the expression is unchanged.

mod fragments;
mod ranker;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Dataset, Language, LoadOptions, MathWordProblem, Sentence, Token};
use crate::exprtree::{ExpressionTree, Leaf};
use crate::num::{rational_to_f64, Rational};

pub use fragments::{discover_fragments, environment, Edit, FragmentIndex, Location, fragment_spans, masked_tokens, Fragment, FragmentPair, Span, HOLE};
pub use ranker::{ExecRanker, NgramRanker, Ranker, RankerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Op1,
    Op2,
}

/// A generated problem awaiting (or carrying) a confidence score.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub problem: MathWordProblem,
    pub operation: Operation,
    /// Ids of the problems the candidate was built from.
    pub sources: Vec<String>,
    /// The fragment substitution that produced it, `f1 => f2`.
    pub rule: String,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("fragment pair does not fit this operation")]
    WrongShape,
    #[error("both fragments come from the same problem")]
    SameProblem,
    #[error("ambiguous slot: sentence holds {0} quantities")]
    AmbiguousSlot(usize),
    #[error("slot sentence holds no quantity")]
    NoQuantity,
    #[error("slot quantity is not used by the expression")]
    UnusedSlot,
    #[error("source expression uses a quantity of its question sentence")]
    QuestionQuantity,
    #[error("fragment contains a quantity")]
    QuantityInFragment,
    #[error("substitution leaves the problem unchanged")]
    Unchanged,
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("answer mismatch: composed {composed}, substituted {substituted}")]
    AnswerMismatch { composed: String, substituted: String },
    #[error("rebuilt problem failed alignment: {0}")]
    Alignment(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("keep must lie in (0, 1] (got {0})")]
    Keep(f64),
    #[error("iterations must be at least 1")]
    Iterations,
}

fn candidate_id(text: &str, expression: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.update([0x1f]);
    hasher.update(expression.as_bytes());
    format!("aug-{}", &hex::encode(hasher.finalize())[..16])
}

/// Dedup key: lowercased text with collapsed whitespace, plus the template.
pub fn dedup_key(problem: &MathWordProblem) -> String {
    let text = problem.text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    format!("{text}\u{1f}{}", problem.template())
}

fn finish(
    sentences: Vec<Sentence>,
    expression: &str,
    language: Language,
    options: &LoadOptions,
) -> Result<MathWordProblem, Rejection> {
    let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
    let text = language.tokenizer().join_sentences(&texts);
    let id = candidate_id(&text, expression);
    MathWordProblem::from_sentences(&id, sentences, expression, None, language, options).map_err(|e| Rejection::Alignment(e.to_string()))
}

fn quantity_count(sentences: &[Sentence]) -> usize {
    sentences.iter().map(Sentence::quantity_count).sum()
}

/// Operation 1. `pair.f1` must lie in `q`'s question and `pair.f2` in a
/// non-question sentence of `q2` holding exactly one quantity.
pub fn apply_op1(q: &MathWordProblem, q2: &MathWordProblem, pair: &FragmentPair, options: &LoadOptions) -> Result<Candidate, Rejection> {
    if !pair.f1_in_question || pair.f2_in_question || pair.f1.problem_id != q.id || pair.f2.problem_id != q2.id {
        return Err(Rejection::WrongShape);
    }
    if q.id == q2.id {
        return Err(Rejection::SameProblem);
    }
    let i = pair.f2.sentence;
    match q2.sentences[i].quantity_count() {
        1 => {}
        0 => return Err(Rejection::NoQuantity),
        n => return Err(Rejection::AmbiguousSlot(n)),
    }
    let slot = quantity_count(&q2.sentences[..i]);
    if !q2.tree.slots().contains(&slot) {
        return Err(Rejection::UnusedSlot);
    }
    let narrative = &q.sentences[..q.sentences.len() - 1];
    let inserted = quantity_count(narrative);
    if q.tree.slots().iter().any(|&s| s >= inserted) {
        return Err(Rejection::QuestionQuantity);
    }

    let sub = q.tree.map_leaves(&mut |leaf| match leaf {
        Leaf::Slot(m) => ExpressionTree::slot(slot + m),
        Leaf::Literal(_) => ExpressionTree::Leaf(leaf.clone()),
    });
    let composed = q2.tree.map_leaves(&mut |leaf| match leaf {
        Leaf::Slot(j) if *j < slot => ExpressionTree::slot(*j),
        Leaf::Slot(j) if *j == slot => sub.clone(),
        Leaf::Slot(j) => ExpressionTree::slot(j - 1 + inserted),
        Leaf::Literal(_) => ExpressionTree::Leaf(leaf.clone()),
    });

    let mut sentences: Vec<Sentence> = q2.sentences[..i].to_vec();
    sentences.extend(narrative.iter().cloned());
    sentences.extend(q2.sentences[i + 1..].iter().cloned());
    let tokens: Vec<&Token> = sentences.iter().flat_map(|s| &s.tokens).filter(|t| t.is_quantity()).collect();
    let expression = MathWordProblem::render_expression(&composed, &tokens).ok_or(Rejection::WrongShape)?;
    let mut problem = finish(sentences, &expression, q2.language, options)?;

    let eval = |r: Result<Rational, _>| r.map_err(|e: crate::exprtree::EvalError| Rejection::Evaluation(e.to_string()));
    let value = eval(problem.evaluate::<Rational>())?;
    let mut bindings = q2.bindings::<Rational>();
    bindings[slot] = eval(q.evaluate::<Rational>())?;
    let expected = eval(q2.tree.evaluate(&bindings))?;
    if value != expected {
        return Err(Rejection::AnswerMismatch { composed: value.to_string(), substituted: expected.to_string() });
    }
    problem.answer = Some(rational_to_f64(&value));
    Ok(make_candidate(problem, Operation::Op1, vec![q.id.clone(), q2.id.clone()], pair))
}

fn make_candidate(mut problem: MathWordProblem, operation: Operation, sources: Vec<String>, pair: &FragmentPair) -> Candidate {
    let rule = format!("{} => {}", pair.f1.display(), pair.f2.display());
    problem.extra.insert("operation".into(), serde_json::to_value(operation).expect("serializable"));
    problem.extra.insert("sources".into(), Value::from(sources.clone()));
    Candidate { id: problem.id.clone(), problem, operation, sources, rule, confidence: None }
}

fn fragment_has_quantity(sentence: &Sentence, spans: &[Span]) -> bool {
    spans.iter().any(|s| sentence.tokens[s.start..s.end].iter().any(Token::is_quantity))
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Operation 2. Both fragments must sit outside question sentences and hold
/// no quantity. A single-span `f1` is replaced everywhere in its sentence;
/// a multi-span `f1` is replaced at its own spans.
pub fn apply_op2(q: &MathWordProblem, donor: &MathWordProblem, pair: &FragmentPair, options: &LoadOptions) -> Result<Candidate, Rejection> {
    if pair.f1_in_question || pair.f2_in_question || pair.f1.problem_id != q.id || pair.f2.problem_id != donor.id {
        return Err(Rejection::WrongShape);
    }
    if pair.f1.spans.len() != pair.f2.spans.len() {
        return Err(Rejection::WrongShape);
    }
    let source = &q.sentences[pair.f1.sentence];
    let donor_sentence = &donor.sentences[pair.f2.sentence];
    if fragment_has_quantity(source, &pair.f1.spans) || fragment_has_quantity(donor_sentence, &pair.f2.spans) {
        return Err(Rejection::QuantityInFragment);
    }
    let replacement: Vec<Vec<&str>> = pair
        .f2
        .spans
        .iter()
        .map(|s| donor_sentence.tokens[s.start..s.end].iter().map(|t| t.surface.as_str()).collect())
        .collect();

    let masked = masked_tokens(source, q.language);
    let targets: Vec<(Span, usize)> = if pair.f1.spans.len() == 1 {
        let needle = &pair.f1.text[0];
        let mut found = Vec::new();
        let mut i = 0;
        while i + needle.len() <= masked.len() {
            if masked[i..i + needle.len()] == needle[..] {
                found.push((Span { start: i, end: i + needle.len() }, 0));
                i += needle.len();
            } else {
                i += 1;
            }
        }
        found
    } else {
        pair.f1.spans.iter().copied().zip(0..).collect()
    };
    if targets.is_empty() {
        return Err(Rejection::WrongShape);
    }

    let mut surfaces: Vec<String> = Vec::new();
    let mut cursor = 0;
    for (span, k) in &targets {
        surfaces.extend(source.tokens[cursor..span.start].iter().map(|t| t.surface.clone()));
        let mut words: Vec<String> = replacement[*k].iter().map(|s| s.to_string()).collect();
        let was_capital = source.tokens[span.start].surface.chars().next().is_some_and(char::is_uppercase);
        if span.start == 0 && was_capital && q.language == Language::En {
            if let Some(first) = words.first_mut() {
                *first = capitalize(first);
            }
        }
        surfaces.extend(words);
        cursor = span.end;
    }
    surfaces.extend(source.tokens[cursor..].iter().map(|t| t.surface.clone()));
    let refs: Vec<&str> = surfaces.iter().map(String::as_str).collect();
    let new_text = q.language.tokenizer().join(&refs);
    if new_text == source.text {
        return Err(Rejection::Unchanged);
    }

    let mut sentences = q.sentences.clone();
    sentences[pair.f1.sentence] = Sentence::from_text(&new_text, q.language);
    let mut problem = finish(sentences, &q.expression, q.language, options)?;
    problem.answer = q.answer;
    Ok(make_candidate(problem, Operation::Op2, vec![q.id.clone(), donor.id.clone()], pair))
}

/// Result of ranking one batch of candidates.
#[derive(Debug, Clone, Default)]
pub struct RankOutcome {
    /// Most confident candidates, best first.
    pub kept: Vec<Candidate>,
    /// Scored but below the cut, best first.
    pub discarded: Vec<Candidate>,
    /// Candidates the ranker failed on, with the reason.
    pub failures: Vec<(Candidate, RankerError)>,
}

/// Scores every candidate with the product of its token probabilities,
/// sorts by confidence (descending, ties by id) and keeps the top
/// `ceil(keep * N)` of the `N` scored candidates.
pub fn rank_and_filter(candidates: Vec<Candidate>, ranker: &mut dyn Ranker, keep: f64) -> Result<RankOutcome, AugmentError> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(AugmentError::Keep(keep));
    }
    let results = ranker.score_batch(&candidates);
    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for (mut candidate, result) in candidates.into_iter().zip(results) {
        let checked = result.and_then(|probs| match probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            Some(bad) => Err(RankerError::OutOfRange { id: candidate.id.clone(), value: *bad }),
            None => Ok(probs.iter().product::<f64>()),
        });
        match checked {
            Ok(confidence) => {
                candidate.confidence = Some(confidence);
                scored.push(candidate);
            }
            Err(e) => {
                log::warn!("dropping candidate {}: {e}", candidate.id);
                failures.push((candidate, e));
            }
        }
    }
    scored.sort_by(|a, b| {
        let (ca, cb) = (a.confidence.unwrap_or(0.0), b.confidence.unwrap_or(0.0));
        cb.total_cmp(&ca).then_with(|| a.id.cmp(&b.id))
    });
    let n_keep = ((keep * scored.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let discarded = scored.split_off(n_keep.min(scored.len()));
    Ok(RankOutcome { kept: scored, discarded, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub iterations: usize,
    pub keep: f64,
    pub max_span: usize,
    pub seed: u64,
    /// Candidates ranked per iteration. When set, edits are tried in a
    /// seeded random order until this many candidates exist.
    pub max_candidates: Option<usize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { iterations: 7, keep: 0.2, max_span: 4, seed: 7, max_candidates: Some(2000) }
    }
}

/// One provenance line per ranked (or failed) candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub id: String,
    pub operation: Operation,
    pub sources: Vec<String>,
    pub rule: String,
    pub confidence: Option<f64>,
    pub kept: bool,
    pub iteration: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub pairs: usize,
    pub generated: usize,
    pub rejected: usize,
    pub duplicates: usize,
    pub ranked: usize,
    pub kept: usize,
    pub failures: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone)]
pub struct AugmentOutput {
    pub dataset: Dataset,
    pub provenance: Vec<ProvenanceRecord>,
    pub stats: Vec<IterationStats>,
}

/// Candidates derivable from the current pool, deduplicated against the
/// pool and among themselves. With `fresh`, only edits involving those
/// problem indices are tried.
///
/// Without a `limit` every edit is tried in order. With one, edits are tried
/// in an order shuffled by `seed` until `limit` candidates exist. Either
/// way the result is sorted by id.
pub fn generate_candidates(
    pool: &Dataset,
    max_span: usize,
    fresh: Option<&HashSet<usize>>,
    limit: Option<usize>,
    seed: u64,
    options: &LoadOptions,
    stats: &mut IterationStats,
) -> Vec<Candidate> {
    let index = FragmentIndex::build(pool, max_span);
    let mut edits = index.edits(fresh);
    stats.pairs = edits.len();
    if limit.is_some() {
        edits.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut seen: HashSet<String> = pool.problems.iter().map(dedup_key).collect();
    let mut out = Vec::new();
    for edit in &edits {
        if limit.is_some_and(|n| out.len() >= n) {
            break;
        }
        let pair = index.pair(edit);
        let (a, b) = (&pool.problems[edit.f1.0], &pool.problems[edit.f2.0]);
        let result = if edit.question { apply_op1(a, b, &pair, options) } else { apply_op2(a, b, &pair, options) };
        match result {
            Ok(candidate) => {
                stats.generated += 1;
                if seen.insert(dedup_key(&candidate.problem)) {
                    out.push(candidate);
                } else {
                    stats.duplicates += 1;
                }
            }
            Err(reason) => {
                stats.rejected += 1;
                log::trace!("{} / {}: {reason}", a.id, b.id);
            }
        }
    }
    out.sort_by(|x, y| x.id.cmp(&y.id));
    out
}

/// Runs `config.iterations` rounds of generate, rank, keep and merge. Only
/// `train` is read; the returned pool starts with it unchanged.
///
/// The first round tries every edit of the pool. Later rounds only try the
/// edits that involve a problem merged in the previous round.
pub fn augment_loop(train: &Dataset, ranker: &mut dyn Ranker, config: &AugmentConfig, options: &LoadOptions) -> Result<AugmentOutput, AugmentError> {
    if config.iterations == 0 {
        return Err(AugmentError::Iterations);
    }
    if !(config.keep > 0.0 && config.keep <= 1.0) {
        return Err(AugmentError::Keep(config.keep));
    }
    let mut pool = train.clone();
    let mut fresh: Option<HashSet<usize>> = None;
    let mut provenance = Vec::new();
    let mut all_stats = Vec::new();
    for iteration in 1..=config.iterations {
        let mut stats = IterationStats { iteration, ..Default::default() };
        let seed = config.seed.wrapping_add(iteration as u64);
        let candidates = generate_candidates(&pool, config.max_span, fresh.as_ref(), config.max_candidates, seed, options, &mut stats);
        stats.ranked = candidates.len();
        if candidates.is_empty() {
            stats.pool_size = pool.len();
            all_stats.push(stats);
            log::info!("iteration {iteration}: no candidates, stopping");
            break;
        }
        let outcome = rank_and_filter(candidates, ranker, config.keep)?;
        let record = |c: &Candidate, kept: bool| ProvenanceRecord {
            id: c.id.clone(),
            operation: c.operation,
            sources: c.sources.clone(),
            rule: c.rule.clone(),
            confidence: c.confidence,
            kept,
            iteration,
        };
        provenance.extend(outcome.kept.iter().map(|c| record(c, true)));
        provenance.extend(outcome.discarded.iter().map(|c| record(c, false)));
        provenance.extend(outcome.failures.iter().map(|(c, _)| record(c, false)));
        stats.kept = outcome.kept.len();
        stats.failures = outcome.failures.len();
        let mut problems = std::mem::take(&mut pool.problems);
        let before = problems.len();
        problems.extend(outcome.kept.into_iter().map(|c| c.problem));
        fresh = Some((before..problems.len()).collect());
        pool = Dataset::new(problems, train.language).expect("candidate ids are unique content hashes");
        stats.pool_size = pool.len();
        log::info!(
            "iteration {iteration}: {} pairs, {} candidates, kept {}, pool {}",
            stats.pairs,
            stats.ranked,
            stats.kept,
            stats.pool_size
        );
        all_stats.push(stats);
    }
    Ok(AugmentOutput { dataset: pool, provenance, stats: all_stats })
}
