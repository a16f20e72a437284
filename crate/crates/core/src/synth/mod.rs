//! Rule-based synthesis of structural and lexical generalization data.
//!
//! Seeds matching a decomposition rule go to test while their two simpler
//! products go to train. Seeds matching a reformulation rule go to train
//! while the reformulated problem goes to test, provided train holds no
//! problem with the same template sharing constituents with it.

mod keywords;
mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{Dataset, LoadOptions, MathWordProblem, Sentence, Token};
use crate::exprtree::{self, canonical_template};
use crate::num::{rational_to_f64, Rational};

pub use keywords::KeywordExtractor;
pub use rules::{bundled_rules, load_rules, match_rules, parse_rules, PatternSlot, Product, Rule, RuleKind, DELTA};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid rule table: {0}")]
    RuleTable(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("tagging resource missing: {0}")]
    MissingResource(String),
}

/// Why a seed/rule combination produced nothing.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Abandonment {
    #[error("no corpus problem has template {template}")]
    TemplateAbsent { template: String },
    #[error("no corpus problem with template {template} fits the sentence pattern")]
    NoUsableDonor { template: String },
    #[error("best donor for template {template} shares no keyword with the seed")]
    ZeroSimilarity { template: String },
    #[error("train already holds a problem with template {template} sharing keywords (with {conflict})")]
    SeenCombination { template: String, conflict: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generalization {
    Structural,
    Lexical,
}

impl Generalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Generalization::Structural => "structural",
            Generalization::Lexical => "lexical",
        }
    }
}

/// Corpus problems grouped by expression template, in corpus order.
#[derive(Debug, Clone)]
pub struct IndexedCorpus {
    problems: Vec<MathWordProblem>,
    index: BTreeMap<String, Vec<usize>>,
}

impl IndexedCorpus {
    pub fn new(problems: Vec<MathWordProblem>) -> Self {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, p) in problems.iter().enumerate() {
            index.entry(p.template()).or_default().push(i);
        }
        IndexedCorpus { problems, index }
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self::new(dataset.problems.clone())
    }

    /// Problems whose template equals `template` (any spacing).
    pub fn get(&self, template: &str) -> Vec<&MathWordProblem> {
        let key = canonical_template(template).unwrap_or_else(|_| template.to_string());
        self.index.get(&key).map(|ids| ids.iter().map(|&i| &self.problems[i]).collect()).unwrap_or_default()
    }

    pub fn templates(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

/// A synthetic problem with the corpus problem that filled its placeholder.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub problem: MathWordProblem,
    pub donor_id: String,
    pub similarity: usize,
}

/// Shared context for decomposition and reformulation.
pub struct Synthesizer<'a> {
    pub corpus: &'a IndexedCorpus,
    pub extractor: &'a KeywordExtractor,
    pub options: &'a LoadOptions,
}

impl Synthesizer<'_> {
    /// Fills the product pattern with seed sentences and one donor sentence.
    ///
    /// A placeholder at the last position takes the donor's question; any
    /// other position takes the donor sentence at the same index, which must
    /// not be the donor's question. Quantities are bound to the product
    /// template in textual order.
    pub fn instantiate(&self, id: &str, seed: &MathWordProblem, product: &Product, donor: &MathWordProblem) -> Option<MathWordProblem> {
        let pattern = product.pattern();
        let delta = product.delta_position();
        let donor_sentence = if delta + 1 == pattern.len() {
            donor.question()
        } else if delta + 1 < donor.sentences.len() {
            &donor.sentences[delta]
        } else {
            return None;
        };
        let mut sentences: Vec<Sentence> = Vec::with_capacity(pattern.len());
        for slot in &pattern {
            match slot {
                PatternSlot::Seed(i) => sentences.push(seed.sentences.get(*i)?.clone()),
                PatternSlot::Delta => sentences.push(donor_sentence.clone()),
            }
        }
        let template = exprtree::parse(&product.template).ok()?;
        let quantities: Vec<&Token> = sentences.iter().flat_map(|s| &s.tokens).filter(|t| t.is_quantity()).collect();
        let slots = template.slots();
        if quantities.len() != slots.len() || slots.iter().enumerate().any(|(i, s)| i != *s) {
            return None;
        }
        let expression = MathWordProblem::render_expression(&template, &quantities)?;
        let mut problem = MathWordProblem::from_sentences(id, sentences, &expression, None, seed.language, self.options).ok()?;
        if problem.template() != template.to_string() {
            return None;
        }
        let value: Rational = problem.evaluate().ok()?;
        problem.answer = Some(rational_to_f64(&value));
        Some(problem)
    }

    /// Instantiates one product from the most similar usable donor (ties keep
    /// corpus order).
    fn best_product(&self, id: &str, seed: &MathWordProblem, product: &Product) -> Result<Synthesized, Abandonment> {
        let template = canonical_template(&product.template).unwrap_or_else(|_| product.template.clone());
        let donors = self.corpus.get(&template);
        if donors.is_empty() {
            return Err(Abandonment::TemplateAbsent { template });
        }
        let mut best: Option<Synthesized> = None;
        for donor in donors.into_iter().filter(|d| d.id != seed.id) {
            let Some(problem) = self.instantiate(id, seed, product, donor) else { continue };
            let similarity = self.extractor.similarity(seed, donor);
            if best.as_ref().is_none_or(|b| similarity > b.similarity) {
                best = Some(Synthesized { problem, donor_id: donor.id.clone(), similarity });
            }
        }
        match best {
            None => Err(Abandonment::NoUsableDonor { template }),
            Some(b) if b.similarity == 0 => Err(Abandonment::ZeroSimilarity { template }),
            Some(b) => Ok(b),
        }
    }

    pub fn decompose(&self, seed: &MathWordProblem, rule: &Rule) -> Result<(Synthesized, Synthesized), Abandonment> {
        debug_assert_eq!(rule.kind, RuleKind::Decomposition);
        let first = self.best_product(&synthetic_id(&seed.id, rule.id, 1), seed, &rule.products[0])?;
        let second = self.best_product(&synthetic_id(&seed.id, rule.id, 2), seed, &rule.products[1])?;
        Ok((tag_synthetic(first, rule, seed), tag_synthetic(second, rule, seed)))
    }

    /// Builds the reformulated problem and accepts it only if no train
    /// problem with the same template shares a keyword with it.
    pub fn reformulate(&self, seed: &MathWordProblem, rule: &Rule, train_so_far: &[MathWordProblem]) -> Result<Synthesized, Abandonment> {
        debug_assert_eq!(rule.kind, RuleKind::Reformulation);
        let product = self.best_product(&synthetic_id(&seed.id, rule.id, 1), seed, &rule.products[0])?;
        let template = product.problem.template();
        let conflict = train_so_far
            .iter()
            .find(|t| t.template() == template && self.extractor.similarity(t, &product.problem) > 0);
        if let Some(c) = conflict {
            return Err(Abandonment::SeenCombination { template, conflict: c.id.clone() });
        }
        Ok(tag_synthetic(product, rule, seed))
    }
}

fn synthetic_id(seed_id: &str, rule: u32, index: usize) -> String {
    format!("{seed_id}~r{rule}.{index}")
}

fn tag_synthetic(mut s: Synthesized, rule: &Rule, seed: &MathWordProblem) -> Synthesized {
    let extra = &mut s.problem.extra;
    extra.insert("rule".into(), Value::from(rule.id));
    extra.insert("seed_id".into(), Value::from(seed.id.clone()));
    extra.insert("donor_id".into(), Value::from(s.donor_id.clone()));
    s
}

fn tag_generalization(mut problem: MathWordProblem, g: Generalization) -> MathWordProblem {
    problem.extra.insert("generalization".into(), Value::from(g.as_str()));
    problem
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accepted,
    Abandoned,
    #[serde(rename = "no_rule")]
    NoRule,
}

/// One synthetic problem in the provenance log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub id: String,
    pub donor_id: String,
    pub template: String,
    pub split: String,
}

/// One provenance log line: a seed with one rule attempt (or no rule).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub seed_id: String,
    pub rule: Option<u32>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abandonment: Option<Abandonment>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub synthetic: Vec<SyntheticRecord>,
}

#[derive(Debug, Clone)]
pub struct SdOutput {
    pub train: Dataset,
    pub test: Dataset,
    pub log: Vec<ProvenanceEntry>,
}

fn record(s: &Synthesized, split: &str) -> SyntheticRecord {
    SyntheticRecord {
        id: s.problem.id.clone(),
        donor_id: s.donor_id.clone(),
        template: s.problem.template(),
        split: split.to_string(),
    }
}

/// Walks the pool in order and applies the first rule that succeeds for
/// each seed. Test problems carry a `generalization` tag.
pub fn build_sd(pool: &Dataset, table: &[Rule], synth: &Synthesizer<'_>) -> SdOutput {
    let mut train: Vec<MathWordProblem> = Vec::new();
    let mut test: Vec<MathWordProblem> = Vec::new();
    let mut log = Vec::new();
    for seed in &pool.problems {
        let rules = match_rules(seed, table);
        if rules.is_empty() {
            log.push(ProvenanceEntry { seed_id: seed.id.clone(), rule: None, outcome: Outcome::NoRule, abandonment: None, synthetic: vec![] });
            continue;
        }
        for rule in rules {
            let result = match rule.kind {
                RuleKind::Decomposition => synth.decompose(seed, rule).map(|(a, b)| {
                    let synthetic = vec![record(&a, "train"), record(&b, "train")];
                    test.push(tag_generalization(seed.clone(), Generalization::Structural));
                    train.push(a.problem);
                    train.push(b.problem);
                    synthetic
                }),
                RuleKind::Reformulation => synth.reformulate(seed, rule, &train).map(|q| {
                    let synthetic = vec![record(&q, "test")];
                    train.push(seed.clone());
                    test.push(tag_generalization(q.problem, Generalization::Lexical));
                    synthetic
                }),
            };
            match result {
                Ok(synthetic) => {
                    log.push(ProvenanceEntry { seed_id: seed.id.clone(), rule: Some(rule.id), outcome: Outcome::Accepted, abandonment: None, synthetic });
                    break;
                }
                Err(reason) => {
                    log::debug!("seed {} rule {}: {reason}", seed.id, rule.id);
                    log.push(ProvenanceEntry {
                        seed_id: seed.id.clone(),
                        rule: Some(rule.id),
                        outcome: Outcome::Abandoned,
                        abandonment: Some(reason),
                        synthetic: vec![],
                    });
                }
            }
        }
    }
    let language = pool.language;
    SdOutput {
        train: dedup_dataset(train, language),
        test: dedup_dataset(test, language),
        log,
    }
}

/// Keeps the first problem per id (a seed can appear once per side).
fn dedup_dataset(problems: Vec<MathWordProblem>, language: crate::corpus::Language) -> Dataset {
    let mut seen = std::collections::HashSet::new();
    let problems = problems.into_iter().filter(|p| seen.insert(p.id.clone())).collect();
    Dataset::new(problems, language).expect("ids are unique after dedup")
}
