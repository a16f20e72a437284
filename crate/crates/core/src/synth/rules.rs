//! The decomposition/reformulation rule table and rule matching.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::MathWordProblem;
use crate::exprtree::canonical_template;

use super::SynthError;

/// Placeholder name used in product sentence patterns.
pub const DELTA: &str = "Δ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Decomposition,
    Reformulation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    /// Seed sentence names (`s1`, `s2`, ...) and one `Δ`.
    pub sentences_with_delta: Vec<String>,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: u32,
    pub kind: RuleKind,
    /// Seed sentence names, `s1..sk`.
    pub seed_sentences: Vec<String>,
    pub seed_template: String,
    pub products: Vec<Product>,
}

/// One position of a product's sentence pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternSlot {
    /// Seed sentence, 0-based.
    Seed(usize),
    Delta,
}

impl Product {
    pub fn pattern(&self) -> Vec<PatternSlot> {
        self.sentences_with_delta
            .iter()
            .map(|s| if s == DELTA { PatternSlot::Delta } else { PatternSlot::Seed(sentence_index(s).expect("validated pattern")) })
            .collect()
    }

    pub fn delta_position(&self) -> usize {
        self.sentences_with_delta.iter().position(|s| s == DELTA).expect("validated pattern")
    }
}

fn sentence_index(name: &str) -> Option<usize> {
    let n: usize = name.strip_prefix('s')?.parse().ok()?;
    n.checked_sub(1)
}

impl Rule {
    fn validate(&self) -> Result<(), String> {
        let expected_products = match self.kind {
            RuleKind::Decomposition => 2,
            RuleKind::Reformulation => 1,
        };
        if self.products.len() != expected_products {
            return Err(format!("{:?} rules need {expected_products} products, found {}", self.kind, self.products.len()));
        }
        for (i, name) in self.seed_sentences.iter().enumerate() {
            if sentence_index(name) != Some(i) {
                return Err(format!("seed sentence {} should be s{}", name, i + 1));
            }
        }
        canonical_template(&self.seed_template).map_err(|e| format!("seed template: {e}"))?;
        for product in &self.products {
            canonical_template(&product.template).map_err(|e| format!("product template: {e}"))?;
            let deltas = product.sentences_with_delta.iter().filter(|s| *s == DELTA).count();
            if deltas != 1 {
                return Err(format!("product pattern needs exactly one {DELTA}, found {deltas}"));
            }
            for name in product.sentences_with_delta.iter().filter(|s| *s != DELTA) {
                match sentence_index(name) {
                    Some(i) if i < self.seed_sentences.len() => {}
                    _ => return Err(format!("product refers to unknown sentence {name}")),
                }
            }
        }
        Ok(())
    }

    /// Seed template in canonical spacing.
    pub fn canonical_seed_template(&self) -> String {
        canonical_template(&self.seed_template).expect("validated template")
    }
}

pub fn parse_rules(json: &str) -> Result<Vec<Rule>, SynthError> {
    let rules: Vec<Rule> = serde_json::from_str(json).map_err(|e| SynthError::RuleTable(e.to_string()))?;
    for rule in &rules {
        rule.validate().map_err(|m| SynthError::RuleTable(format!("rule {}: {m}", rule.id)))?;
    }
    Ok(rules)
}

pub fn load_rules(path: &Path) -> Result<Vec<Rule>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_rules(&text)
}

/// The bundled 13-rule table.
pub fn bundled_rules() -> Vec<Rule> {
    parse_rules(include_str!("../../resources/rules.json")).expect("bundled rule table is valid")
}

/// Rules whose seed pattern has the problem's sentence count and whose seed
/// template equals the problem's template.
pub fn match_rules<'r>(problem: &MathWordProblem, table: &'r [Rule]) -> Vec<&'r Rule> {
    let template = problem.template();
    table
        .iter()
        .filter(|r| r.seed_sentences.len() == problem.sentences.len() && r.canonical_seed_template() == template)
        .collect()
}
