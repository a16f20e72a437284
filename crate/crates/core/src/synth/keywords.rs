//! Keyword extraction (nouns, verbs, measure units) and similarity scoring.

use std::collections::BTreeSet;
use std::path::Path;

use crate::corpus::{Language, Lexicon, MathWordProblem, TokenKind};

use super::SynthError;

/// Lexicon-driven keyword tagger.
///
/// English words missing from the lexicon are treated as nouns when they
/// have at least three letters, and lemmatized by stripping plural endings.
/// Chinese words missing from the lexicon are ignored.
#[derive(Debug, Clone)]
pub struct KeywordExtractor {
    lexicon: Lexicon,
    language: Language,
}

const CONTENT_TAGS: [&str; 3] = ["n", "v", "u"];

impl KeywordExtractor {
    pub fn bundled(language: Language) -> Self {
        let lexicon = match language {
            Language::En => Lexicon::bundled_en().clone(),
            Language::Zh => Lexicon::bundled_zh().clone(),
        };
        KeywordExtractor { lexicon, language }
    }

    /// Loads a tab-separated lexicon (`word, tag[, lemma]`).
    pub fn from_path(path: &Path, language: Language) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::MissingResource(format!("{}: {e}", path.display())))?;
        let lexicon = Lexicon::from_tsv(&text);
        if lexicon.is_empty() {
            return Err(SynthError::MissingResource(format!("{}: no lexicon entries", path.display())));
        }
        Ok(KeywordExtractor { lexicon, language })
    }

    pub fn language(&self) -> Language {
        self.language
    }

    fn keyword(&self, surface: &str) -> Option<String> {
        match self.language {
            Language::En => {
                if !surface.chars().all(|c| c.is_ascii_alphabetic() || c == '\'') {
                    return None;
                }
                let word = surface.to_lowercase();
                let word = word.strip_suffix("'s").unwrap_or(&word);
                match self.lexicon.tag(word) {
                    Some(tag) if CONTENT_TAGS.contains(&tag) => self.lexicon.lemma(word).map(str::to_string),
                    Some(_) => None,
                    None if word.chars().count() >= 3 => Some(strip_plural(word)),
                    None => None,
                }
            }
            Language::Zh => match self.lexicon.tag(surface) {
                Some(tag) if CONTENT_TAGS.contains(&tag) => self.lexicon.lemma(surface).map(str::to_string),
                _ => None,
            },
        }
    }

    pub fn keywords(&self, problem: &MathWordProblem) -> BTreeSet<String> {
        problem
            .sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.kind == TokenKind::Word)
            .filter_map(|t| self.keyword(&t.surface))
            .collect()
    }

    /// Number of shared keywords.
    pub fn similarity(&self, a: &MathWordProblem, b: &MathWordProblem) -> usize {
        let ka = self.keywords(a);
        self.keywords(b).iter().filter(|k| ka.contains(*k)).count()
    }
}

fn strip_plural(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["ches", "shes", "xes", "sses"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    match word.strip_suffix('s') {
        Some(stem) if !stem.ends_with('s') && !stem.ends_with('u') => stem.to_string(),
        _ => word.to_string(),
    }
}
