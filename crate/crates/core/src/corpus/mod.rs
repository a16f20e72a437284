//! Math word problem data model and JSONL corpus I/O.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```json
//! {"id": "a", "text": "Tom has 12 apples. ...", "sentences": ["..."], "expression": "12 + 3", "answer": 15}
//! ```
//!
//! `sentences` is optional and overrides automatic segmentation. Fields not
//! listed here are kept verbatim in [`MathWordProblem::extra`].

mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::exprtree::{self, EvalError, ExpressionTree, Leaf, Operator, ParseError};
use crate::num::{Rational, Scalar};

pub use tokenize::{quantity_value, ChineseTokenizer, EnglishTokenizer, Lexicon, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Zh,
    En,
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zh" => Ok(Language::Zh),
            "en" => Ok(Language::En),
            other => Err(format!("unknown language {other:?} (expected zh or en)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    /// Present iff `kind` is `Quantity`.
    pub value: Option<Rational>,
    pub position: usize,
}

impl Token {
    pub fn is_quantity(&self) -> bool {
        self.kind == TokenKind::Quantity
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// Source text of the sentence.
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn from_text(text: &str, language: Language) -> Self {
        Sentence { text: text.to_string(), tokens: language.tokenizer().tokenize(text) }
    }

    /// Builds a sentence from token surfaces, re-tokenizing the rendered text.
    pub fn from_surfaces(surfaces: &[&str], language: Language) -> Self {
        let text = language.tokenizer().join(surfaces);
        Sentence::from_text(&text, language)
    }

    pub fn quantity_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_quantity()).count()
    }
}

/// Location of a quantity token inside a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuantityLocation {
    pub sentence: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MathWordProblem {
    pub id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    pub expression: String,
    pub answer: Option<f64>,
    /// Expression whose slots index [`MathWordProblem::quantities`].
    pub tree: ExpressionTree,
    pub language: Language,
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("problem has no sentences")]
    Empty,
    #[error("invalid expression: {0}")]
    Expression(#[from] ParseError),
    #[error("unaligned quantity {0}")]
    Unaligned(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: malformed JSON: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line} (id {id}): {source}")]
    Problem { line: usize, id: String, source: ProblemError },
    #[error("duplicate problem id {0}")]
    DuplicateId(String),
}

/// Alignment settings.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Literals allowed in expressions without a textual occurrence.
    pub constants: Vec<Rational>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        let constants = ["1", "2", "3.14", "100"]
            .iter()
            .map(|c| crate::num::parse_decimal(c).expect("valid constant"))
            .collect();
        LoadOptions { constants }
    }
}

/// One corpus line as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<String>>,
    pub expression: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl MathWordProblem {
    /// Builds and aligns a problem from pre-segmented sentences.
    pub fn from_sentences(
        id: &str,
        sentences: Vec<Sentence>,
        expression: &str,
        answer: Option<f64>,
        language: Language,
        options: &LoadOptions,
    ) -> Result<Self, ProblemError> {
        let sentences: Vec<Sentence> = sentences.into_iter().filter(|s| !s.tokens.is_empty()).collect();
        if sentences.is_empty() {
            return Err(ProblemError::Empty);
        }
        let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        let text = language.tokenizer().join_sentences(&texts);
        let parsed = exprtree::parse(expression)?;
        let quantities: Vec<&Token> = sentences.iter().flat_map(|s| s.tokens.iter()).filter(|t| t.is_quantity()).collect();
        let tree = align(&parsed, &quantities, options)?;
        Ok(MathWordProblem {
            id: id.to_string(),
            text,
            sentences,
            expression: expression.to_string(),
            answer,
            tree,
            language,
            extra: BTreeMap::new(),
        })
    }

    pub fn from_record(record: &RawRecord, language: Language, options: &LoadOptions) -> Result<Self, ProblemError> {
        let tokenizer = language.tokenizer();
        let sentence_texts = match (&record.sentences, &record.text) {
            (Some(s), _) => s.clone(),
            (None, Some(text)) => tokenizer.split_sentences(text),
            (None, None) => Vec::new(),
        };
        let sentences = sentence_texts.iter().map(|s| Sentence::from_text(s, language)).collect();
        let mut problem = Self::from_sentences(&record.id, sentences, &record.expression, record.answer, language, options)?;
        if let Some(text) = &record.text {
            problem.text = text.clone();
        }
        problem.extra = record.extra.clone();
        Ok(problem)
    }

    pub fn to_record(&self) -> RawRecord {
        let texts: Vec<String> = self.sentences.iter().map(|s| s.text.clone()).collect();
        let auto = self.language.tokenizer().split_sentences(&self.text);
        RawRecord {
            id: self.id.clone(),
            text: Some(self.text.clone()),
            sentences: if auto == texts { None } else { Some(texts) },
            expression: self.expression.clone(),
            answer: self.answer,
            extra: self.extra.clone(),
        }
    }

    /// Quantity tokens in textual order; slot `i` of [`Self::tree`] is entry `i`.
    pub fn quantities(&self) -> Vec<(QuantityLocation, &Token)> {
        self.sentences
            .iter()
            .enumerate()
            .flat_map(|(si, s)| {
                s.tokens
                    .iter()
                    .filter(|t| t.is_quantity())
                    .map(move |t| (QuantityLocation { sentence: si, position: t.position }, t))
            })
            .collect()
    }

    pub fn bindings<T: Scalar>(&self) -> Vec<T> {
        self.quantities()
            .iter()
            .map(|(_, t)| T::from_rational(t.value.as_ref().expect("quantity token has a value")))
            .collect()
    }

    pub fn evaluate<T: Scalar>(&self) -> Result<T, EvalError> {
        self.tree.evaluate(&self.bindings::<T>())
    }

    /// Expression template with quantities replaced by `n1, n2, ...` in
    /// order of first textual occurrence; constants keep their literal.
    pub fn template(&self) -> String {
        self.tree.to_string()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn question(&self) -> &Sentence {
        self.sentences.last().expect("problems have at least one sentence")
    }

    /// Expression text with slots rendered as the problem's own quantities.
    pub fn render_expression(tree: &ExpressionTree, quantities: &[&Token]) -> Option<String> {
        let mut ok = true;
        let rendered = tree.map_leaves(&mut |leaf| match leaf {
            Leaf::Slot(i) => match quantities.get(*i) {
                Some(tok) => quantity_expression(tok),
                None => {
                    ok = false;
                    ExpressionTree::Leaf(leaf.clone())
                }
            },
            Leaf::Literal(_) => ExpressionTree::Leaf(leaf.clone()),
        });
        ok.then(|| rendered.to_string())
    }
}

/// Expression fragment for a quantity token: fractions become `(a / b)`,
/// comma grouping is dropped.
fn quantity_expression(token: &Token) -> ExpressionTree {
    let cleaned = token.surface.replace(',', "");
    if let Some((n, d)) = cleaned.split_once('/') {
        if let (Some(n), Some(d)) = (ExpressionTree::literal(n), ExpressionTree::literal(d)) {
            return ExpressionTree::op(Operator::Div, n, d);
        }
    }
    ExpressionTree::literal(&cleaned).expect("quantity surfaces are literals")
}

/// Binds expression literals to textual quantities, left to right.
///
/// Each literal binds to the earliest unbound textual occurrence of equal
/// value. Failing that, a declared constant stays a literal; failing that, a
/// literal repeating an already bound quantity reuses its slot.
fn align(parsed: &ExpressionTree, quantities: &[&Token], options: &LoadOptions) -> Result<ExpressionTree, ProblemError> {
    let mut bound = vec![false; quantities.len()];
    align_node(parsed, quantities, options, &mut bound)
}

fn align_node(
    node: &ExpressionTree,
    quantities: &[&Token],
    options: &LoadOptions,
    bound: &mut [bool],
) -> Result<ExpressionTree, ProblemError> {
    match node {
        ExpressionTree::Op { op, left, right } => {
            // A fraction written as (a/b) in the expression may be a single
            // textual quantity such as "3/4".
            if *op == Operator::Div {
                if let (ExpressionTree::Leaf(Leaf::Literal(a)), ExpressionTree::Leaf(Leaf::Literal(b))) = (&**left, &**right) {
                    let surface = format!("{}/{}", a.text, b.text);
                    let hit = quantities
                        .iter()
                        .enumerate()
                        .find(|(i, t)| !bound[*i] && t.surface.replace(',', "") == surface);
                    if let Some((i, _)) = hit {
                        bound[i] = true;
                        return Ok(ExpressionTree::slot(i));
                    }
                }
            }
            let l = align_node(left, quantities, options, bound)?;
            let r = align_node(right, quantities, options, bound)?;
            Ok(ExpressionTree::op(*op, l, r))
        }
        ExpressionTree::Leaf(Leaf::Slot(i)) => Ok(ExpressionTree::slot(*i)),
        ExpressionTree::Leaf(Leaf::Literal(lit)) => {
            let same_value = |t: &&Token| t.value.as_ref() == Some(&lit.value);
            if let Some(i) = (0..quantities.len()).find(|&i| !bound[i] && same_value(&quantities[i])) {
                bound[i] = true;
                return Ok(ExpressionTree::slot(i));
            }
            if options.constants.contains(&lit.value) {
                return Ok(node.clone());
            }
            if let Some(i) = quantities.iter().position(same_value) {
                return Ok(ExpressionTree::slot(i));
            }
            Err(ProblemError::Unaligned(lit.text.clone()))
        }
    }
}

/// Expression template of a problem (`n1 * n2 / n3`).
pub fn number_map(problem: &MathWordProblem) -> String {
    problem.template()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problems: Vec<MathWordProblem>,
    pub language: Language,
}

impl Dataset {
    pub fn new(problems: Vec<MathWordProblem>, language: Language) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for p in &problems {
            if !seen.insert(p.id.as_str()) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Dataset { problems, language })
    }

    pub fn empty(language: Language) -> Self {
        Dataset { problems: Vec::new(), language }
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&MathWordProblem> {
        self.problems.iter().find(|p| p.id == id)
    }
}

/// Reads raw records, reporting JSON errors per line (1-based).
pub fn read_records(path: &Path) -> Result<Vec<(usize, Result<RawRecord, serde_json::Error>)>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, serde_json::from_str::<RawRecord>(&line)));
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, language: Language) -> Result<Dataset, CorpusError> {
    load_corpus_with(path, language, &LoadOptions::default())
}

pub fn load_corpus_with(path: &Path, language: Language, options: &LoadOptions) -> Result<Dataset, CorpusError> {
    let mut problems = Vec::new();
    for (line, record) in read_records(path)? {
        let record = record.map_err(|source| CorpusError::Json { line, source })?;
        let problem = MathWordProblem::from_record(&record, language, options)
            .map_err(|source| CorpusError::Problem { line, id: record.id.clone(), source })?;
        problems.push(problem);
    }
    Dataset::new(problems, language)
}

/// Writes any serializable records as JSONL.
pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(&record).expect("records serialize");
        writeln!(writer, "{line}").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

pub fn save_corpus(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    write_jsonl(path, dataset.problems.iter().map(MathWordProblem::to_record))
}
