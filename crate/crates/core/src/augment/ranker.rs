//! Confidence scorers for augmented candidates.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, MathWordProblem};

use super::Candidate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankerError {
    #[error("ranker process: {0}")]
    Process(String),
    #[error("ranker returned no result for {0}")]
    Missing(String),
    #[error("ranker returned malformed output: {0}")]
    Malformed(String),
    #[error("probability {value} outside (0, 1] for {id}")]
    OutOfRange { id: String, value: f64 },
    #[error("unsupported n-gram order {0} (use 2 or 3)")]
    Order(usize),
}

/// Produces a per-token probability sequence for each candidate.
pub trait Ranker {
    fn token_probs(&mut self, candidate: &Candidate) -> Result<Vec<f64>, RankerError>;

    /// Scores a batch; the default scores candidates one by one.
    fn score_batch(&mut self, candidates: &[Candidate]) -> Vec<Result<Vec<f64>, RankerError>> {
        candidates.iter().map(|c| self.token_probs(c)).collect()
    }
}

const BOS: &str = "<s>";
const NUM: &str = "NUM";

fn lm_tokens(problem: &MathWordProblem) -> Vec<String> {
    problem
        .sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .map(|t| if t.is_quantity() { NUM.to_string() } else { t.surface.to_lowercase() })
        .collect()
}

/// Token n-gram model with add-one smoothing over problem texts.
#[derive(Debug, Clone)]
pub struct NgramRanker {
    n: usize,
    /// Vocabulary size plus one for unseen tokens.
    v: f64,
    ngrams: HashMap<Vec<String>, u64>,
    histories: HashMap<Vec<String>, u64>,
}

impl NgramRanker {
    pub fn fit(train: &Dataset, n: usize) -> Result<Self, RankerError> {
        if !(2..=3).contains(&n) {
            return Err(RankerError::Order(n));
        }
        let mut vocabulary = std::collections::HashSet::new();
        let mut ngrams = HashMap::new();
        let mut histories = HashMap::new();
        for problem in &train.problems {
            let tokens = lm_tokens(problem);
            vocabulary.extend(tokens.iter().cloned());
            let padded = Self::pad(n, tokens);
            for window in padded.windows(n) {
                *ngrams.entry(window.to_vec()).or_insert(0) += 1;
                *histories.entry(window[..n - 1].to_vec()).or_insert(0) += 1;
            }
        }
        Ok(NgramRanker { n, v: (vocabulary.len() + 1) as f64, ngrams, histories })
    }

    fn pad(n: usize, tokens: Vec<String>) -> Vec<String> {
        let mut padded = vec![BOS.to_string(); n - 1];
        padded.extend(tokens);
        padded
    }

    /// `P(w | h) = (c(h, w) + 1) / (c(h) + V)` for every token of the text.
    pub fn probabilities(&self, problem: &MathWordProblem) -> Vec<f64> {
        let padded = Self::pad(self.n, lm_tokens(problem));
        padded
            .windows(self.n)
            .map(|w| {
                let c = self.ngrams.get(w).copied().unwrap_or(0) as f64;
                let h = self.histories.get(&w[..self.n - 1]).copied().unwrap_or(0) as f64;
                (c + 1.0) / (h + self.v)
            })
            .collect()
    }
}

impl Ranker for NgramRanker {
    fn token_probs(&mut self, candidate: &Candidate) -> Result<Vec<f64>, RankerError> {
        Ok(self.probabilities(&candidate.problem))
    }
}

#[derive(Debug, Serialize)]
struct ExecRequest<'a> {
    id: &'a str,
    text: &'a str,
    expression: &'a str,
}

#[derive(Debug, Deserialize)]
struct ExecResponse {
    id: String,
    token_probs: Vec<f64>,
}

/// Runs `sh -c COMMAND` once per batch: candidates go to its stdin as JSONL
/// `{id, text, expression}`, and it answers one `{id, token_probs}` line per
/// candidate.
#[derive(Debug, Clone)]
pub struct ExecRanker {
    pub command: String,
}

impl ExecRanker {
    pub fn new(command: &str) -> Self {
        ExecRanker { command: command.to_string() }
    }

    fn run(&self, candidates: &[Candidate]) -> Result<HashMap<String, Vec<f64>>, RankerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| RankerError::Process(e.to_string()))?;
        let mut input = String::new();
        for c in candidates {
            let req = ExecRequest { id: &c.id, text: &c.problem.text, expression: &c.problem.expression };
            input.push_str(&serde_json::to_string(&req).expect("serializable request"));
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        // Write from a separate thread so a chatty child cannot deadlock us.
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let stdout = child.stdout.take().expect("piped stdout");
        let mut results = HashMap::new();
        for line in BufReader::new(stdout).lines() {
            let line = line.map_err(|e| RankerError::Process(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let resp: ExecResponse = serde_json::from_str(&line).map_err(|e| RankerError::Malformed(format!("{e}: {line}")))?;
            results.insert(resp.id, resp.token_probs);
        }
        let status = child.wait().map_err(|e| RankerError::Process(e.to_string()))?;
        writer
            .join()
            .map_err(|_| RankerError::Process("stdin writer panicked".into()))?
            .map_err(|e| RankerError::Process(format!("writing candidates: {e}")))?;
        if !status.success() {
            return Err(RankerError::Process(format!("`{}` exited with {status}", self.command)));
        }
        Ok(results)
    }
}

impl Ranker for ExecRanker {
    fn token_probs(&mut self, candidate: &Candidate) -> Result<Vec<f64>, RankerError> {
        self.score_batch(std::slice::from_ref(candidate)).pop().expect("one result per candidate")
    }

    fn score_batch(&mut self, candidates: &[Candidate]) -> Vec<Result<Vec<f64>, RankerError>> {
        if candidates.is_empty() {
            return Vec::new();
        }
        match self.run(candidates) {
            Ok(mut results) => candidates
                .iter()
                .map(|c| results.remove(&c.id).ok_or_else(|| RankerError::Missing(c.id.clone())))
                .collect(),
            Err(e) => candidates.iter().map(|_| Err(e.clone())).collect(),
        }
    }
}
