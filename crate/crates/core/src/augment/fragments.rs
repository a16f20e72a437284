//! Alternative fragments: span sets that occur in a common environment.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Language, Sentence};

/// Marker that stands in for one removed span inside an environment.
pub const HOLE: &str = "\u{2591}";

const NUM: &str = "NUM";

const TERMINALS: [&str; 6] = [".", "?", "!", "。", "？", "！"];

/// Half-open token range `[start, end)` within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Where a fragment sits, and what it says.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fragment {
    pub problem_id: String,
    pub sentence: usize,
    /// Sorted, non-overlapping, separated by at least one token.
    pub spans: Vec<Span>,
    /// Masked tokens of each span.
    pub text: Vec<Vec<String>>,
}

impl Fragment {
    pub fn display(&self) -> String {
        self.text.iter().map(|s| s.join(" ")).collect::<Vec<_>>().join(" … ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FragmentPair {
    pub f1: Fragment,
    pub f2: Fragment,
    pub environment: String,
    pub f1_in_question: bool,
    pub f2_in_question: bool,
}

/// Token surfaces used for environment matching: quantities become `NUM`,
/// English words are lowercased, and a sentence-final punctuation mark is
/// left out so that statements and questions can share environments.
pub fn masked_tokens(sentence: &Sentence, language: Language) -> Vec<String> {
    let tokens = match sentence.tokens.split_last() {
        Some((last, rest)) if TERMINALS.contains(&last.surface.as_str()) => rest,
        _ => &sentence.tokens[..],
    };
    tokens
        .iter()
        .map(|t| {
            if t.is_quantity() {
                NUM.to_string()
            } else if language == Language::En {
                t.surface.to_lowercase()
            } else {
                t.surface.clone()
            }
        })
        .collect()
}

/// Every fragment of a sentence of `len` tokens: one span, or two spans with
/// a gap between them, each span at most `max_span` tokens.
pub fn fragment_spans(len: usize, max_span: usize) -> Vec<Vec<Span>> {
    let mut singles = Vec::new();
    for start in 0..len {
        for end in start + 1..=(start + max_span).min(len) {
            singles.push(Span { start, end });
        }
    }
    let mut out: Vec<Vec<Span>> = singles.iter().map(|s| vec![*s]).collect();
    for a in &singles {
        for b in &singles {
            if b.start > a.end {
                out.push(vec![*a, *b]);
            }
        }
    }
    out
}

/// The sentence with each span replaced by one [`HOLE`] marker.
pub fn environment(tokens: &[String], spans: &[Span]) -> String {
    let mut parts: Vec<&str> = Vec::new();
    let mut i = 0;
    for span in spans {
        parts.extend(tokens[i..span.start].iter().map(String::as_str));
        parts.push(HOLE);
        i = span.end;
    }
    parts.extend(tokens[i..].iter().map(String::as_str));
    parts.join(" ")
}

fn span_text(tokens: &[String], spans: &[Span]) -> Vec<Vec<String>> {
    spans.iter().map(|s| tokens[s.start..s.end].to_vec()).collect()
}

struct Occurrence {
    /// Index into the distinct-sentence table.
    sentence_type: usize,
    spans: Vec<Span>,
    text: Vec<Vec<String>>,
    has_quantity: bool,
}

/// A sentence location `(problem index, sentence index)`.
pub type Location = (usize, usize);

/// One distinct substitution, referring back into a [`FragmentIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edit {
    /// Whether `f1` lies in a question (operation 1) or not (operation 2).
    pub question: bool,
    pub f1: Location,
    pub f2: Location,
    occurrence1: usize,
    occurrence2: usize,
}

/// Fragments of every sentence of a pool, grouped by environment. Sentences
/// with the same masked tokens share one fragment enumeration.
pub struct FragmentIndex<'a> {
    pool: &'a Dataset,
    locations: Vec<Vec<Location>>,
    occurrences: Vec<Occurrence>,
    /// Environment groups in environment order.
    groups: Vec<(String, Vec<usize>)>,
}

impl<'a> FragmentIndex<'a> {
    pub fn build(pool: &'a Dataset, max_span: usize) -> Self {
        let max_span = max_span.max(1);
        let mut type_ids: HashMap<Vec<String>, usize> = HashMap::new();
        let mut types: Vec<Vec<String>> = Vec::new();
        let mut locations: Vec<Vec<Location>> = Vec::new();
        for (pi, problem) in pool.problems.iter().enumerate() {
            for (si, sentence) in problem.sentences.iter().enumerate() {
                let tokens = masked_tokens(sentence, pool.language);
                let id = *type_ids.entry(tokens.clone()).or_insert_with(|| {
                    types.push(tokens);
                    locations.push(Vec::new());
                    types.len() - 1
                });
                locations[id].push((pi, si));
            }
        }
        let mut occurrences = Vec::new();
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (t, tokens) in types.iter().enumerate() {
            for spans in fragment_spans(tokens.len(), max_span) {
                let text = span_text(tokens, &spans);
                let has_quantity = text.iter().flatten().any(|w| w == NUM);
                groups.entry(environment(tokens, &spans)).or_default().push(occurrences.len());
                occurrences.push(Occurrence { sentence_type: t, spans, text, has_quantity });
            }
        }
        let groups = groups.into_iter().filter(|(_, members)| members.len() > 1).collect();
        FragmentIndex { pool, locations, occurrences, groups }
    }

    fn in_question(&self, (pi, si): Location) -> bool {
        si + 1 == self.pool.problems[pi].sentences.len()
    }

    fn fragment(&self, (pi, si): Location, occurrence: usize) -> Fragment {
        let o = &self.occurrences[occurrence];
        Fragment { problem_id: self.pool.problems[pi].id.clone(), sentence: si, spans: o.spans.clone(), text: o.text.clone() }
    }

    /// Occurrence pairs sharing an environment with differing texts.
    fn occurrence_pairs(&self) -> impl Iterator<Item = (&str, usize, usize)> + '_ {
        self.groups.iter().flat_map(move |(env, members)| {
            members.iter().flat_map(move |&a| {
                members
                    .iter()
                    .filter(move |&&b| self.occurrences[a].text != self.occurrences[b].text)
                    .map(move |&b| (env.as_str(), a, b))
            })
        })
    }

    /// Every ordered fragment pair from two distinct locations, sorted.
    pub fn pairs(&self) -> Vec<FragmentPair> {
        let mut pairs = Vec::new();
        for (env, a, b) in self.occurrence_pairs() {
            let (ta, tb) = (self.occurrences[a].sentence_type, self.occurrences[b].sentence_type);
            for &la in &self.locations[ta] {
                for &lb in &self.locations[tb] {
                    if la != lb {
                        pairs.push(self.pair_at(env, la, a, lb, b));
                    }
                }
            }
        }
        pairs.sort();
        pairs
    }

    fn pair_at(&self, env: &str, la: Location, a: usize, lb: Location, b: usize) -> FragmentPair {
        FragmentPair {
            f1: self.fragment(la, a),
            f2: self.fragment(lb, b),
            environment: env.to_string(),
            f1_in_question: self.in_question(la),
            f2_in_question: self.in_question(lb),
        }
    }

    /// The fragment pair an edit stands for.
    pub fn pair(&self, edit: &Edit) -> FragmentPair {
        let env = {
            let o = &self.occurrences[edit.occurrence1];
            let pi = edit.f1.0;
            let tokens = masked_tokens(&self.pool.problems[pi].sentences[edit.f1.1], self.pool.language);
            environment(&tokens, &o.spans)
        };
        self.pair_at(&env, edit.f1, edit.occurrence1, edit.f2, edit.occurrence2)
    }

    /// Distinct substitutions between different problems, sorted. Fragment
    /// pairs that would build the same problem are collapsed:
    ///
    /// * a question fragment yields one edit per (problem, donor problem,
    ///   donor sentence), since the narrative moves as a whole;
    /// * a statement fragment yields one edit per target sentence, target
    ///   text and replacement, with the replacement taken from the first
    ///   statement of its kind in another problem. Fragments holding a
    ///   quantity are skipped.
    ///
    /// With `fresh`, only edits involving one of those problem indices are
    /// returned.
    pub fn edits(&self, fresh: Option<&HashSet<usize>>) -> Vec<Edit> {
        let is_fresh = |pi: usize| fresh.is_none_or(|f| f.contains(&pi));
        let mut question_pairs: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        let mut statement_edits: BTreeMap<(usize, String, usize, Vec<Span>), (usize, usize)> = BTreeMap::new();
        for (_, a, b) in self.occurrence_pairs() {
            let (oa, ob) = (&self.occurrences[a], &self.occurrences[b]);
            let (ta, tb) = (oa.sentence_type, ob.sentence_type);
            question_pairs.entry((ta, tb)).or_insert((a, b));
            if !oa.has_quantity && !ob.has_quantity {
                let target = if oa.spans.len() == 1 { format!("{:?}", oa.text) } else { format!("{:?}", oa.spans) };
                statement_edits.entry((ta, target, tb, ob.spans.clone())).or_insert((a, b));
            }
        }

        let mut edits = Vec::new();
        for (&(ta, tb), &(a, b)) in &question_pairs {
            for &la in self.locations[ta].iter().filter(|&&l| self.in_question(l)) {
                for &lb in self.locations[tb].iter().filter(|&&l| !self.in_question(l)) {
                    if la.0 != lb.0 && (is_fresh(la.0) || is_fresh(lb.0)) {
                        edits.push(Edit { question: true, f1: la, f2: lb, occurrence1: a, occurrence2: b });
                    }
                }
            }
        }
        for (&(ta, _, tb, _), &(a, b)) in &statement_edits {
            let donors: Vec<Location> = self.locations[tb].iter().copied().filter(|&l| !self.in_question(l)).collect();
            let donor_fresh = donors.iter().any(|&l| is_fresh(l.0));
            for &la in self.locations[ta].iter().filter(|&&l| !self.in_question(l)) {
                if !(is_fresh(la.0) || donor_fresh) {
                    continue;
                }
                if let Some(&lb) = donors.iter().find(|l| l.0 != la.0) {
                    edits.push(Edit { question: false, f1: la, f2: lb, occurrence1: a, occurrence2: b });
                }
            }
        }
        edits.sort();
        edits
    }
}

/// Ordered pairs `(f1, f2)` from distinct sentences of the pool whose
/// environments coincide and whose masked texts differ, sorted.
pub fn discover_fragments(pool: &Dataset, max_span: usize) -> Vec<FragmentPair> {
    FragmentIndex::build(pool, max_span).pairs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_respect_caps_and_gaps() {
        let frags = fragment_spans(3, 2);
        // singles: [0,1) [0,2) [1,2) [1,3) [2,3); pairs need a gap
        assert_eq!(frags.len(), 5 + 1);
        assert!(frags.contains(&vec![Span { start: 0, end: 1 }, Span { start: 2, end: 3 }]));
    }

    #[test]
    fn environment_marks_holes() {
        let toks: Vec<String> = ["there", "are", "NUM", "peaches"].iter().map(|s| s.to_string()).collect();
        assert_eq!(environment(&toks, &[Span { start: 0, end: 3 }]), format!("{HOLE} peaches"));
    }
}
