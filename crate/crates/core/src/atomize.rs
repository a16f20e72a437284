//! Quantity atoms: every quantity occurrence is labeled with the index of
//! the k-means cluster its TF-IDF context vector falls into.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Dataset, MathWordProblem, QuantityLocation};
use crate::dbca::{greedy_split, label_pool, DbcaError, SplitAssignment, SplitConfig};
use crate::num::Real;

/// Placeholder term for quantities inside a context window.
pub const NUM_TERM: &str = "NUM";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuantityRef {
    pub problem_id: String,
    pub sentence: usize,
    pub position: usize,
}

impl QuantityRef {
    pub fn new(problem_id: &str, location: QuantityLocation) -> Self {
        QuantityRef { problem_id: problem_id.to_string(), sentence: location.sentence, position: location.position }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtomizeError {
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("no quantity at sentence {sentence}, position {position} of problem {problem_id}")]
    QuantityNotFound { problem_id: String, sentence: usize, position: usize },
    #[error("k = {k} exceeds the number of distinct context vectors ({distinct})")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectKError {
    #[error("no candidate k given")]
    NoCandidates,
    #[error("k = {k}: {source}")]
    Atomize { k: usize, source: AtomizeError },
    #[error("k = {k}: {source}")]
    Split { k: usize, source: DbcaError },
}

/// Sparse vector as `(term id, weight)` pairs sorted by term id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector<F> {
    pub entries: Vec<(usize, F)>,
}

impl<F: Real> SparseVector<F> {
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|(_, w)| w.is_zero())
    }

    pub fn norm_squared(&self) -> F {
        self.entries.iter().map(|(_, w)| *w * *w).sum()
    }

    pub fn dot_dense(&self, dense: &[F]) -> F {
        self.entries.iter().map(|(i, w)| *w * dense[*i]).sum()
    }

    pub fn get(&self, term: usize) -> F {
        self.entries
            .binary_search_by_key(&term, |(i, _)| *i)
            .map(|idx| self.entries[idx].1)
            .unwrap_or_else(|_| F::zero())
    }

    fn content_key(&self) -> Vec<u8> {
        let mut key = Vec::with_capacity(self.entries.len() * 16);
        for (i, w) in &self.entries {
            key.extend_from_slice(&(*i as u64).to_le_bytes());
            key.extend_from_slice(&w.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
        }
        key
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector<F> {
    pub qref: QuantityRef,
    pub weights: SparseVector<F>,
}

/// Context terms of the quantity at `location`: up to `window` tokens on
/// each side within its sentence. Other quantities become [`NUM_TERM`];
/// punctuation is dropped; words are lowercased.
pub fn extract_context(
    problem: &MathWordProblem,
    location: QuantityLocation,
    window: usize,
) -> Result<Vec<String>, AtomizeError> {
    if window == 0 {
        return Err(AtomizeError::InvalidWindow);
    }
    let not_found = || AtomizeError::QuantityNotFound {
        problem_id: problem.id.clone(),
        sentence: location.sentence,
        position: location.position,
    };
    let sentence = problem.sentences.get(location.sentence).ok_or_else(not_found)?;
    let target = sentence.tokens.get(location.position).filter(|t| t.is_quantity()).ok_or_else(not_found)?;
    let lo = target.position.saturating_sub(window);
    let hi = (target.position + window).min(sentence.tokens.len() - 1);
    let terms = sentence.tokens[lo..=hi]
        .iter()
        .filter(|t| t.position != target.position)
        .filter_map(|t| {
            if t.is_quantity() {
                Some(NUM_TERM.to_string())
            } else if t.surface.chars().any(char::is_alphanumeric) {
                Some(t.surface.to_lowercase())
            } else {
                None
            }
        })
        .collect();
    Ok(terms)
}

/// Fitted TF-IDF model: sorted vocabulary, idf per term and one L2-normalized
/// vector per document.
#[derive(Debug, Clone, PartialEq)]
pub struct Tfidf<F> {
    pub vocabulary: Vec<String>,
    pub idf: Vec<F>,
    pub vectors: Vec<SparseVector<F>>,
}

/// `weight = tf · (ln((1 + N) / (1 + df)) + 1)`, then L2 normalization per
/// document. Term ids follow lexicographic order of the vocabulary.
pub fn tfidf<F: Real>(documents: &[Vec<String>]) -> Tfidf<F> {
    let vocabulary: Vec<String> =
        documents.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut df = vec![0usize; vocabulary.len()];
    let counts: Vec<BTreeMap<usize, usize>> = documents
        .iter()
        .map(|doc| {
            let mut tf = BTreeMap::new();
            for term in doc {
                *tf.entry(index[term.as_str()]).or_insert(0) += 1;
            }
            for id in tf.keys() {
                df[*id] += 1;
            }
            tf
        })
        .collect();
    let n = F::from_count(documents.len());
    let idf: Vec<F> = df
        .iter()
        .map(|&d| ((F::one() + n) / (F::one() + F::from_count(d))).ln() + F::one())
        .collect();
    let vectors = counts
        .into_iter()
        .map(|tf| {
            let mut entries: Vec<(usize, F)> = tf.into_iter().map(|(id, c)| (id, F::from_count(c) * idf[id])).collect();
            let norm = entries.iter().map(|(_, w)| *w * *w).sum::<F>().sqrt();
            if norm > F::zero() {
                for (_, w) in &mut entries {
                    *w = *w / norm;
                }
            }
            SparseVector { entries }
        })
        .collect();
    Tfidf { vocabulary, idf, vectors }
}

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<F> {
    /// Cluster per input vector.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<F>>,
    /// Objective after each assignment step.
    pub objective_history: Vec<F>,
    pub iterations: usize,
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Identical vectors are merged (with multiplicity) and ordered by a content
/// hash before seeding, so the result does not depend on input order.
/// All-zero vectors do not take part in fitting; they join the cluster whose
/// centroid has minimal norm.
pub fn kmeans<F: Real>(
    vectors: &[SparseVector<F>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansFit<F>, AtomizeError> {
    if k == 0 {
        return Err(AtomizeError::ZeroClusters);
    }
    let dim = vectors.iter().flat_map(|v| v.entries.iter().map(|(i, _)| i + 1)).max().unwrap_or(0);

    // Distinct non-zero points, keyed by content.
    let mut distinct: BTreeMap<(Vec<u8>, Vec<u8>), (usize, Vec<usize>)> = BTreeMap::new();
    for (idx, v) in vectors.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let key = v.content_key();
        let hash = Sha256::digest(&key).to_vec();
        distinct.entry((hash, key)).or_insert_with(|| (idx, Vec::new())).1.push(idx);
    }
    if k > distinct.len() {
        return Err(AtomizeError::TooManyClusters { k, distinct: distinct.len() });
    }
    let points: Vec<&SparseVector<F>> = distinct.values().map(|(rep, _)| &vectors[*rep]).collect();
    let weights: Vec<F> = distinct.values().map(|(_, members)| F::from_count(members.len())).collect();
    let norms: Vec<F> = points.iter().map(|p| p.norm_squared()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(&points, &weights, &norms, k, dim, &mut rng);

    let mut assignment: Vec<usize> = Vec::new();
    let mut objective_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let centroid_norms: Vec<F> = centroids.iter().map(|c| c.iter().map(|x| *x * *x).sum()).collect();
        let mut objective = F::zero();
        let next: Vec<usize> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (best, dist) = nearest(p, norms[i], &centroids, &centroid_norms);
                objective = objective + weights[i] * dist;
                best
            })
            .collect();
        objective_history.push(objective);
        let stable = next == assignment;
        assignment = next;
        if stable {
            break;
        }
        update_centroids(&points, &weights, &assignment, &mut centroids);
    }

    let centroid_norms: Vec<F> = centroids.iter().map(|c| c.iter().map(|x| *x * *x).sum()).collect();
    let zero_cluster = argmin(&centroid_norms);
    let mut labels = vec![zero_cluster; vectors.len()];
    for ((_, members), &cluster) in distinct.values().zip(&assignment) {
        for &m in members {
            labels[m] = cluster;
        }
    }
    Ok(KMeansFit { labels, centroids, objective_history, iterations })
}

fn argmin<F: Real>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn squared_distance<F: Real>(point: &SparseVector<F>, point_norm: F, centroid: &[F], centroid_norm: F) -> F {
    let d = point_norm - F::lit(2.0) * point.dot_dense(centroid) + centroid_norm;
    d.max(F::zero())
}

fn nearest<F: Real>(point: &SparseVector<F>, point_norm: F, centroids: &[Vec<F>], centroid_norms: &[F]) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_distance(point, point_norm, centroid, centroid_norms[c]);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus<F: Real>(
    points: &[&SparseVector<F>],
    weights: &[F],
    norms: &[F],
    k: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<F>> {
    let densify = |p: &SparseVector<F>| {
        let mut dense = vec![F::zero(); dim];
        for (i, w) in &p.entries {
            dense[*i] = *w;
        }
        dense
    };
    let mut chosen = vec![sample_weighted(weights, rng)];
    let mut centroids = vec![densify(points[chosen[0]])];
    let mut closest: Vec<F> = vec![F::infinity(); points.len()];
    while centroids.len() < k {
        let last = centroids.last().expect("at least one centroid");
        let last_norm: F = last.iter().map(|x| *x * *x).sum();
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, norms[i], last, last_norm);
            if d < closest[i] {
                closest[i] = d;
            }
        }
        for &c in &chosen {
            closest[c] = F::zero();
        }
        let scores: Vec<F> = closest.iter().zip(weights).map(|(d, w)| *d * *w).collect();
        let next = if scores.iter().any(|s| *s > F::zero()) {
            sample_weighted(&scores, rng)
        } else {
            // Degenerate geometry: take the first point not yet chosen.
            (0..points.len()).find(|i| !chosen.contains(i)).expect("enough distinct points")
        };
        chosen.push(next);
        centroids.push(densify(points[next]));
    }
    centroids
}

fn sample_weighted<F: Real>(weights: &[F], rng: &mut ChaCha8Rng) -> usize {
    let total: F = weights.iter().copied().sum();
    let target = F::lit(rng.gen::<f64>()) * total;
    let mut acc = F::zero();
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > F::zero() {
            last_positive = i;
            acc = acc + *w;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

fn update_centroids<F: Real>(points: &[&SparseVector<F>], weights: &[F], assignment: &[usize], centroids: &mut [Vec<F>]) {
    let dim = centroids.first().map_or(0, Vec::len);
    let mut sums = vec![vec![F::zero(); dim]; centroids.len()];
    let mut mass = vec![F::zero(); centroids.len()];
    for ((p, w), &c) in points.iter().zip(weights).zip(assignment) {
        mass[c] = mass[c] + *w;
        for (i, x) in &p.entries {
            sums[c][*i] = sums[c][*i] + *w * *x;
        }
    }
    for (c, centroid) in centroids.iter_mut().enumerate() {
        if mass[c] > F::zero() {
            for (dst, s) in centroid.iter_mut().zip(&sums[c]) {
                *dst = *s / mass[c];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomizeConfig {
    pub window: usize,
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for AtomizeConfig {
    fn default() -> Self {
        AtomizeConfig { window: 3, k: 10, seed: 7, max_iter: 100 }
    }
}

/// Cluster index for every quantity occurrence of a pool.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomLabeling<F> {
    pub k: usize,
    pub labels: BTreeMap<QuantityRef, usize>,
    pub centroids: Vec<Vec<F>>,
    pub vocabulary: Vec<String>,
    pub objective_history: Vec<F>,
}

/// One line of the labeling export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub problem_id: String,
    pub sentence: usize,
    pub position: usize,
    pub cluster: usize,
}

impl<F: Real> AtomLabeling<F> {
    pub fn label(&self, qref: &QuantityRef) -> Option<usize> {
        self.labels.get(qref).copied()
    }

    pub fn records(&self) -> Vec<LabelRecord> {
        self.labels
            .iter()
            .map(|(q, &cluster)| LabelRecord {
                problem_id: q.problem_id.clone(),
                sentence: q.sentence,
                position: q.position,
                cluster,
            })
            .collect()
    }
}

/// Context vectors for every quantity occurrence in the pool, in pool order.
pub fn context_vectors<F: Real>(pool: &Dataset, window: usize) -> Result<(Vec<ContextVector<F>>, Vec<String>), AtomizeError> {
    let mut refs = Vec::new();
    let mut documents = Vec::new();
    for problem in &pool.problems {
        for (location, _) in problem.quantities() {
            documents.push(extract_context(problem, location, window)?);
            refs.push(QuantityRef::new(&problem.id, location));
        }
    }
    let model = tfidf::<F>(&documents);
    let vectors = refs
        .into_iter()
        .zip(model.vectors)
        .map(|(qref, weights)| ContextVector { qref, weights })
        .collect();
    Ok((vectors, model.vocabulary))
}

/// Window extraction, TF-IDF and k-means over the whole pool.
pub fn atomize<F: Real>(pool: &Dataset, config: &AtomizeConfig) -> Result<AtomLabeling<F>, AtomizeError> {
    let (vectors, vocabulary) = context_vectors::<F>(pool, config.window)?;
    let sparse: Vec<SparseVector<F>> = vectors.iter().map(|v| v.weights.clone()).collect();
    let fit = kmeans(&sparse, config.k, config.seed, config.max_iter)?;
    let labels = vectors.into_iter().map(|v| v.qref).zip(fit.labels).collect();
    Ok(AtomLabeling {
        k: config.k,
        labels,
        centroids: fit.centroids,
        vocabulary,
        objective_history: fit.objective_history,
    })
}

/// Outcome of one candidate k in [`select_k`].
#[derive(Debug, Clone, PartialEq)]
pub struct KTrial<F> {
    pub k: usize,
    pub labeling: AtomLabeling<F>,
    pub split: SplitAssignment<F>,
}

/// Runs atomize and the greedy split for every candidate k. Returns the index
/// of the trial with the highest compound divergence (smaller k on exact
/// ties) together with all trials in ascending k order.
pub fn select_k<F: Real>(
    pool: &Dataset,
    candidates: &[usize],
    atomize_config: &AtomizeConfig,
    split_config: &SplitConfig<F>,
) -> Result<(usize, Vec<KTrial<F>>), SelectKError> {
    let ks: BTreeSet<usize> = candidates.iter().copied().collect();
    if ks.is_empty() {
        return Err(SelectKError::NoCandidates);
    }
    let mut trials: Vec<KTrial<F>> = Vec::with_capacity(ks.len());
    for k in ks {
        let config = AtomizeConfig { k, ..*atomize_config };
        let labeling = atomize::<F>(pool, &config).map_err(|source| SelectKError::Atomize { k, source })?;
        let labeled = label_pool(pool, &labeling).map_err(|source| SelectKError::Split { k, source })?;
        let split = greedy_split(&labeled, split_config).map_err(|source| SelectKError::Split { k, source })?;
        trials.push(KTrial { k, labeling, split });
    }
    let mut best = 0;
    for (i, trial) in trials.iter().enumerate() {
        if trial.split.report.compound_divergence > trials[best].split.report.compound_divergence {
            best = i;
        }
    }
    Ok((best, trials))
}
