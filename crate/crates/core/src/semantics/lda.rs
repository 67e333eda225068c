//! Latent Dirichlet Allocation over label tokens, fitted by collapsed Gibbs
//! sampling. Documents are label sets, so every token of a document is
//! distinct. Inference for unseen documents folds tokens into the frozen
//! topic-word table and averages the smoothed topic proportions over the
//! last half of the sweeps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::semantics::{label_index, ContextHistogram};
use crate::vecmath::{fnv1a, splitmix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topic_count: usize,
    /// Document-topic prior; defaults to `50 / topic_count`.
    pub alpha: Option<f64>,
    /// Topic-word prior.
    pub beta: f64,
    /// Gibbs sweeps during fitting.
    pub iterations: usize,
    /// Gibbs sweeps during fold-in inference.
    pub infer_sweeps: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topic_count: 19,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            infer_sweeps: 100,
            seed: 0,
        }
    }
}

/// A fitted topic model: smoothed topic-word rows plus the priors and seed
/// needed to reproduce fold-in inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub vocab: Vec<String>,
    pub topic_count: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Row-major `topic_count x |vocab|`; rows strictly positive, sum to 1.
    pub topic_word: Vec<f64>,
    pub infer_sweeps: usize,
    pub seed: u64,
}

impl TopicModel {
    pub fn topic_row(&self, topic: usize) -> &[f64] {
        let w = self.vocab.len();
        &self.topic_word[topic * w..(topic + 1) * w]
    }
}

/// Fits the topic model on the semantics-learning documents by collapsed
/// Gibbs sampling. Deterministic for a fixed seed.
pub fn fit_lda(docs: &[&Document], vocab: &[String], config: &LdaConfig) -> Result<TopicModel> {
    let k = config.topic_count;
    if k < 2 {
        return Err(Error::Config(format!("topic count must be >= 2, got {k}")));
    }
    if config.iterations == 0 {
        return Err(Error::Config("LDA needs at least one iteration".into()));
    }
    let index = label_index(vocab);
    let mut tokens: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    let mut distinct = std::collections::BTreeSet::new();
    for doc in docs {
        let mut ids = Vec::with_capacity(doc.labels.len());
        for label in &doc.labels {
            let idx = *index.get(label.as_str()).ok_or_else(|| {
                Error::Config(format!(
                    "document '{}' label '{}' is outside the vocabulary",
                    doc.doc_id, label
                ))
            })?;
            ids.push(idx);
            distinct.insert(idx);
        }
        tokens.push(ids);
    }
    if distinct.len() < k {
        return Err(Error::Config(format!(
            "{} distinct labels cannot support {k} topics",
            distinct.len()
        )));
    }

    let w = vocab.len();
    let alpha = config.alpha.unwrap_or(50.0 / k as f64);
    let beta = config.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut doc_topic = vec![0f64; docs.len() * k];
    let mut topic_word = vec![0f64; k * w];
    let mut topic_total = vec![0f64; k];
    let mut assignments: Vec<Vec<usize>> = tokens
        .iter()
        .map(|ids| ids.iter().map(|_| rng.gen_range(0..k)).collect())
        .collect();
    for (d, ids) in tokens.iter().enumerate() {
        for (pos, &word) in ids.iter().enumerate() {
            let t = assignments[d][pos];
            doc_topic[d * k + t] += 1.0;
            topic_word[t * w + word] += 1.0;
            topic_total[t] += 1.0;
        }
    }

    let w_beta = w as f64 * beta;
    let mut weights = vec![0f64; k];
    for _ in 0..config.iterations {
        for (d, ids) in tokens.iter().enumerate() {
            for (pos, &word) in ids.iter().enumerate() {
                let old = assignments[d][pos];
                doc_topic[d * k + old] -= 1.0;
                topic_word[old * w + word] -= 1.0;
                topic_total[old] -= 1.0;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (doc_topic[d * k + t] + alpha) * (topic_word[t * w + word] + beta)
                        / (topic_total[t] + w_beta);
                    weights[t] = p;
                    total += p;
                }
                let new = sample_discrete(&weights, total, &mut rng);
                assignments[d][pos] = new;
                doc_topic[d * k + new] += 1.0;
                topic_word[new * w + word] += 1.0;
                topic_total[new] += 1.0;
            }
        }
    }

    let mut smoothed = vec![0f64; k * w];
    for t in 0..k {
        let denom = topic_total[t] + w_beta;
        for word in 0..w {
            smoothed[t * w + word] = (topic_word[t * w + word] + beta) / denom;
        }
    }
    Ok(TopicModel {
        vocab: vocab.to_vec(),
        topic_count: k,
        alpha,
        beta,
        topic_word: smoothed,
        infer_sweeps: config.infer_sweeps,
        seed: config.seed,
    })
}

/// Infers the smoothed topic histogram of a document under a frozen model.
///
/// Unknown labels are dropped with a warning; a document with no known label
/// is an inference error. Tokens are canonicalized to sorted order and the
/// sampler seed is derived from the model seed plus the token set, so the
/// result is deterministic and invariant under label permutation.
pub fn infer_context(model: &TopicModel, doc: &Document) -> Result<ContextHistogram> {
    let index = label_index(&model.vocab);
    let mut tokens: Vec<usize> = Vec::new();
    for label in &doc.labels {
        match index.get(label.as_str()) {
            Some(&idx) => tokens.push(idx),
            None => log::warn!(
                "document '{}': dropping label '{}' unknown to the topic model",
                doc.doc_id,
                label
            ),
        }
    }
    if tokens.is_empty() {
        return Err(Error::Inference(format!(
            "document '{}' has no label known to the topic model",
            doc.doc_id
        )));
    }
    tokens.sort_unstable();

    let k = model.topic_count;
    let w = model.vocab.len();
    let alpha = model.alpha;
    let n = tokens.len() as f64;
    let denom = n + k as f64 * alpha;

    let mut seed_bytes = Vec::with_capacity(tokens.len() * 8);
    for &t in &tokens {
        seed_bytes.extend_from_slice(&(t as u64).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(model.seed ^ fnv1a(&seed_bytes)));

    let mut counts = vec![0f64; k];
    let mut assignments: Vec<usize> = tokens.iter().map(|_| rng.gen_range(0..k)).collect();
    for &t in &assignments {
        counts[t] += 1.0;
    }

    let sweeps = model.infer_sweeps.max(2);
    let keep_from = sweeps / 2;
    let mut accumulated = vec![0f64; k];
    let mut kept = 0usize;
    let mut weights = vec![0f64; k];
    for sweep in 0..sweeps {
        for (pos, &word) in tokens.iter().enumerate() {
            let old = assignments[pos];
            counts[old] -= 1.0;
            let mut total = 0.0;
            for t in 0..k {
                let p = (counts[t] + alpha) * model.topic_word[t * w + word];
                weights[t] = p;
                total += p;
            }
            let new = sample_discrete(&weights, total, &mut rng);
            assignments[pos] = new;
            counts[new] += 1.0;
        }
        if sweep >= keep_from {
            for t in 0..k {
                accumulated[t] += (counts[t] + alpha) / denom;
            }
            kept += 1;
        }
    }
    let values: Vec<f64> = accumulated.iter().map(|v| v / kept as f64).collect();
    ContextHistogram::new(values)
}

fn sample_discrete(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
