//! Raw semantic representations of labels and their local contexts.
//!
//! A label is described globally by the shared pattern of its use against all
//! other labels: binary tf-idf usage rows over the semantics-learning
//! documents, compared pairwise by dot product. The local context of a label
//! set is a smoothed topic histogram inferred with a label-token LDA model.
//! Documents additionally get a `{-1,+1}` bag-of-words target used by the
//! embedding network's prediction loss.

mod lda;

pub use lda::{fit_lda, infer_context, LdaConfig, TopicModel};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::vecmath::dot;

/// tf-idf weights of each label's use: one row per vocabulary label, one
/// column per semantics-learning document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelUsageMatrix {
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    /// Row-major `|vocab| x |doc_ids|`.
    pub values: Vec<f64>,
}

impl LabelUsageMatrix {
    pub fn row(&self, label_idx: usize) -> &[f64] {
        let n = self.doc_ids.len();
        &self.values[label_idx * n..(label_idx + 1) * n]
    }

    /// Scales every row to unit norm (zero rows stay zero), bounding the
    /// gram entries by 1. Raw dot products are the default elsewhere; this
    /// keeps the network inputs in a tame range on dense corpora.
    pub fn cosine_normalized(&self) -> LabelUsageMatrix {
        let n = self.doc_ids.len();
        let mut values = self.values.clone();
        for row in 0..self.vocab.len() {
            let slice = &mut values[row * n..(row + 1) * n];
            let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                slice.iter_mut().for_each(|v| *v /= norm);
            }
        }
        LabelUsageMatrix {
            vocab: self.vocab.clone(),
            doc_ids: self.doc_ids.clone(),
            values,
        }
    }
}

/// Builds the binary-tf / log-idf usage matrix. tf is 1 when the label occurs
/// in the document (labels occur at most once), idf is `ln(D / df)`. Labels
/// never used in the given documents get a zero row.
pub fn tfidf_usage(docs: &[&Document], vocab: &[String]) -> Result<LabelUsageMatrix> {
    if docs.is_empty() {
        return Err(Error::Config("tf-idf needs at least one document".into()));
    }
    let index = label_index(vocab);
    for doc in docs {
        for label in &doc.labels {
            if !index.contains_key(label.as_str()) {
                return Err(Error::Config(format!(
                    "document '{}' label '{}' is outside the semantics vocabulary",
                    doc.doc_id, label
                )));
            }
        }
    }
    let n_docs = docs.len();
    let mut df = vec![0usize; vocab.len()];
    for doc in docs {
        for label in &doc.labels {
            df[index[label.as_str()]] += 1;
        }
    }
    let mut values = vec![0.0; vocab.len() * n_docs];
    for (row, label) in vocab.iter().enumerate() {
        if df[row] == 0 {
            log::warn!("label '{label}' never occurs in the semantics documents; zero usage row");
            continue;
        }
        let idf = (n_docs as f64 / df[row] as f64).ln();
        for (col, doc) in docs.iter().enumerate() {
            if doc.labels.iter().any(|l| l == label) {
                values[row * n_docs + col] = idf;
            }
        }
    }
    Ok(LabelUsageMatrix {
        vocab: vocab.to_vec(),
        doc_ids: docs.iter().map(|d| d.doc_id.clone()).collect(),
        values,
    })
}

/// The label-label gram matrix; row `i` is the global feature vector of
/// vocabulary label `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGram {
    pub vocab: Vec<String>,
    /// Row-major `|vocab| x |vocab|`, symmetric.
    pub values: Vec<f64>,
}

impl LabelGram {
    pub fn row(&self, label_idx: usize) -> &[f64] {
        let n = self.vocab.len();
        &self.values[label_idx * n..(label_idx + 1) * n]
    }

    pub fn row_for(&self, label: &str) -> Option<&[f64]> {
        self.vocab
            .iter()
            .position(|l| l == label)
            .map(|i| self.row(i))
    }
}

/// Dot products of usage rows over all label pairs.
pub fn label_features(usage: &LabelUsageMatrix) -> LabelGram {
    let n = usage.vocab.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(usage.row(i), usage.row(j));
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    LabelGram {
        vocab: usage.vocab.clone(),
        values,
    }
}

/// A smoothed histogram over latent topics; strictly positive, sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextHistogram {
    pub values: Vec<f64>,
}

impl ContextHistogram {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!(
                "context histogram sums to {sum}, expected 1"
            )));
        }
        if values.iter().any(|v| *v <= 0.0) {
            return Err(Error::Numeric(
                "context histogram has a non-positive entry".into(),
            ));
        }
        Ok(ContextHistogram { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `{-1,+1}` document target: +1 exactly at the positions of present labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowTarget {
    pub values: Vec<f64>,
}

impl BowTarget {
    /// Elementwise negation; the target of a synthesized negative example.
    pub fn flipped(&self) -> BowTarget {
        BowTarget {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn positives(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }
}

pub fn bow_target(doc: &Document, vocab: &[String]) -> Result<BowTarget> {
    let index = label_index(vocab);
    for label in &doc.labels {
        if !index.contains_key(label.as_str()) {
            return Err(Error::Config(format!(
                "document '{}' label '{}' is outside the vocabulary",
                doc.doc_id, label
            )));
        }
    }
    let mut values = vec![-1.0; vocab.len()];
    for label in &doc.labels {
        values[index[label.as_str()]] = 1.0;
    }
    Ok(BowTarget { values })
}

/// Symmetrized KL divergence between two context histograms:
/// `0.5 * sum_c (p[c] - q[c]) * ln(p[c] / q[c])`. Symmetric, nonnegative,
/// zero exactly when the histograms are equal. Not a metric (no triangle
/// inequality).
pub fn context_divergence(a: &ContextHistogram, b: &ContextHistogram) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension(a.len(), b.len(), "context histograms"));
    }
    let mut sum = 0.0;
    for (p, q) in a.values.iter().zip(&b.values) {
        if *p <= 0.0 || *q <= 0.0 {
            return Err(Error::Numeric(
                "context divergence needs strictly positive histograms".into(),
            ));
        }
        // ln p - ln q rather than ln(p/q): the product of two negated
        // factors is bitwise identical, so swapping the arguments gives
        // exactly the same sum.
        sum += (p - q) * (p.ln() - q.ln());
    }
    Ok(0.5 * sum)
}

/// Context similarity `S = exp(-lambda/2 * KL)`, in (0, 1].
pub fn context_similarity(a: &ContextHistogram, b: &ContextHistogram, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::Config(format!(
            "similarity sensitivity must be positive, got {lambda}"
        )));
    }
    Ok((-lambda / 2.0 * context_divergence(a, b)?).exp())
}

/// Everything needed to form an embedding-network input for a concept:
/// the vocabulary, the label gram features and the fitted topic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticsFeatures {
    pub vocab: Vec<String>,
    pub usage: LabelUsageMatrix,
    pub gram: LabelGram,
    pub topics: TopicModel,
}

impl SemanticsFeatures {
    pub fn build(
        docs: &[&Document],
        vocab: &[String],
        lda_config: &LdaConfig,
    ) -> Result<SemanticsFeatures> {
        Self::build_with(docs, vocab, lda_config, false)
    }

    /// As [`SemanticsFeatures::build`], with optional cosine normalization
    /// of the usage rows before the gram computation.
    pub fn build_with(
        docs: &[&Document],
        vocab: &[String],
        lda_config: &LdaConfig,
        normalize_usage: bool,
    ) -> Result<SemanticsFeatures> {
        let usage = tfidf_usage(docs, vocab)?;
        let usage = if normalize_usage {
            usage.cosine_normalized()
        } else {
            usage
        };
        let gram = label_features(&usage);
        let topics = fit_lda(docs, vocab, lda_config)?;
        Ok(SemanticsFeatures {
            vocab: vocab.to_vec(),
            usage,
            gram,
            topics,
        })
    }

    pub fn label_vector(&self, label: &str) -> Option<&[f64]> {
        self.gram.row_for(label)
    }

    pub fn context_for(&self, doc: &Document) -> Result<ContextHistogram> {
        infer_context(&self.topics, doc)
    }

    /// Embedding-network input width: label features plus topic histogram.
    pub fn input_dim(&self) -> usize {
        self.vocab.len() + self.topics.topic_count
    }
}

pub(crate) fn label_index(vocab: &[String]) -> std::collections::BTreeMap<&str, usize> {
    vocab
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect()
}
