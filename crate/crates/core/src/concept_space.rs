//! The store of known embedded concepts and the queries it answers:
//! out-of-vocabulary inference, target compression and semantic priming.
//!
//! Every (label, document) pair from the semantics-learning and
//! instance-training sets contributes one embedding record. An OOV label is
//! embedded as the centroid of its co-occurring in-vocabulary labels; a
//! document's regression target is the mean of its concept embeddings. At
//! query time all known labels are ranked by normalized inverse minimum
//! distance to a predicted target.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ce::SiameseModel;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::evaluation::RankedScores;
use crate::semantics::SemanticsFeatures;
use crate::vecmath::{all_finite, euclidean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptOrigin {
    SemanticsSet,
    InstanceSet,
    OovInferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRecord {
    pub label: String,
    pub doc_id: String,
    pub embedding: Vec<f64>,
    pub origin: ConceptOrigin,
}

/// All known concept embeddings, indexed by label. Frozen after
/// construction; records are kept sorted by (label, doc_id) so rebuilding
/// from the same inputs serializes identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StoreData", into = "StoreData")]
pub struct ConceptStore {
    dimension: usize,
    records: Vec<ConceptRecord>,
    index: BTreeMap<String, Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct StoreData {
    dimension: usize,
    records: Vec<ConceptRecord>,
}

impl From<StoreData> for ConceptStore {
    fn from(data: StoreData) -> Self {
        ConceptStore::new(data.dimension, data.records)
    }
}

impl From<ConceptStore> for StoreData {
    fn from(store: ConceptStore) -> Self {
        StoreData {
            dimension: store.dimension,
            records: store.records,
        }
    }
}

impl ConceptStore {
    pub fn new(dimension: usize, mut records: Vec<ConceptRecord>) -> Self {
        records.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| a.doc_id.cmp(&b.doc_id)));
        records.dedup_by(|a, b| a.label == b.label && a.doc_id == b.doc_id);
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, record) in records.iter().enumerate() {
            index.entry(record.label.clone()).or_default().push(i);
        }
        ConceptStore {
            dimension,
            records,
            index,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn records(&self) -> &[ConceptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records_for(&self, label: &str) -> &[usize] {
        self.index.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Labels of `universe` with no record; priming needs this empty.
    pub fn uncovered_labels(&self, universe: &[String]) -> Vec<String> {
        universe
            .iter()
            .filter(|l| self.records_for(l).is_empty())
            .cloned()
            .collect()
    }
}

/// Embeds one in-vocabulary label in the context of a document.
pub fn embed_concept(
    model: &SiameseModel,
    features: &SemanticsFeatures,
    label: &str,
    doc: &Document,
) -> Result<Vec<f64>> {
    let row = features
        .label_vector(label)
        .ok_or_else(|| Error::Config(format!("label '{label}' is not in the semantics vocabulary")))?;
    let context = features.context_for(doc)?;
    model.embed(row, &context)
}

/// The inferred embedding of any OOV label of a document: the centroid of
/// the embeddings of its in-vocabulary labels, each taken in the context of
/// the in-vocabulary subset. Every OOV label of the document shares this
/// vector. Errors when the document has no in-vocabulary label.
pub fn infer_oov(
    model: &SiameseModel,
    features: &SemanticsFeatures,
    doc: &Document,
) -> Result<Vec<f64>> {
    let vocab: BTreeSet<&str> = features.vocab.iter().map(String::as_str).collect();
    // Sorted so the centroid sum is independent of the label order.
    let iv_labels: BTreeSet<&String> = doc
        .labels
        .iter()
        .filter(|l| vocab.contains(l.as_str()))
        .collect();
    if iv_labels.is_empty() {
        return Err(Error::Inference(format!(
            "document '{}' has no in-vocabulary label to infer from",
            doc.doc_id
        )));
    }
    let context = features.context_for(doc)?;
    let mut centroid = vec![0.0; model.code_dim()];
    for label in &iv_labels {
        let row = features.label_vector(label).unwrap();
        let embedding = model.embed(row, &context)?;
        for (c, e) in centroid.iter_mut().zip(&embedding) {
            *c += e;
        }
    }
    let n = iv_labels.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    Ok(centroid)
}

/// The compressed target of a document: the mean of the embeddings of all
/// its labels, with OOV members resolved through [`infer_oov`].
pub fn compress_target(
    model: &SiameseModel,
    features: &SemanticsFeatures,
    doc: &Document,
) -> Result<Vec<f64>> {
    if doc.labels.is_empty() {
        return Err(Error::Config(format!("document '{}' is empty", doc.doc_id)));
    }
    let vocab: BTreeSet<&str> = features.vocab.iter().map(String::as_str).collect();
    let context = features.context_for(doc)?;
    let mut oov_vector: Option<Vec<f64>> = None;
    let mut sum = vec![0.0; model.code_dim()];
    // Sorted so the mean is independent of the label order.
    let mut ordered: Vec<&String> = doc.labels.iter().collect();
    ordered.sort();
    for label in ordered {
        let embedding = if vocab.contains(label.as_str()) {
            let row = features.label_vector(label).unwrap();
            model.embed(row, &context)?
        } else {
            if oov_vector.is_none() {
                oov_vector = Some(infer_oov(model, features, doc)?);
            }
            oov_vector.clone().unwrap()
        };
        for (s, e) in sum.iter_mut().zip(&embedding) {
            *s += e;
        }
    }
    let n = doc.labels.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Builds the store from the semantics-learning and instance-training
/// documents. Records are deduplicated by (label, doc_id); labels of
/// `universe` left uncovered are reported with a warning.
pub fn build_store(
    model: &SiameseModel,
    features: &SemanticsFeatures,
    semantics_docs: &[&Document],
    instance_docs: &[&Document],
    universe: &[String],
) -> Result<ConceptStore> {
    let vocab: BTreeSet<&str> = features.vocab.iter().map(String::as_str).collect();
    let mut records = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let sets: [(&[&Document], ConceptOrigin); 2] = [
        (semantics_docs, ConceptOrigin::SemanticsSet),
        (instance_docs, ConceptOrigin::InstanceSet),
    ];
    for (docs, origin) in sets {
        for doc in docs {
            let context = features.context_for(doc)?;
            let mut oov_vector: Option<Vec<f64>> = None;
            for label in &doc.labels {
                if !seen.insert((label.clone(), doc.doc_id.clone())) {
                    continue;
                }
                if vocab.contains(label.as_str()) {
                    let row = features.label_vector(label).unwrap();
                    let embedding = model.embed(row, &context)?;
                    records.push(ConceptRecord {
                        label: label.clone(),
                        doc_id: doc.doc_id.clone(),
                        embedding,
                        origin,
                    });
                } else {
                    if oov_vector.is_none() {
                        oov_vector = Some(infer_oov(model, features, doc)?);
                    }
                    records.push(ConceptRecord {
                        label: label.clone(),
                        doc_id: doc.doc_id.clone(),
                        embedding: oov_vector.clone().unwrap(),
                        origin: ConceptOrigin::OovInferred,
                    });
                }
            }
        }
    }
    let store = ConceptStore::new(model.code_dim(), records);
    let uncovered = store.uncovered_labels(universe);
    if !uncovered.is_empty() {
        log::warn!(
            "store covers {} labels; {} uncovered: {}",
            universe.len() - uncovered.len(),
            uncovered.len(),
            uncovered.join(", ")
        );
    }
    Ok(store)
}

/// Minimum Euclidean distance between a point and any record of a label.
pub fn label_distance(s_hat: &[f64], label: &str, store: &ConceptStore) -> Result<f64> {
    let record_ids = store.records_for(label);
    if record_ids.is_empty() {
        return Err(Error::UncoveredLabels(vec![label.to_string()]));
    }
    if s_hat.len() != store.dimension() {
        return Err(Error::dimension(store.dimension(), s_hat.len(), "query point"));
    }
    Ok(record_ids
        .iter()
        .map(|&i| euclidean(s_hat, &store.records()[i].embedding))
        .fold(f64::INFINITY, f64::min))
}

/// Semantic priming: normalized inverse minimum distance over every label of
/// the universe, sorted descending with ties broken by universe order.
///
/// Exact hits take the limit of the formula: all mass goes to the
/// zero-distance labels, split equally.
pub fn prime(
    s_hat: &[f64],
    store: &ConceptStore,
    universe: &[String],
    doc_id: &str,
) -> Result<RankedScores> {
    if !all_finite(s_hat) {
        return Err(Error::Numeric("non-finite query point".into()));
    }
    let uncovered = store.uncovered_labels(universe);
    if !uncovered.is_empty() {
        return Err(Error::UncoveredLabels(uncovered));
    }
    let distances: Vec<f64> = universe
        .iter()
        .map(|label| label_distance(s_hat, label, store))
        .collect::<Result<_>>()?;
    let zeros = distances.iter().filter(|d| **d == 0.0).count();
    let scores: Vec<(String, f64)> = if zeros > 0 {
        universe
            .iter()
            .zip(&distances)
            .map(|(l, d)| {
                (
                    l.clone(),
                    if *d == 0.0 { 1.0 / zeros as f64 } else { 0.0 },
                )
            })
            .collect()
    } else {
        let total: f64 = distances.iter().map(|d| 1.0 / d).sum();
        universe
            .iter()
            .zip(&distances)
            .map(|(l, d)| (l.clone(), (1.0 / d) / total))
            .collect()
    };
    Ok(RankedScores::from_scores(doc_id, scores))
}

/// Mean pairwise distance over the semantics-set records, counting ordered
/// pairs including self-pairs (an `M x M` average).
pub fn scattering(store: &ConceptStore) -> Result<f64> {
    let semantic: Vec<&ConceptRecord> = store
        .records()
        .iter()
        .filter(|r| r.origin == ConceptOrigin::SemanticsSet)
        .collect();
    let m = semantic.len();
    if m < 2 {
        return Err(Error::Config(format!(
            "scattering needs at least 2 semantics-set records, found {m}"
        )));
    }
    let mut sum = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            sum += 2.0 * euclidean(&semantic[i].embedding, &semantic[j].embedding);
        }
    }
    Ok(sum / (m * m) as f64)
}
