//! Annotated corpora, label vocabularies and experiment split plans.
//!
//! A corpus is a list of documents, each a set of labels attached to one
//! instance. The label vocabulary is partitioned into training (T), zero-shot
//! (ZSL) and out-of-vocabulary (OOV) classes, and documents are assigned to
//! semantics-learning and instance-mapping subsets according to one of three
//! protocols: within-corpus ([`SplitProtocol::Wct`]), within-corpus with
//! reserved OOV labels ([`SplitProtocol::WctOov`]) and cross-corpora
//! ([`SplitProtocol::Cct`], where the embedding model is imported and only
//! instance mapping is trained).

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One annotated instance: an identifier plus its ordered, duplicate-free
/// label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub labels: Vec<String>,
}

impl Document {
    /// Builds a document, deduplicating labels while preserving first
    /// occurrence order. Errors if no labels remain.
    pub fn new(doc_id: impl Into<String>, labels: impl IntoIterator<Item = String>) -> Result<Self> {
        let doc_id = doc_id.into();
        let mut seen = BTreeSet::new();
        let labels: Vec<String> = labels
            .into_iter()
            .filter(|l| seen.insert(l.clone()))
            .collect();
        if labels.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: format!("document '{doc_id}' has an empty label set"),
            });
        }
        Ok(Document { doc_id, labels })
    }

    pub fn label_set(&self) -> BTreeSet<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    pub fn contains_any(&self, labels: &BTreeSet<String>) -> bool {
        self.labels.iter().any(|l| labels.contains(l))
    }

    /// True when every label of the document belongs to `labels`.
    pub fn within(&self, labels: &BTreeSet<String>) -> bool {
        self.labels.iter().all(|l| labels.contains(l))
    }
}

/// A set of documents plus the label vocabulary they are interpreted against.
///
/// When a vocabulary is supplied explicitly its order is kept verbatim;
/// otherwise the vocabulary is the sorted union of all document labels.
/// Labels seen in documents but absent from an explicit vocabulary are kept
/// in `extra_labels`; they become OOV candidates during splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub extra_labels: Vec<String>,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>, vocabulary: Option<Vec<String>>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Config("corpus has no documents".into()));
        }
        let mut ids = BTreeSet::new();
        for doc in &documents {
            if !ids.insert(doc.doc_id.clone()) {
                return Err(Error::Config(format!("duplicate doc_id '{}'", doc.doc_id)));
            }
        }
        let used: BTreeSet<String> = documents
            .iter()
            .flat_map(|d| d.labels.iter().cloned())
            .collect();
        match vocabulary {
            Some(vocab) => {
                let mut seen = BTreeSet::new();
                for label in &vocab {
                    if !seen.insert(label.clone()) {
                        return Err(Error::Config(format!("duplicate vocabulary label '{label}'")));
                    }
                }
                let extra_labels: Vec<String> =
                    used.iter().filter(|l| !seen.contains(*l)).cloned().collect();
                if !extra_labels.is_empty() {
                    log::warn!(
                        "{} document label(s) outside the supplied vocabulary (treated as OOV candidates)",
                        extra_labels.len()
                    );
                }
                Ok(Corpus {
                    documents,
                    vocabulary: vocab,
                    extra_labels,
                })
            }
            None => Ok(Corpus {
                documents,
                vocabulary: used.into_iter().collect(),
                extra_labels: Vec::new(),
            }),
        }
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.doc_id.clone()).collect()
    }

    /// All labels, vocabulary plus extras, in stable order.
    pub fn all_labels(&self) -> Vec<String> {
        let mut labels = self.vocabulary.clone();
        labels.extend(self.extra_labels.iter().cloned());
        labels
    }
}

#[derive(Debug, Deserialize)]
struct RecordJson {
    doc_id: String,
    labels: Vec<String>,
}

/// Loads a corpus from line-delimited JSON records
/// `{"doc_id": string, "labels": [string, ...]}`.
///
/// An optional vocabulary file (one label per line, order significant) fixes
/// the vocabulary; otherwise it is derived from the records.
pub fn load_corpus(path: &Path, vocab_path: Option<&Path>) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RecordJson = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let doc = Document::new(record.doc_id, record.labels).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                line: line_no,
                message,
            },
            other => other,
        })?;
        documents.push(doc);
    }
    let vocabulary = match vocab_path {
        Some(vp) => {
            let text = std::fs::read_to_string(vp)?;
            Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    Corpus::from_documents(documents, vocabulary)
}

/// Target fractions for the T/ZSL/OOV label partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelFractions {
    pub t: f64,
    pub zsl: f64,
    pub oov: f64,
}

impl Default for LabelFractions {
    fn default() -> Self {
        LabelFractions {
            t: 0.75,
            zsl: 0.25,
            oov: 0.0,
        }
    }
}

/// Disjoint partition of a vocabulary into T-class, ZSL-class and OOV labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPartition {
    pub t_labels: Vec<String>,
    pub zsl_labels: Vec<String>,
    pub oov_labels: Vec<String>,
}

impl LabelPartition {
    pub fn t_set(&self) -> BTreeSet<String> {
        self.t_labels.iter().cloned().collect()
    }
    pub fn zsl_set(&self) -> BTreeSet<String> {
        self.zsl_labels.iter().cloned().collect()
    }
    pub fn oov_set(&self) -> BTreeSet<String> {
        self.oov_labels.iter().cloned().collect()
    }

    /// The semantics-learning vocabulary: T and ZSL labels, sorted.
    pub fn in_vocabulary(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .t_labels
            .iter()
            .chain(self.zsl_labels.iter())
            .cloned()
            .collect();
        labels.sort();
        labels
    }

    /// Every label of the partition, sorted.
    pub fn universe(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .t_labels
            .iter()
            .chain(self.zsl_labels.iter())
            .chain(self.oov_labels.iter())
            .cloned()
            .collect();
        labels.sort();
        labels
    }
}

/// Apportions `n` seats to `fractions` by largest remainder, so the sizes
/// always sum to `n` exactly. Ties go to the earlier entry.
fn largest_remainder(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "fractions must be nonnegative and sum to 1 (got sum {sum})"
        )));
    }
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Randomly partitions `vocab` into T/ZSL/OOV label sets with sizes given by
/// largest-remainder rounding of `fractions`. Deterministic for a fixed seed.
pub fn split_labels(vocab: &[String], fractions: LabelFractions, seed: u64) -> Result<LabelPartition> {
    if vocab.is_empty() {
        return Err(Error::Config("cannot split an empty vocabulary".into()));
    }
    let sizes = largest_remainder(vocab.len(), &[fractions.t, fractions.zsl, fractions.oov])?;
    if sizes[0] == 0 {
        return Err(Error::Config(
            "label fractions produce an empty T-class set".into(),
        ));
    }
    let mut shuffled: Vec<String> = vocab.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut t_labels: Vec<String> = shuffled[..sizes[0]].to_vec();
    let mut zsl_labels: Vec<String> = shuffled[sizes[0]..sizes[0] + sizes[1]].to_vec();
    let mut oov_labels: Vec<String> = shuffled[sizes[0] + sizes[1]..].to_vec();
    t_labels.sort();
    zsl_labels.sort();
    oov_labels.sort();
    Ok(LabelPartition {
        t_labels,
        zsl_labels,
        oov_labels,
    })
}

/// Instance-split protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProtocol {
    /// Within-corpus test: label vocabulary split into T and ZSL classes.
    Wct,
    /// Within-corpus test with a reserved OOV label set excluded from
    /// semantics learning.
    WctOov,
    /// Cross-corpora test: the embedding model is imported, only instance
    /// mapping is trained here.
    Cct,
}

/// Document-split proportions. The reference setup puts two thirds of the
/// documents in the semantics-side split (D1) and carves the semantics
/// training/validation sets out of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRatios {
    /// Fraction of documents assigned to D1 (semantics side).
    pub d1_fraction: f64,
    /// Fraction of the semantics-eligible pool used for semantics training.
    pub s_tr_fraction: f64,
    /// Fraction of the semantics-eligible pool used for semantics validation.
    pub s_val_fraction: f64,
    /// Absolute semantics-validation size; overrides `s_val_fraction`.
    #[serde(default)]
    pub s_val_count: Option<usize>,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            d1_fraction: 2.0 / 3.0,
            s_tr_fraction: 0.767,
            s_val_fraction: 0.09,
            s_val_count: None,
        }
    }
}

/// The full per-trial assignment of labels and documents to experiment roles.
/// All id lists are sorted so serialization is reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub t_labels: Vec<String>,
    pub zsl_labels: Vec<String>,
    pub oov_labels: Vec<String>,
    /// Semantics-learning training documents.
    pub s_tr: Vec<String>,
    /// Semantics-learning validation documents.
    pub s_val: Vec<String>,
    /// Instance-mapping training documents (no ZSL or OOV labels).
    pub im_tr: Vec<String>,
    /// Instance-mapping validation documents (no ZSL or OOV labels).
    pub im_val: Vec<String>,
    /// Test documents: every document with at least one ZSL-class label.
    pub im_tst: Vec<String>,
    /// Instance-mapping training documents for the OOV scenarios
    /// (superset of `im_tr` in WCT-OOV, the whole training pool in CCT).
    pub oov_tr: Vec<String>,
    /// Test documents carrying both ZSL and OOV labels (WCT-OOV), or all
    /// ZSL-labelled documents (CCT).
    pub oov_tst: Vec<String>,
    /// Documents unusable under the protocol (labels entirely OOV).
    pub rejected: Vec<String>,
    pub protocol: SplitProtocol,
    pub seed: u64,
}

impl SplitPlan {
    /// The instance-mapping training set the protocol actually uses.
    pub fn training_docs(&self) -> &[String] {
        match self.protocol {
            SplitProtocol::Wct => &self.im_tr,
            SplitProtocol::WctOov | SplitProtocol::Cct => &self.oov_tr,
        }
    }

    /// The test set the protocol evaluates on.
    pub fn test_docs(&self) -> &[String] {
        match self.protocol {
            SplitProtocol::Wct => &self.im_tst,
            SplitProtocol::WctOov | SplitProtocol::Cct => &self.oov_tst,
        }
    }

    pub fn partition(&self) -> LabelPartition {
        LabelPartition {
            t_labels: self.t_labels.clone(),
            zsl_labels: self.zsl_labels.clone(),
            oov_labels: self.oov_labels.clone(),
        }
    }
}

fn sorted(mut ids: Vec<String>) -> Vec<String> {
    ids.sort();
    ids
}

/// Assigns every corpus document to its protocol role.
///
/// For within-corpus protocols the corpus is first split into D1 and D2 by
/// `ratios.d1_fraction`; semantics sets come from D1, instance-mapping
/// training/validation from the ZSL-free documents of D1/D2, and every
/// document carrying a ZSL-class label becomes a test document. The OOV
/// variant additionally keeps OOV-labelled documents out of the semantics
/// sets and extends the training pool with documents restricted to T and OOV
/// labels. Deterministic for a fixed seed.
pub fn split_instances(
    corpus: &Corpus,
    partition: &LabelPartition,
    protocol: SplitProtocol,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<SplitPlan> {
    let covered: BTreeSet<String> = partition.universe().into_iter().collect();
    for doc in &corpus.documents {
        if let Some(missing) = doc.labels.iter().find(|l| !covered.contains(*l)) {
            return Err(Error::Config(format!(
                "document '{}' uses label '{}' outside the label partition",
                doc.doc_id, missing
            )));
        }
    }
    if !(ratios.d1_fraction > 0.0 && ratios.d1_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "d1_fraction must lie in (0, 1], got {}",
            ratios.d1_fraction
        )));
    }
    if matches!(protocol, SplitProtocol::Wct) && !partition.oov_labels.is_empty() {
        return Err(Error::Protocol(
            "WCT does not admit OOV labels; use the OOV protocol".into(),
        ));
    }

    let t = partition.t_set();
    let zsl = partition.zsl_set();
    let oov = partition.oov_set();
    let mut t_or_oov = t.clone();
    t_or_oov.extend(oov.iter().cloned());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled: Vec<&Document> = corpus.documents.iter().collect();
    shuffled.shuffle(&mut rng);

    let rejected: Vec<String> = if matches!(protocol, SplitProtocol::Wct) {
        Vec::new()
    } else {
        let ids: Vec<String> = shuffled
            .iter()
            .filter(|d| d.within(&oov))
            .map(|d| d.doc_id.clone())
            .collect();
        if !ids.is_empty() {
            log::warn!(
                "{} document(s) carry only OOV labels and cannot be used: {}",
                ids.len(),
                ids.join(", ")
            );
        }
        ids
    };
    let rejected_set: BTreeSet<&str> = rejected.iter().map(String::as_str).collect();
    let usable: Vec<&Document> = shuffled
        .iter()
        .copied()
        .filter(|d| !rejected_set.contains(d.doc_id.as_str()))
        .collect();

    let im_tst: Vec<String> = usable
        .iter()
        .filter(|d| d.contains_any(&zsl))
        .map(|d| d.doc_id.clone())
        .collect();
    if im_tst.is_empty() {
        return Err(Error::Protocol(
            "no document carries a ZSL-class label; nothing to evaluate".into(),
        ));
    }

    let plan = match protocol {
        SplitProtocol::Wct | SplitProtocol::WctOov => {
            let n1 = ((usable.len() as f64) * ratios.d1_fraction).round() as usize;
            let n1 = n1.min(usable.len());
            let d1 = &usable[..n1];
            let d2 = &usable[n1..];

            // Semantics pool: D1, minus OOV-labelled documents in the OOV variant.
            let sem_pool: Vec<&Document> = d1
                .iter()
                .copied()
                .filter(|d| !d.contains_any(&oov))
                .collect();
            let s_val_size = match ratios.s_val_count {
                Some(count) => count,
                None => ((sem_pool.len() as f64) * ratios.s_val_fraction).round() as usize,
            };
            let s_tr_size = ((sem_pool.len() as f64) * ratios.s_tr_fraction).round() as usize;
            if s_tr_size + s_val_size > sem_pool.len() {
                return Err(Error::Config(format!(
                    "semantics ratios request {} documents but only {} are eligible",
                    s_tr_size + s_val_size,
                    sem_pool.len()
                )));
            }
            let s_tr: Vec<String> = sem_pool[..s_tr_size].iter().map(|d| d.doc_id.clone()).collect();
            let s_val: Vec<String> = sem_pool[s_tr_size..s_tr_size + s_val_size]
                .iter()
                .map(|d| d.doc_id.clone())
                .collect();

            let im_tr: Vec<String> = d1
                .iter()
                .filter(|d| d.within(&t))
                .map(|d| d.doc_id.clone())
                .collect();
            let im_val: Vec<String> = d2
                .iter()
                .filter(|d| d.within(&t))
                .map(|d| d.doc_id.clone())
                .collect();

            let (oov_tr, oov_tst) = if matches!(protocol, SplitProtocol::WctOov) {
                let im_val_set: BTreeSet<&str> = im_val.iter().map(String::as_str).collect();
                let mut oov_tr = im_tr.clone();
                oov_tr.extend(
                    usable
                        .iter()
                        .filter(|d| {
                            d.within(&t_or_oov)
                                && d.contains_any(&oov)
                                && !im_val_set.contains(d.doc_id.as_str())
                        })
                        .map(|d| d.doc_id.clone()),
                );
                let oov_tst: Vec<String> = usable
                    .iter()
                    .filter(|d| d.contains_any(&zsl) && d.contains_any(&oov))
                    .map(|d| d.doc_id.clone())
                    .collect();
                if oov_tst.is_empty() {
                    return Err(Error::Protocol(
                        "no document carries both ZSL and OOV labels; OOV protocol has nothing to evaluate"
                            .into(),
                    ));
                }
                (oov_tr, oov_tst)
            } else {
                (Vec::new(), Vec::new())
            };

            SplitPlan {
                t_labels: partition.t_labels.clone(),
                zsl_labels: partition.zsl_labels.clone(),
                oov_labels: partition.oov_labels.clone(),
                s_tr: sorted(s_tr),
                s_val: sorted(s_val),
                im_tr: sorted(im_tr),
                im_val: sorted(im_val),
                im_tst: sorted(im_tst),
                oov_tr: sorted(oov_tr),
                oov_tst: sorted(oov_tst),
                rejected: sorted(rejected),
                protocol,
                seed,
            }
        }
        SplitProtocol::Cct => {
            let eligible: Vec<&Document> = usable
                .iter()
                .copied()
                .filter(|d| d.within(&t_or_oov))
                .collect();
            let n_tr = ((eligible.len() as f64) * ratios.d1_fraction).round() as usize;
            let n_tr = n_tr.min(eligible.len());
            let oov_tr: Vec<String> = eligible[..n_tr].iter().map(|d| d.doc_id.clone()).collect();
            let im_val: Vec<String> = eligible[n_tr..].iter().map(|d| d.doc_id.clone()).collect();
            SplitPlan {
                t_labels: partition.t_labels.clone(),
                zsl_labels: partition.zsl_labels.clone(),
                oov_labels: partition.oov_labels.clone(),
                s_tr: Vec::new(),
                s_val: Vec::new(),
                im_tr: Vec::new(),
                im_val: sorted(im_val),
                im_tst: sorted(im_tst.clone()),
                oov_tr: sorted(oov_tr),
                oov_tst: sorted(im_tst),
                rejected: sorted(rejected),
                protocol,
                seed,
            }
        }
    };

    debug_assert!(plan
        .im_tr
        .iter()
        .chain(plan.oov_tr.iter())
        .all(|id| !corpus.document(id).unwrap().contains_any(&zsl)));
    Ok(plan)
}
