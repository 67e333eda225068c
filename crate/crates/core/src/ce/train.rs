//! Mini-batch training loop for the Siamese embedding architecture.
//!
//! Each epoch shuffles the positive concepts, synthesizes negatives by
//! coupling a document with a label it does not carry (target flipped,
//! context unchanged), samples pairs covering the three distance-loss cases
//! in configured proportions, and applies one SGD step per mini-batch with a
//! stepwise-decayed learning rate. The returned model carries the parameters
//! that achieved the best validation loss.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::semantics::{bow_target, BowTarget, ContextHistogram, SemanticsFeatures};
use crate::vecmath::splitmix64;

use super::loss::pair_gradient;
use super::network::{init_network, init_network_pretrained, NetworkGradient, PretrainOptions};
use super::{CeHyperParams, ConceptInput, Polarity, SiameseModel, TrainMeta};

/// A document with its cached context histogram and bag-of-words target.
#[derive(Debug, Clone)]
pub struct PreparedDoc {
    pub doc_id: String,
    pub labels: Vec<String>,
    pub context: ContextHistogram,
    pub target: BowTarget,
}

pub(crate) fn prepare_docs(
    features: &SemanticsFeatures,
    docs: &[&Document],
) -> Result<Vec<PreparedDoc>> {
    docs.iter()
        .map(|doc| {
            Ok(PreparedDoc {
                doc_id: doc.doc_id.clone(),
                labels: doc.labels.clone(),
                context: features.context_for(doc)?,
                target: bow_target(doc, &features.vocab)?,
            })
        })
        .collect()
}

fn positive_inputs(
    features: &SemanticsFeatures,
    docs: &[PreparedDoc],
) -> Result<Vec<(usize, ConceptInput)>> {
    let mut positives = Vec::new();
    for (doc_idx, doc) in docs.iter().enumerate() {
        for label in &doc.labels {
            let row = features.label_vector(label).ok_or_else(|| {
                Error::Config(format!("label '{label}' has no global feature vector"))
            })?;
            positives.push((
                doc_idx,
                ConceptInput {
                    label: label.clone(),
                    label_features: row.to_vec(),
                    context: doc.context.clone(),
                    polarity: Polarity::Positive,
                    target: doc.target.clone(),
                },
            ));
        }
    }
    Ok(positives)
}

/// Synthesizes a negative example for `doc`: a label drawn uniformly from
/// the vocabulary outside the document's label set, with the document's
/// context and the flipped target. Returns `None` when the document already
/// covers the whole vocabulary.
pub fn make_negative(
    doc: &PreparedDoc,
    features: &SemanticsFeatures,
    rng: &mut ChaCha8Rng,
) -> Option<ConceptInput> {
    let member: std::collections::BTreeSet<&str> =
        doc.labels.iter().map(String::as_str).collect();
    let candidates: Vec<usize> = features
        .vocab
        .iter()
        .enumerate()
        .filter(|(_, l)| !member.contains(l.as_str()))
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        log::warn!(
            "document '{}' covers the whole vocabulary; cannot synthesize a negative",
            doc.doc_id
        );
        return None;
    }
    let idx = candidates[rng.gen_range(0..candidates.len())];
    Some(ConceptInput {
        label: features.vocab[idx].clone(),
        label_features: features.gram.row(idx).to_vec(),
        context: doc.context.clone(),
        polarity: Polarity::Negative,
        target: doc.target.flipped(),
    })
}

#[derive(Debug, Clone, Copy)]
enum PairRef {
    PosPos(usize, usize),
    NegNeg(usize, usize),
    PosNeg(usize, usize),
}

fn build_pairs(
    n_pos: usize,
    n_neg: usize,
    mix: (f64, f64, f64),
    n_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PairRef>> {
    if n_neg == 0 && (mix.1 > 0.0 || mix.2 > 0.0) {
        return Err(Error::Config(
            "pair mix requires negatives but none are available".into(),
        ));
    }
    let quotas = [mix.0, mix.1, mix.2].map(|f| f * n_pairs as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n_pairs - assigned) {
        counts[i] += 1;
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..counts[0] {
        pairs.push(PairRef::PosPos(rng.gen_range(0..n_pos), rng.gen_range(0..n_pos)));
    }
    for _ in 0..counts[1] {
        pairs.push(PairRef::NegNeg(rng.gen_range(0..n_neg), rng.gen_range(0..n_neg)));
    }
    for _ in 0..counts[2] {
        pairs.push(PairRef::PosNeg(rng.gen_range(0..n_pos), rng.gen_range(0..n_neg)));
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

/// One row of the loss trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Trains the embedding model on the semantics-learning documents.
/// Deterministic given the hyperparameter seed.
pub fn train(
    features: &SemanticsFeatures,
    train_docs: &[&Document],
    val_docs: &[&Document],
    hyper: &CeHyperParams,
    architecture: &Architecture,
) -> Result<(SiameseModel, Vec<EpochStats>)> {
    hyper.validate()?;
    let prepared = prepare_docs(features, train_docs)?;
    let positives_with_doc = positive_inputs(features, &prepared)?;
    if positives_with_doc.is_empty() {
        return Err(Error::Config("no training concepts".into()));
    }
    let positives: Vec<&ConceptInput> = positives_with_doc.iter().map(|(_, c)| c).collect();
    let doc_of_positive: Vec<usize> = positives_with_doc.iter().map(|(d, _)| *d).collect();

    let layer_sizes = architecture.layer_sizes(features);
    let mut params = if hyper.pretrain {
        let data: Vec<Vec<f64>> = positives.iter().map(|c| c.input_vector()).collect();
        init_network_pretrained(
            &layer_sizes,
            hyper.seed,
            &data,
            &PretrainOptions {
                epochs: hyper.pretrain_epochs,
                learning_rate: hyper.pretrain_learning_rate,
            },
        )?
        .0
    } else {
        init_network(&layer_sizes, hyper.seed)?
    };

    // Fixed validation pairs, built once from a dedicated RNG stream.
    let val_prepared = prepare_docs(features, val_docs)?;
    let val_pairs = {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(hyper.seed ^ 0x7661_6c69_6461_7465));
        let val_pos_with_doc = positive_inputs(features, &val_prepared)?;
        let val_pos: Vec<ConceptInput> =
            val_pos_with_doc.iter().map(|(_, c)| c.clone()).collect();
        if val_pos.is_empty() {
            Vec::new()
        } else {
            let mut val_neg = Vec::new();
            for (doc_idx, _) in &val_pos_with_doc {
                if let Some(neg) = make_negative(&val_prepared[*doc_idx], features, &mut rng) {
                    val_neg.push(neg);
                }
            }
            let refs = build_pairs(
                val_pos.len(),
                val_neg.len(),
                if val_neg.is_empty() { (1.0, 0.0, 0.0) } else { hyper.pair_mix },
                val_pos.len(),
                &mut rng,
            )?;
            refs.into_iter()
                .map(|r| match r {
                    PairRef::PosPos(i, j) => (val_pos[i].clone(), val_pos[j].clone()),
                    PairRef::NegNeg(i, j) => (val_neg[i].clone(), val_neg[j].clone()),
                    PairRef::PosNeg(i, j) => (val_pos[i].clone(), val_neg[j].clone()),
                })
                .collect()
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut trace = Vec::with_capacity(hyper.epochs);
    let mut best: Option<(f64, usize, crate::ce::SubNetworkParams)> = None;
    let n_pos = positives.len();
    let n_neg_target = (hyper.negative_ratio * n_pos as f64).round() as usize;

    let mut final_train_loss = None;
    for epoch in 0..hyper.epochs {
        let learning_rate =
            hyper.learning_rate * hyper.decay_factor.powi((epoch / hyper.decay_every) as i32);

        let mut perm: Vec<usize> = (0..n_pos).collect();
        perm.shuffle(&mut rng);

        let mut negatives: Vec<ConceptInput> = Vec::with_capacity(n_neg_target);
        for i in 0..n_neg_target {
            let pos_idx = perm[i % n_pos];
            let doc = &prepared[doc_of_positive[pos_idx]];
            if let Some(neg) = make_negative(doc, features, &mut rng) {
                negatives.push(neg);
            }
        }

        let pairs = build_pairs(n_pos, negatives.len(), hyper.pair_mix, n_pos, &mut rng)?;

        let mut epoch_loss = 0.0;
        for batch in pairs.chunks(hyper.batch_size) {
            let mut batch_grad = NetworkGradient::zeros_like(&params);
            for pair in batch {
                let (a, b): (&ConceptInput, &ConceptInput) = match pair {
                    PairRef::PosPos(i, j) => (positives[*i], positives[*j]),
                    PairRef::NegNeg(i, j) => (&negatives[*i], &negatives[*j]),
                    PairRef::PosNeg(i, j) => (positives[*i], &negatives[*j]),
                };
                let (eval, grad) = pair_gradient(a, b, &params, hyper).map_err(|e| {
                    Error::Numeric(format!("training diverged at epoch {epoch}: {e}"))
                })?;
                epoch_loss += eval.loss;
                batch_grad.add_assign(&grad);
            }
            batch_grad.scale(1.0 / batch.len() as f64);
            params.apply_gradient(&batch_grad, learning_rate);
        }
        let train_loss = epoch_loss / pairs.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}: loss {train_loss}"
            )));
        }
        final_train_loss = Some(train_loss);

        let val_loss = if val_pairs.is_empty() {
            None
        } else {
            let mut sum = 0.0;
            for (a, b) in &val_pairs {
                sum += super::loss::total_loss(a, b, &params, hyper).map_err(|e| {
                    Error::Numeric(format!("validation failed at epoch {epoch}: {e}"))
                })?;
            }
            Some(sum / val_pairs.len() as f64)
        };

        if let Some(vl) = val_loss {
            if best.as_ref().map_or(true, |(b, _, _)| vl < *b) {
                best = Some((vl, epoch, params.clone()));
            }
        }

        trace.push(EpochStats {
            epoch,
            learning_rate,
            train_loss,
            val_loss,
        });
    }

    // Best-validation parameters when a validation set exists, otherwise the
    // final iterate.
    let last_epoch = hyper.epochs.saturating_sub(1);
    let (best_params, best_epoch, best_val_loss) = match best {
        Some((loss, epoch, p)) => (p, epoch, Some(loss)),
        None => (params, last_epoch, None),
    };

    let model = SiameseModel {
        params: best_params,
        hyper: hyper.clone(),
        label_dim: features.vocab.len(),
        context_dim: features.topics.topic_count,
        meta: TrainMeta {
            seed: hyper.seed,
            epochs_run: hyper.epochs,
            best_epoch,
            final_train_loss,
            best_val_loss,
        },
    };
    Ok((model, trace))
}

/// Hidden-layer widths and coding width; the input and output widths follow
/// from the semantics features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub hidden_sizes: Vec<usize>,
    pub code_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            hidden_sizes: vec![100, 100],
            code_dim: 50,
        }
    }
}

impl Architecture {
    pub fn layer_sizes(&self, features: &SemanticsFeatures) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 3);
        sizes.push(features.input_dim());
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(self.code_dim);
        sizes.push(features.vocab.len());
        sizes
    }
}
