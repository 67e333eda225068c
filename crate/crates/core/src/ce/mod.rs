//! Concept-embedding learning with a Siamese pair of weight-tied tanh
//! sub-networks.
//!
//! Each tower receives a concept input (global label features concatenated
//! with the local-context topic histogram), predicts the document's
//! `{-1,+1}` bag-of-words target, and exposes its penultimate activations as
//! the concept embedding. Towers are coupled by a distance loss that pulls
//! the Euclidean gap between two embeddings toward `beta * (1 - S)` for
//! same-polarity pairs and toward `beta` (weighted by `S`) for mixed pairs,
//! where `S` is the context similarity.

mod loss;
mod network;
mod train;

pub use loss::{
    distance_loss, evaluate_pair, pair_gradient, prediction_loss, total_loss, PairEvaluation,
};
pub use network::{
    backward_into, forward, forward_trace, init_network, init_network_pretrained, DenseLayer,
    ForwardTrace, NetworkGradient, PretrainOptions, SubNetworkParams,
};
pub use train::{make_negative, train, Architecture, EpochStats, PreparedDoc};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::{BowTarget, ContextHistogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

/// The three mutually exclusive pair cases of the distance loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCase {
    /// Both inputs are positive examples.
    BothPositive,
    /// Both inputs are synthesized negatives (down-weighted by `rho`).
    BothNegative,
    /// One positive, one negative.
    Mixed,
}

impl PairCase {
    pub fn from_polarities(a: Polarity, b: Polarity) -> PairCase {
        match (a, b) {
            (Polarity::Positive, Polarity::Positive) => PairCase::BothPositive,
            (Polarity::Negative, Polarity::Negative) => PairCase::BothNegative,
            _ => PairCase::Mixed,
        }
    }
}

/// One training example for a tower: a label in the context of a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptInput {
    pub label: String,
    pub label_features: Vec<f64>,
    pub context: ContextHistogram,
    pub polarity: Polarity,
    pub target: BowTarget,
}

impl ConceptInput {
    pub fn input_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.label_features.len() + self.context.len());
        v.extend_from_slice(&self.label_features);
        v.extend_from_slice(&self.context.values);
        v
    }
}

/// Which entries of the target the large weight of the prediction loss lands
/// on. The default weights positives by the fraction of negative entries, so
/// sparse positive entries dominate the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KappaRule {
    #[default]
    NegativeFraction,
    PositiveFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CeHyperParams {
    /// Context-divergence sensitivity of the similarity.
    pub lambda: f64,
    /// Embedding spread scale; defaults to `sqrt(code_dim)`.
    pub beta: Option<f64>,
    /// Weight of the negative-negative distance term.
    pub rho: f64,
    /// Trade-off between prediction and distance losses.
    pub alpha: f64,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub pretrain: bool,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    /// Negatives synthesized per positive example each epoch.
    pub negative_ratio: f64,
    /// Fractions of (both-positive, both-negative, mixed) pairs per epoch.
    pub pair_mix: (f64, f64, f64),
    pub kappa_rule: KappaRule,
    pub seed: u64,
}

impl Default for CeHyperParams {
    fn default() -> Self {
        CeHyperParams {
            lambda: 1.0,
            beta: None,
            rho: 0.5,
            alpha: 1.0,
            learning_rate: 1e-4,
            decay_factor: 0.95,
            decay_every: 200,
            batch_size: 16,
            epochs: 200,
            pretrain: false,
            pretrain_epochs: 15,
            pretrain_learning_rate: 0.01,
            negative_ratio: 1.0,
            pair_mix: (0.5, 0.25, 0.25),
            kappa_rule: KappaRule::NegativeFraction,
            seed: 0,
        }
    }
}

impl CeHyperParams {
    pub fn beta_for(&self, code_dim: usize) -> f64 {
        self.beta.unwrap_or_else(|| (code_dim as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if let Some(beta) = self.beta {
            if beta <= 0.0 {
                return Err(Error::Config("beta must be positive".into()));
            }
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config("rho must lie in [0, 1]".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::Config("alpha must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.negative_ratio < 0.0 {
            return Err(Error::Config("negative_ratio must be nonnegative".into()));
        }
        let (p1, p2, p3) = self.pair_mix;
        if p1 < 0.0 || p2 < 0.0 || p3 < 0.0 || (p1 + p2 + p3 - 1.0).abs() > 1e-9 {
            return Err(Error::Config(
                "pair_mix fractions must be nonnegative and sum to 1".into(),
            ));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay_every must be positive".into()));
        }
        Ok(())
    }
}

/// Training provenance kept alongside the learned parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_train_loss: Option<f64>,
    pub best_val_loss: Option<f64>,
}

/// A trained embedding model: one tower of the Siamese pair plus the input
/// layout it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiameseModel {
    pub params: SubNetworkParams,
    pub hyper: CeHyperParams,
    pub label_dim: usize,
    pub context_dim: usize,
    pub meta: TrainMeta,
}

impl SiameseModel {
    pub fn code_dim(&self) -> usize {
        self.params.code_dim()
    }

    /// The concept-embedding map: coding-layer activations for a label's
    /// global features in a local context.
    pub fn embed(&self, label_features: &[f64], context: &ContextHistogram) -> Result<Vec<f64>> {
        if label_features.len() != self.label_dim {
            return Err(Error::dimension(
                self.label_dim,
                label_features.len(),
                "label features",
            ));
        }
        if context.len() != self.context_dim {
            return Err(Error::dimension(
                self.context_dim,
                context.len(),
                "context histogram",
            ));
        }
        let mut input = Vec::with_capacity(self.label_dim + self.context_dim);
        input.extend_from_slice(label_features);
        input.extend_from_slice(&context.values);
        let trace = forward_trace(&self.params, &input)?;
        Ok(trace.code().to_vec())
    }
}
