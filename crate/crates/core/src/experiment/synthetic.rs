//! Planted-topic synthetic datasets: a desk-scale stand-in for the annotated
//! multimedia corpora. Each document draws its labels from one planted topic
//! group (occasionally mixing in a second), and its instance vector is the
//! topic's cluster center plus Gaussian noise, so instance features genuinely
//! correlate with document semantics.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::instance_features::InstanceVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub labels_per_topic: usize,
    pub documents: usize,
    pub min_labels: usize,
    pub max_labels: usize,
    pub instance_dim: usize,
    /// Standard deviation of the per-coordinate instance noise.
    pub noise: f64,
    /// Fraction of documents drawing labels from two topics; their instance
    /// vectors sit between the two cluster centers, weighted by label
    /// counts. Composite contexts multiply the number of distinct local
    /// contexts well beyond the topic count.
    pub mixed_fraction: f64,
    /// Distance scale of the planted cluster centers.
    pub center_norm: f64,
    /// Scale of the per-label offset directions mixed into an instance
    /// vector, so features reflect which labels were drawn, not only the
    /// topic.
    pub label_offset: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            topics: 4,
            labels_per_topic: 12,
            documents: 600,
            min_labels: 3,
            max_labels: 6,
            instance_dim: 16,
            noise: 0.25,
            mixed_fraction: 0.1,
            center_norm: 3.0,
            label_offset: 0.8,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::Config("synthetic data needs at least 2 topics".into()));
        }
        if self.min_labels == 0 || self.min_labels > self.max_labels {
            return Err(Error::Config("invalid label-count range".into()));
        }
        if self.max_labels > self.labels_per_topic {
            return Err(Error::Config(
                "max_labels cannot exceed labels_per_topic".into(),
            ));
        }
        if self.documents == 0 || self.instance_dim == 0 {
            return Err(Error::Config("documents and instance_dim must be positive".into()));
        }
        if self.noise < 0.0 || !(0.0..=1.0).contains(&self.mixed_fraction) {
            return Err(Error::Config("invalid noise or mixed_fraction".into()));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vec<String> {
        (0..self.topics)
            .flat_map(|t| (0..self.labels_per_topic).map(move |l| format!("t{t:02}_l{l:02}")))
            .collect()
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `count` distinct labels of one topic, via partial shuffle.
fn pick_labels(topic: usize, count: usize, per_topic: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut offsets: Vec<usize> = (0..per_topic).collect();
    for pick in 0..count.min(per_topic) {
        let swap = rng.gen_range(pick..offsets.len());
        offsets.swap(pick, swap);
    }
    offsets[..count.min(per_topic)]
        .iter()
        .map(|l| format!("t{topic:02}_l{l:02}"))
        .collect()
}

/// Generates the corpus and the matching instance vectors. Deterministic
/// for a fixed seed.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<(Corpus, Vec<InstanceVector>)> {
    config.validate()?;
    let mut rng = rand::SeedableRng::seed_from_u64(seed);
    let rng: &mut ChaCha8Rng = &mut rng;

    let random_direction = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> {
        let raw: Vec<f64> = (0..config.instance_dim).map(|_| gaussian(rng)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        raw.iter().map(|v| v / norm * scale).collect()
    };
    let centers: Vec<Vec<f64>> = (0..config.topics)
        .map(|_| random_direction(rng, config.center_norm))
        .collect();
    // One offset direction per vocabulary label, in vocabulary order.
    let label_offsets: BTreeMap<String, Vec<f64>> = config
        .vocabulary()
        .into_iter()
        .map(|label| (label, random_direction(rng, config.label_offset)))
        .collect();

    let mut documents = Vec::with_capacity(config.documents);
    let mut vectors = Vec::with_capacity(config.documents);
    for i in 0..config.documents {
        let primary = i % config.topics;
        let count = rng.gen_range(config.min_labels..=config.max_labels);
        let secondary = if rng.gen::<f64>() < config.mixed_fraction && count >= 2 {
            Some((primary + 1 + rng.gen_range(0..config.topics - 1)) % config.topics)
        } else {
            None
        };
        let from_secondary = match secondary {
            Some(_) => rng.gen_range(1..count),
            None => 0,
        };
        let mut labels = pick_labels(primary, count - from_secondary, config.labels_per_topic, rng);
        if let Some(topic) = secondary {
            labels.extend(pick_labels(topic, from_secondary, config.labels_per_topic, rng));
        }

        // The instance sits at the label-count weighted mix of its topics'
        // centers, shifted by the mean of its labels' offset directions,
        // plus noise. Features therefore identify the drawn label set, not
        // just the topic blend.
        let w2 = from_secondary as f64 / count as f64;
        let w1 = 1.0 - w2;
        let c2 = centers[secondary.unwrap_or(primary)].clone();
        let m = labels.len() as f64;
        let mut values: Vec<f64> = centers[primary]
            .iter()
            .zip(&c2)
            .map(|(a, b)| w1 * a + w2 * b + config.noise * gaussian(rng))
            .collect();
        for label in &labels {
            for (v, o) in values.iter_mut().zip(&label_offsets[label]) {
                *v += o / m;
            }
        }
        let doc_id = format!("doc{i:04}");
        documents.push(Document::new(doc_id.clone(), labels)?);
        vectors.push(InstanceVector {
            instance_id: doc_id,
            values,
        });
    }
    let corpus = Corpus::from_documents(documents, Some(config.vocabulary()))?;
    Ok((corpus, vectors))
}
