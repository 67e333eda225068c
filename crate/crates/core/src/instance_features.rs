//! Fixed-length instance input vectors.
//!
//! Frame-based inputs (audio-style) pass through a Gaussian-mixture codebook:
//! each frame is assigned its most likely code word and the assignment
//! histogram, normalized to sum to one, is the instance vector. Precomputed
//! vectors (image-style) are loaded and validated as-is.

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::all_finite;

/// A variable-length sequence of feature frames for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    pub instance_id: String,
    pub frames: Vec<Vec<f64>>,
}

impl FrameSequence {
    pub fn validate(&self, dim: Option<usize>) -> Result<usize> {
        if self.frames.is_empty() {
            return Err(Error::Config(format!(
                "instance '{}' has no frames",
                self.instance_id
            )));
        }
        let d = dim.unwrap_or(self.frames[0].len());
        for frame in &self.frames {
            if frame.len() != d {
                return Err(Error::dimension(d, frame.len(), &self.instance_id));
            }
            if !all_finite(frame) {
                return Err(Error::Numeric(format!(
                    "instance '{}' has a non-finite frame value",
                    self.instance_id
                )));
            }
        }
        Ok(d)
    }
}

/// Appends first- and second-difference features to every frame (central
/// differences, boundary frames replicated), tripling the frame width.
pub fn augment_with_derivatives(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = frames.len();
    let central = |seq: &[Vec<f64>], i: usize| -> Vec<f64> {
        let prev = &seq[i.saturating_sub(1)];
        let next = &seq[(i + 1).min(n - 1)];
        prev.iter().zip(next).map(|(p, q)| (q - p) / 2.0).collect()
    };
    let first: Vec<Vec<f64>> = (0..n).map(|i| central(frames, i)).collect();
    let second: Vec<Vec<f64>> = (0..n).map(|i| central(&first, i)).collect();
    (0..n)
        .map(|i| {
            let mut out = frames[i].clone();
            out.extend_from_slice(&first[i]);
            out.extend_from_slice(&second[i]);
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Diagonal covariance entries, floored during fitting.
    pub variance: Vec<f64>,
    pub weight: f64,
}

impl GaussianComponent {
    /// Log density of a diagonal Gaussian at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for ((xi, mu), var) in x.iter().zip(&self.mean).zip(&self.variance) {
            let diff = xi - mu;
            sum += (2.0 * std::f64::consts::PI * var).ln() + diff * diff / var;
        }
        -0.5 * sum
    }
}

/// A Gaussian-mixture codebook over frame space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub components: Vec<GaussianComponent>,
    /// Include mixing weights in the assignment argmax.
    pub weighted_assignment: bool,
}

impl Codebook {
    pub fn size(&self) -> usize {
        self.components.len()
    }

    pub fn frame_dim(&self) -> usize {
        self.components[0].mean.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodebookConfig {
    pub size: usize,
    pub em_iters: usize,
    pub weighted_assignment: bool,
    pub variance_floor: f64,
    /// Augment frames with first/second differences before fitting.
    pub derivatives: bool,
    pub seed: u64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            size: 128,
            em_iters: 50,
            weighted_assignment: true,
            variance_floor: 1e-6,
            derivatives: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookFit {
    pub codebook: Codebook,
    /// Mean log-likelihood per EM iteration; non-decreasing.
    pub log_likelihood: Vec<f64>,
}

fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Squared-distance based seeding: the first mean is a random frame, each
/// further mean a frame drawn with probability proportional to its squared
/// distance from the nearest chosen mean.
fn seed_means(frames: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    means.push(frames[rng.gen_range(0..frames.len())].to_vec());
    let mut dist2: Vec<f64> = frames
        .iter()
        .map(|f| crate::vecmath::squared_distance(f, &means[0]))
        .collect();
    while means.len() < k {
        let total: f64 = dist2.iter().sum();
        let chosen = if total <= 0.0 {
            rng.gen_range(0..frames.len())
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut idx = frames.len() - 1;
            for (i, d) in dist2.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        means.push(frames[chosen].to_vec());
        for (i, f) in frames.iter().enumerate() {
            let d = crate::vecmath::squared_distance(f, means.last().unwrap());
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    means
}

/// Fits the codebook on the pooled frames of the given sequences by EM with
/// diagonal covariances. Deterministic for a fixed seed; log-likelihood is
/// non-decreasing over iterations. A component whose weight collapses is
/// re-seeded once, a second collapse is an error.
pub fn fit_codebook(sequences: &[FrameSequence], config: &CodebookConfig) -> Result<CodebookFit> {
    if config.size == 0 {
        return Err(Error::Config("codebook size must be positive".into()));
    }
    let mut pooled: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for seq in sequences {
        let augmented;
        let frames: &[Vec<f64>] = if config.derivatives {
            augmented = augment_with_derivatives(&seq.frames);
            &augmented
        } else {
            &seq.frames
        };
        let seq_check = FrameSequence {
            instance_id: seq.instance_id.clone(),
            frames: frames.to_vec(),
        };
        let d = seq_check.validate(dim)?;
        dim = Some(d);
        pooled.extend(frames.iter().cloned());
    }
    let dim = dim.ok_or_else(|| Error::Config("no frame sequences supplied".into()))?;
    if pooled.len() < 10 * config.size {
        return Err(Error::Config(format!(
            "{} pooled frames cannot support a codebook of {} words (need {})",
            pooled.len(),
            config.size,
            10 * config.size
        )));
    }

    let frames: Vec<&[f64]> = pooled.iter().map(Vec::as_slice).collect();
    let n = frames.len();
    let k = config.size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Global variance initializes every component's spread.
    let mut global_mean = vec![0.0; dim];
    for f in &frames {
        for (g, x) in global_mean.iter_mut().zip(*f) {
            *g += x;
        }
    }
    global_mean.iter_mut().for_each(|g| *g /= n as f64);
    let mut global_var = vec![0.0; dim];
    for f in &frames {
        for ((v, x), mu) in global_var.iter_mut().zip(*f).zip(&global_mean) {
            *v += (x - mu) * (x - mu);
        }
    }
    global_var
        .iter_mut()
        .for_each(|v| *v = (*v / n as f64).max(config.variance_floor));

    let means = seed_means(&frames, k, &mut rng);
    let mut components: Vec<GaussianComponent> = means
        .into_iter()
        .map(|mean| GaussianComponent {
            mean,
            variance: global_var.clone(),
            weight: 1.0 / k as f64,
        })
        .collect();

    let mut reseeded = vec![false; k];
    let mut trace = Vec::with_capacity(config.em_iters);
    let mut log_resp = vec![0.0; k];
    let mut resp = vec![vec![0.0; k]; n];
    for _ in 0..config.em_iters {
        // E step.
        let mut ll = 0.0;
        for (i, f) in frames.iter().enumerate() {
            for (j, c) in components.iter().enumerate() {
                log_resp[j] = c.weight.ln() + c.log_density(f);
            }
            let norm = logsumexp(&log_resp);
            ll += norm;
            for j in 0..k {
                resp[i][j] = (log_resp[j] - norm).exp();
            }
        }
        trace.push(ll / n as f64);

        // M step.
        for j in 0..k {
            let nj: f64 = (0..n).map(|i| resp[i][j]).sum();
            if nj / (n as f64) < 1e-8 {
                if reseeded[j] {
                    return Err(Error::Numeric(format!(
                        "codebook component {j} collapsed twice"
                    )));
                }
                log::warn!("codebook component {j} collapsed; re-seeding");
                reseeded[j] = true;
                components[j].mean = frames[rng.gen_range(0..n)].to_vec();
                components[j].variance = global_var.clone();
                components[j].weight = 1.0 / k as f64;
                continue;
            }
            components[j].weight = nj / n as f64;
            let mut mean = vec![0.0; dim];
            for (i, f) in frames.iter().enumerate() {
                for (m, x) in mean.iter_mut().zip(*f) {
                    *m += resp[i][j] * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nj);
            let mut var = vec![0.0; dim];
            for (i, f) in frames.iter().enumerate() {
                for ((v, x), mu) in var.iter_mut().zip(*f).zip(&mean) {
                    *v += resp[i][j] * (x - mu) * (x - mu);
                }
            }
            var.iter_mut()
                .for_each(|v| *v = (*v / nj).max(config.variance_floor));
            components[j].mean = mean;
            components[j].variance = var;
        }
        // Renormalize weights (re-seeding may have disturbed them).
        let total_weight: f64 = components.iter().map(|c| c.weight).sum();
        components.iter_mut().for_each(|c| c.weight /= total_weight);
    }

    Ok(CodebookFit {
        codebook: Codebook {
            components,
            weighted_assignment: config.weighted_assignment,
        },
        log_likelihood: trace,
    })
}

/// Most likely code word for one frame, computed in the log domain; ties go
/// to the lowest index.
pub fn assign_codeword(frame: &[f64], codebook: &Codebook) -> Result<usize> {
    if frame.len() != codebook.frame_dim() {
        return Err(Error::dimension(codebook.frame_dim(), frame.len(), "frame"));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (j, c) in codebook.components.iter().enumerate() {
        let mut score = c.log_density(frame);
        if codebook.weighted_assignment {
            score += c.weight.ln();
        }
        if score > best_score {
            best_score = score;
            best = j;
        }
    }
    Ok(best)
}

/// An instance's fixed-length input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVector {
    pub instance_id: String,
    pub values: Vec<f64>,
}

/// Bag-of-codewords: histogram of frame assignments, normalized to sum to
/// one so track length does not matter.
pub fn abow(sequence: &FrameSequence, codebook: &Codebook) -> Result<InstanceVector> {
    sequence.validate(Some(codebook.frame_dim()))?;
    let mut counts = vec![0.0; codebook.size()];
    for frame in &sequence.frames {
        counts[assign_codeword(frame, codebook)?] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(InstanceVector {
        instance_id: sequence.instance_id.clone(),
        values: counts,
    })
}

#[derive(Debug, Deserialize)]
struct VectorRecord {
    instance_id: String,
    values: Vec<f64>,
}

/// Loads precomputed instance vectors from line-delimited JSON
/// `{"instance_id": ..., "values": [...]}`, validating dimension and
/// finiteness. No normalization is applied.
pub fn load_vectors(path: &Path, expected_dim: usize) -> Result<Vec<InstanceVector>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut vectors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VectorRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if record.values.len() != expected_dim {
            return Err(Error::dimension(
                expected_dim,
                record.values.len(),
                format!("instance '{}'", record.instance_id),
            ));
        }
        if !all_finite(&record.values) {
            return Err(Error::Numeric(format!(
                "instance '{}' has a non-finite feature value",
                record.instance_id
            )));
        }
        vectors.push(InstanceVector {
            instance_id: record.instance_id,
            values: record.values,
        });
    }
    Ok(vectors)
}
