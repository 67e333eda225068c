//! Ranking metrics and cross-trial reporting.
//!
//! Example-based evaluation ranks all labels for one instance (precision at
//! k, averaged over the first `|truth|` positions — E-MAP). Concept-based
//! evaluation ranks all test instances for one label and averages
//! interpolated precision at the 11 standard recall levels — C-MAP. Reports
//! aggregate per-trial values into mean and standard error per test subset.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::LabelPartition;
use crate::error::{Error, Result};

/// Per-instance relatedness scores over all known labels, descending, ties
/// broken by the producer's label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedScores {
    pub doc_id: String,
    pub scores: Vec<(String, f64)>,
}

impl RankedScores {
    /// Sorts descending by score; the stable sort keeps the given label
    /// order on ties.
    pub fn from_scores(doc_id: impl Into<String>, scores: Vec<(String, f64)>) -> Self {
        let mut scores = scores;
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        RankedScores {
            doc_id: doc_id.into(),
            scores,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.scores.iter().map(|(l, _)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Fraction of the top `k` ranked labels that are in the truth set.
pub fn precision_at_k(k: usize, truth: &BTreeSet<String>, ranked: &RankedScores) -> Result<f64> {
    if k == 0 || k > ranked.len() {
        return Err(Error::Config(format!(
            "k = {k} outside 1..={}",
            ranked.len()
        )));
    }
    let hits = ranked
        .labels()
        .take(k)
        .filter(|l| truth.contains(*l))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Example-based MAP: mean of P@i over the first `|truth|` rank positions.
pub fn e_map(truth: &BTreeSet<String>, ranked: &RankedScores) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Config("empty truth set".into()));
    }
    if ranked.len() < truth.len() {
        return Err(Error::Config(format!(
            "ranking holds {} labels but the truth set has {}",
            ranked.len(),
            truth.len()
        )));
    }
    let mut sum = 0.0;
    for i in 1..=truth.len() {
        sum += precision_at_k(i, truth, ranked)?;
    }
    Ok(sum / truth.len() as f64)
}

/// Fraction of the positive instances recovered in the top `k` of a ranked
/// instance list.
pub fn recall_at_k(k: usize, positives: &BTreeSet<String>, ranked_ids: &[String]) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Config("empty positive set".into()));
    }
    if k == 0 || k > ranked_ids.len() {
        return Err(Error::Config(format!(
            "k = {k} outside 1..={}",
            ranked_ids.len()
        )));
    }
    let hits = ranked_ids
        .iter()
        .take(k)
        .filter(|id| positives.contains(*id))
        .count();
    Ok(hits as f64 / positives.len() as f64)
}

/// Concept-based average precision for one label: instances ranked by score
/// (ties broken by instance id), precision interpolated at the 11 standard
/// recall levels `0.0, 0.1, ..., 1.0` as the maximum precision at any rank
/// whose recall reaches the level.
pub fn c_map(scored_instances: &[(String, f64)], positives: &BTreeSet<String>) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Config("label has no positive instance".into()));
    }
    let mut ranked = scored_instances.to_vec();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

    // Precision/recall profile over ranks.
    let mut profile = Vec::with_capacity(ranked.len());
    let mut hits = 0usize;
    for (k, (id, _)) in ranked.iter().enumerate() {
        if positives.contains(id) {
            hits += 1;
        }
        let precision = hits as f64 / (k + 1) as f64;
        let recall = hits as f64 / positives.len() as f64;
        profile.push((recall, precision));
    }

    let mut sum = 0.0;
    for level in 0..=10 {
        let r = level as f64 / 10.0;
        let p = profile
            .iter()
            .filter(|(recall, _)| *recall >= r - 1e-12)
            .map(|(_, precision)| *precision)
            .fold(0.0, f64::max);
        sum += p;
    }
    Ok(sum / 11.0)
}

/// The reporting subsets of the test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSubset {
    /// Instances whose truth uses only in-vocabulary T-class labels.
    Training,
    /// Instances with at least one ZSL-class label.
    Zsl,
    /// Every test instance.
    All,
    /// OOV-label positions only, on instances with OOV truth labels.
    Oov,
}

impl TestSubset {
    pub fn display_name(&self) -> &'static str {
        match self {
            TestSubset::Training => "Training Labels",
            TestSubset::Zsl => "ZSL Labels",
            TestSubset::All => "All Labels",
            TestSubset::Oov => "OOV Labels",
        }
    }
}

/// Restricts scoring to OOV-label positions: the ranked list keeps only OOV
/// labels (order preserved) and the truth set is intersected with the OOV
/// set. This single function pins down the OOV-subset reading used across
/// the crate.
pub fn oov_restrict(
    ranked: &RankedScores,
    truth: &BTreeSet<String>,
    oov: &BTreeSet<String>,
) -> (RankedScores, BTreeSet<String>) {
    let scores: Vec<(String, f64)> = ranked
        .scores
        .iter()
        .filter(|(l, _)| oov.contains(l))
        .cloned()
        .collect();
    let truth: BTreeSet<String> = truth.intersection(oov).cloned().collect();
    (
        RankedScores {
            doc_id: ranked.doc_id.clone(),
            scores,
        },
        truth,
    )
}

/// Per-subset metrics of a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCell {
    pub e_map: f64,
    pub c_map: f64,
    pub instance_count: usize,
    pub label_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub cells: BTreeMap<TestSubset, SubsetCell>,
}

/// Which subsets an instance belongs to, given its full truth set.
fn subsets_of(
    truth: &BTreeSet<String>,
    t_in_vocab: &BTreeSet<String>,
    zsl: &BTreeSet<String>,
    oov: &BTreeSet<String>,
) -> Vec<TestSubset> {
    let mut subsets = vec![TestSubset::All];
    if truth.iter().all(|l| t_in_vocab.contains(l)) {
        subsets.push(TestSubset::Training);
    }
    if truth.iter().any(|l| zsl.contains(l)) {
        subsets.push(TestSubset::Zsl);
    }
    if truth.iter().any(|l| oov.contains(l)) {
        subsets.push(TestSubset::Oov);
    }
    subsets
}

/// Computes E-MAP and C-MAP per subset for one trial.
///
/// `truths` maps each scored instance to its ground-truth label set;
/// `gamma_s` is the semantics vocabulary (used for the Training subset
/// definition). Labels without a positive instance in a subset are skipped
/// from that subset's C-MAP macro average.
pub fn compute_trial_metrics(
    scores: &[RankedScores],
    truths: &BTreeMap<String, BTreeSet<String>>,
    partition: &LabelPartition,
    gamma_s: &BTreeSet<String>,
) -> Result<TrialMetrics> {
    let zsl = partition.zsl_set();
    let oov = partition.oov_set();
    let t_in_vocab: BTreeSet<String> =
        partition.t_set().intersection(gamma_s).cloned().collect();

    let mut per_subset_instances: BTreeMap<TestSubset, Vec<&RankedScores>> = BTreeMap::new();
    for ranked in scores {
        let truth = truths.get(&ranked.doc_id).ok_or_else(|| {
            Error::Config(format!("no ground truth for instance '{}'", ranked.doc_id))
        })?;
        for subset in subsets_of(truth, &t_in_vocab, &zsl, &oov) {
            per_subset_instances.entry(subset).or_default().push(ranked);
        }
    }

    let mut cells = BTreeMap::new();
    for (subset, instances) in per_subset_instances {
        if instances.is_empty() {
            continue;
        }
        // E-MAP: mean per-instance, with OOV restriction when applicable.
        let mut emap_sum = 0.0;
        let mut emap_count = 0usize;
        for ranked in &instances {
            let truth = &truths[&ranked.doc_id];
            let value = if subset == TestSubset::Oov {
                let (restricted, truth_oov) = oov_restrict(ranked, truth, &oov);
                e_map(&truth_oov, &restricted)?
            } else {
                e_map(truth, ranked)?
            };
            emap_sum += value;
            emap_count += 1;
        }

        // C-MAP: macro average over labels with positives in the subset.
        let label_pool: Vec<&String> = match subset {
            TestSubset::Oov => partition.oov_labels.iter().collect(),
            _ => partition
                .t_labels
                .iter()
                .chain(partition.zsl_labels.iter())
                .chain(partition.oov_labels.iter())
                .collect(),
        };
        let score_maps: Vec<(&str, BTreeMap<&str, f64>)> = instances
            .iter()
            .map(|r| {
                (
                    r.doc_id.as_str(),
                    r.scores
                        .iter()
                        .map(|(l, s)| (l.as_str(), *s))
                        .collect::<BTreeMap<&str, f64>>(),
                )
            })
            .collect();
        let mut cmap_sum = 0.0;
        let mut cmap_labels = 0usize;
        for label in label_pool {
            let positives: BTreeSet<String> = instances
                .iter()
                .filter(|r| truths[&r.doc_id].contains(label))
                .map(|r| r.doc_id.clone())
                .collect();
            if positives.is_empty() {
                log::debug!(
                    "subset {subset:?}: label '{label}' has no positive instance; skipped"
                );
                continue;
            }
            let scored: Vec<(String, f64)> = score_maps
                .iter()
                .filter_map(|(id, map)| map.get(label.as_str()).map(|s| (id.to_string(), *s)))
                .collect();
            if scored.is_empty() {
                continue;
            }
            cmap_sum += c_map(&scored, &positives)?;
            cmap_labels += 1;
        }
        if cmap_labels == 0 {
            log::warn!("subset {subset:?}: no label has a positive instance");
            continue;
        }
        cells.insert(
            subset,
            SubsetCell {
                e_map: emap_sum / emap_count as f64,
                c_map: cmap_sum / cmap_labels as f64,
                instance_count: emap_count,
                label_count: cmap_labels,
            },
        );
    }
    Ok(TrialMetrics { cells })
}

/// Mean plus standard error of a metric across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation divided by sqrt(trials); 0 for one trial.
    pub stderr: f64,
    pub trials: usize,
}

fn stat(values: &[f64]) -> Stat {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        var.sqrt() / (n as f64).sqrt()
    };
    Stat {
        mean,
        stderr,
        trials: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub e_map: Stat,
    pub c_map: Stat,
}

/// Cross-trial aggregation; subsets absent from every trial stay absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subsets: BTreeMap<TestSubset, ReportCell>,
    pub trials: usize,
    pub failed_trials: Vec<usize>,
}

pub fn aggregate(trials: &[TrialMetrics], failed_trials: Vec<usize>) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::Config("no successful trial to aggregate".into()));
    }
    let mut subsets = BTreeMap::new();
    for subset in [
        TestSubset::Training,
        TestSubset::Zsl,
        TestSubset::All,
        TestSubset::Oov,
    ] {
        let emaps: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.cells.get(&subset).map(|c| c.e_map))
            .collect();
        let cmaps: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.cells.get(&subset).map(|c| c.c_map))
            .collect();
        if emaps.is_empty() {
            continue;
        }
        if emaps.len() == 1 && trials.len() > 1 {
            log::warn!("subset {subset:?} present in a single trial only");
        }
        subsets.insert(
            subset,
            ReportCell {
                e_map: stat(&emaps),
                c_map: stat(&cmaps),
            },
        );
    }
    Ok(EvalReport {
        subsets,
        trials: trials.len(),
        failed_trials,
    })
}

impl EvalReport {
    /// Plain-text table: subset rows, E-MAP / C-MAP columns, cells as
    /// percentage `mean±stderr`.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<18}{:>16}{:>16}\n", "Subset", "E-MAP", "C-MAP"));
        for (subset, cell) in &self.subsets {
            out.push_str(&format!(
                "{:<18}{:>16}{:>16}\n",
                subset.display_name(),
                format_stat(&cell.e_map),
                format_stat(&cell.c_map),
            ));
        }
        let failures = if self.failed_trials.is_empty() {
            String::new()
        } else {
            format!(", {} failed", self.failed_trials.len())
        };
        out.push_str(&format!(
            "({} trial{}{})\n",
            self.trials,
            if self.trials == 1 { "" } else { "s" },
            failures
        ));
        out
    }
}

fn format_stat(stat: &Stat) -> String {
    format!("{:.2}\u{b1}{:.2}", 100.0 * stat.mean, 100.0 * stat.stderr)
}
