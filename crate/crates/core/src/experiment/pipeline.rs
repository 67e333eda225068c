//! The staged experiment pipeline. Every stage reads its inputs from the
//! artifact tree and writes its own artifact, so stages can run standalone
//! from the command line or chained by [`run_experiment`]. Trials are
//! independent; a failing trial is recorded and the remaining trials
//! continue.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ce::{train, EpochStats, SiameseModel};
use crate::concept_space::{
    build_store, compress_target, embed_concept, prime, ConceptOrigin, ConceptRecord, ConceptStore,
};
use crate::corpus::{
    load_corpus, split_instances, split_labels, Corpus, Document, SplitPlan, SplitProtocol,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate, compute_trial_metrics, EvalReport, RankedScores, TrialMetrics,
};
use crate::im::{predict_im, regression_error, train_im, ImModel, RegressionStats};
use crate::instance_features::{abow, fit_codebook, Codebook, FrameSequence, InstanceVector};
use crate::semantics::{LdaConfig, SemanticsFeatures};
use crate::vecmath::{fnv1a, splitmix64};

use super::artifact::{config_hash, read_artifact, write_artifact};
use super::{generate_synthetic, DatasetConfig, ExperimentConfig, FeatureSource};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Split,
    TrainCe,
    Embed,
    BuildStore,
    TrainIm,
    Predict,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Split,
        Stage::TrainCe,
        Stage::Embed,
        Stage::BuildStore,
        Stage::TrainIm,
        Stage::Predict,
        Stage::Evaluate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::TrainCe => "train-ce",
            Stage::Embed => "embed",
            Stage::BuildStore => "build-store",
            Stage::TrainIm => "train-im",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.iter().copied().find(|s| s.name() == name)
    }
}

/// Per-trial result: ranking metrics plus, for full-pipeline runs, the
/// regression statistics of the instance mapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    pub regression: Option<RegressionStats>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out_dir: Option<PathBuf>,
    /// Runs a single trial instead of all of them.
    pub trial: Option<usize>,
    /// Overrides the config's base seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub outcomes: Vec<(usize, TrialOutcome)>,
    pub failed: Vec<(usize, String)>,
    pub out_dir: PathBuf,
}

/// Runs the full pipeline: per trial all stages in order, then a report
/// aggregated over the successful trials.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    run_with_mode(config, options, false)
}

/// The error-free upper bound: the regression stage is skipped and every
/// test instance is primed from its ground-truth compressed target. Reports
/// have the same structure as [`run_experiment`].
pub fn error_free_upper_bound(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    run_with_mode(config, options, true)
}

fn run_with_mode(
    config: &ExperimentConfig,
    options: &RunOptions,
    error_free: bool,
) -> Result<RunOutcome> {
    config.validate()?;
    let mut effective = config.clone();
    if let Some(seed) = options.seed {
        effective.seed = seed;
    }
    let out_dir = options
        .out_dir
        .clone()
        .unwrap_or_else(|| effective.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let hash = config_hash(&effective)?;
    write_artifact(
        &out_dir.join("config.json"),
        "experiment_config",
        &hash,
        effective.seed,
        &effective,
    )?;

    let trials: Vec<usize> = match options.trial {
        Some(t) => {
            if t >= effective.trials {
                return Err(Error::Config(format!(
                    "trial {t} out of range 0..{}",
                    effective.trials
                )));
            }
            vec![t]
        }
        None => (0..effective.trials).collect(),
    };

    let mut outcomes = Vec::new();
    let mut failed = Vec::new();
    for trial in trials {
        let runner = TrialRunner::new(&effective, &out_dir, trial, error_free)?;
        match runner.run_all() {
            Ok(outcome) => outcomes.push((trial, outcome)),
            Err(e) => {
                log::error!("trial {trial} failed: {e}");
                failed.push((trial, e.to_string()));
            }
        }
    }
    if outcomes.is_empty() {
        let reasons: Vec<String> = failed.iter().map(|(t, e)| format!("trial {t}: {e}")).collect();
        return Err(Error::Protocol(format!(
            "every trial failed: {}",
            reasons.join("; ")
        )));
    }

    let metrics: Vec<TrialMetrics> = outcomes.iter().map(|(_, o)| o.metrics.clone()).collect();
    let report = aggregate(&metrics, failed.iter().map(|(t, _)| *t).collect())?;
    write_artifact(
        &out_dir.join("report.json"),
        "experiment_report",
        &hash,
        effective.seed,
        &report,
    )?;
    let mut table = format!("# config {hash}\n");
    table.push_str(&report.render_table());
    std::fs::write(out_dir.join("report.txt"), table)?;

    Ok(RunOutcome {
        report,
        outcomes,
        failed,
        out_dir,
    })
}

/// Executes the stages of one trial against the artifact tree.
pub struct TrialRunner<'a> {
    config: &'a ExperimentConfig,
    out_dir: PathBuf,
    pub trial: usize,
    pub trial_seed: u64,
    hash: String,
    error_free: bool,
}

impl<'a> TrialRunner<'a> {
    pub fn new(
        config: &'a ExperimentConfig,
        out_dir: &Path,
        trial: usize,
        error_free: bool,
    ) -> Result<Self> {
        Ok(TrialRunner {
            config,
            out_dir: out_dir.to_path_buf(),
            trial,
            trial_seed: config.seed.wrapping_add(trial as u64),
            hash: config_hash(config)?,
            error_free,
        })
    }

    pub fn trial_dir(&self) -> PathBuf {
        self.out_dir.join(format!("trial_{:03}", self.trial))
    }

    fn path(&self, stage: &str) -> PathBuf {
        self.trial_dir()
            .join(format!("{stage}.seed{}.json", self.trial_seed))
    }

    fn stage_seed(&self, name: &str) -> u64 {
        splitmix64(self.trial_seed ^ fnv1a(name.as_bytes()))
    }

    pub fn run_all(&self) -> Result<TrialOutcome> {
        for stage in Stage::ALL {
            if stage == Stage::TrainIm && self.error_free {
                continue;
            }
            self.run_stage(stage)?;
        }
        let outcome: TrialOutcome =
            read_artifact(&self.path("trial_report"), "trial_report", Some(&self.hash))?.data;
        Ok(outcome)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        let result = match stage {
            Stage::Ingest => self.ingest(),
            Stage::Split => self.split(),
            Stage::TrainCe => self.train_ce(),
            Stage::Embed => self.embed(),
            Stage::BuildStore => self.build_store(),
            Stage::TrainIm => self.train_im(),
            Stage::Predict => self.predict(),
            Stage::Evaluate => self.evaluate().map(|_| ()),
        };
        result.map_err(|e| e.in_stage(stage.name()))
    }

    // ----- stage implementations -----

    fn ingest(&self) -> Result<()> {
        match &self.config.dataset {
            DatasetConfig::Files {
                corpus,
                vocabulary,
                features,
            } => {
                let corpus = load_corpus(corpus, vocabulary.as_deref())?;
                self.write("corpus", "corpus", &corpus)?;
                match features {
                    FeatureSource::Vectors { path, dim } => {
                        let vectors = crate::instance_features::load_vectors(path, *dim)?;
                        self.write("vectors", "instance_vectors", &vectors)?;
                    }
                    FeatureSource::Frames { path, dim } => {
                        let frames = load_frames(path, *dim)?;
                        self.write("frames", "frame_sequences", &frames)?;
                    }
                }
            }
            DatasetConfig::Synthetic(synth) => {
                // All trials of a run share one dataset; only splits differ.
                let data_seed = splitmix64(self.config.seed ^ fnv1a(b"synthetic-data"));
                let (corpus, vectors) = generate_synthetic(synth, data_seed)?;
                self.write("corpus", "corpus", &corpus)?;
                self.write("vectors", "instance_vectors", &vectors)?;
            }
        }
        Ok(())
    }

    fn split(&self) -> Result<()> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan = match &self.config.split_file {
            Some(path) => load_split_plan(path)?,
            None => {
                // Cross-corpora runs partition the imported vocabulary; every
                // local label outside it is OOV. Within-corpus runs partition
                // the corpus vocabulary, with labels beyond an explicit
                // vocabulary file as OOV candidates.
                let (base_vocab, mut extra_oov) =
                    if matches!(self.config.protocol, SplitProtocol::Cct) {
                        let path = self.config.imported_semantics.as_ref().ok_or_else(|| {
                            Error::Config("cross-corpora runs need imported_semantics".into())
                        })?;
                        let semantics: SemanticsFeatures =
                            read_artifact(path, "semantics_features", None)?.data;
                        let imported: std::collections::BTreeSet<&str> =
                            semantics.vocab.iter().map(String::as_str).collect();
                        let extras: Vec<String> = corpus
                            .all_labels()
                            .into_iter()
                            .filter(|l| !imported.contains(l.as_str()))
                            .collect();
                        (semantics.vocab.clone(), extras)
                    } else {
                        (corpus.vocabulary.clone(), corpus.extra_labels.clone())
                    };
                let mut partition = split_labels(
                    &base_vocab,
                    self.config.label_fractions,
                    self.stage_seed("split-labels"),
                )?;
                if !extra_oov.is_empty() {
                    partition.oov_labels.append(&mut extra_oov);
                    partition.oov_labels.sort();
                    partition.oov_labels.dedup();
                }
                split_instances(
                    &corpus,
                    &partition,
                    self.config.protocol,
                    &self.config.ratios,
                    self.stage_seed("split-instances"),
                )?
            }
        };
        self.write("split", "split_plan", &plan)
    }

    fn train_ce(&self) -> Result<()> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan: SplitPlan = self.read("split", "split_plan")?;

        if let (Some(sem_path), Some(model_path)) = (
            &self.config.imported_semantics,
            &self.config.imported_ce_model,
        ) {
            // Imported embedding model: re-wrap into this run's tree.
            let semantics: SemanticsFeatures =
                read_artifact(sem_path, "semantics_features", None)?.data;
            let model: SiameseModel = read_artifact(model_path, "ce_model", None)?.data;
            self.write("semantics", "semantics_features", &semantics)?;
            self.write("ce_model", "ce_model", &model)?;
            self.write("ce_trace", "ce_loss_trace", &Vec::<EpochStats>::new())?;
            return Ok(());
        }
        if matches!(self.config.protocol, SplitProtocol::Cct) {
            return Err(Error::Config(
                "cross-corpora runs import their embedding model".into(),
            ));
        }

        let by_id = doc_index(&corpus);
        let s_tr = collect_docs(&by_id, &plan.s_tr)?;
        let s_val = collect_docs(&by_id, &plan.s_val)?;
        if s_tr.is_empty() {
            return Err(Error::Protocol("semantics training set is empty".into()));
        }
        let vocab_s = plan.partition().in_vocabulary();
        let lda = LdaConfig {
            seed: self.stage_seed("lda"),
            ..self.config.lda.clone()
        };
        let features = SemanticsFeatures::build_with(
            &s_tr,
            &vocab_s,
            &lda,
            self.config.normalize_label_features,
        )?;
        let hyper = crate::ce::CeHyperParams {
            seed: self.stage_seed("ce-train"),
            ..self.config.ce.hyper.clone()
        };
        let (model, trace) = train(&features, &s_tr, &s_val, &hyper, &self.config.ce.architecture)?;
        self.write("semantics", "semantics_features", &features)?;
        self.write("ce_model", "ce_model", &model)?;
        self.write("ce_trace", "ce_loss_trace", &trace)
    }

    fn embed(&self) -> Result<()> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan: SplitPlan = self.read("split", "split_plan")?;
        let features: SemanticsFeatures = self.read("semantics", "semantics_features")?;
        let model: SiameseModel = self.read("ce_model", "ce_model")?;
        let by_id = doc_index(&corpus);
        let mut records = Vec::new();
        for id in plan.s_tr.iter().chain(plan.s_val.iter()) {
            let doc = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("unknown document '{id}'")))?;
            for label in &doc.labels {
                records.push(ConceptRecord {
                    label: label.clone(),
                    doc_id: doc.doc_id.clone(),
                    embedding: embed_concept(&model, &features, label, doc)?,
                    origin: ConceptOrigin::SemanticsSet,
                });
            }
        }
        self.write("concepts", "concept_embeddings", &records)
    }

    fn build_store(&self) -> Result<()> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan: SplitPlan = self.read("split", "split_plan")?;
        let features: SemanticsFeatures = self.read("semantics", "semantics_features")?;
        let model: SiameseModel = self.read("ce_model", "ce_model")?;
        let by_id = doc_index(&corpus);
        let semantics_docs: Vec<&Document> = plan
            .s_tr
            .iter()
            .chain(plan.s_val.iter())
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect();
        let instance_docs = collect_docs(&by_id, plan.training_docs())?;
        let universe = plan.partition().universe();
        let mut store = build_store(&model, &features, &semantics_docs, &instance_docs, &universe)?;
        if let Some(path) = &self.config.imported_concepts {
            // Cross-corpora runs carry the source run's semantics concepts.
            let imported: Vec<ConceptRecord> =
                read_artifact(path, "concept_embeddings", None)?.data;
            for record in &imported {
                if record.embedding.len() != model.code_dim() {
                    return Err(Error::dimension(
                        model.code_dim(),
                        record.embedding.len(),
                        format!("imported concept ({}, {})", record.label, record.doc_id),
                    ));
                }
            }
            let mut records = store.records().to_vec();
            records.extend(imported);
            store = crate::concept_space::ConceptStore::new(model.code_dim(), records);
            let uncovered = store.uncovered_labels(&universe);
            if !uncovered.is_empty() {
                log::warn!(
                    "{} label(s) stay uncovered after the import: {}",
                    uncovered.len(),
                    uncovered.join(", ")
                );
            }
        }
        self.write("store", "concept_store", &store)
    }

    fn train_im(&self) -> Result<()> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan: SplitPlan = self.read("split", "split_plan")?;
        let features: SemanticsFeatures = self.read("semantics", "semantics_features")?;
        let model: SiameseModel = self.read("ce_model", "ce_model")?;
        let vectors = self.instance_vectors(&plan)?;
        let by_id = doc_index(&corpus);

        let training = collect_docs(&by_id, plan.training_docs())?;
        if training.len() < 2 {
            return Err(Error::Protocol(format!(
                "instance-mapping training needs at least 2 documents, found {}",
                training.len()
            )));
        }
        let mut inputs = Vec::with_capacity(training.len());
        let mut targets = Vec::with_capacity(training.len());
        let mut named_targets = Vec::with_capacity(training.len());
        for doc in &training {
            let x = vectors.get(doc.doc_id.as_str()).ok_or_else(|| {
                Error::Config(format!("no instance vector for document '{}'", doc.doc_id))
            })?;
            let s = compress_target(&model, &features, doc)?;
            inputs.push(x.clone());
            named_targets.push((doc.doc_id.clone(), s.clone()));
            targets.push(s);
        }
        self.write("targets", "regression_targets", &named_targets)?;
        let im = train_im(&inputs, &targets, &self.config.svr)?;
        self.write("im_model", "im_model", &im)
    }

    fn predict(&self) -> Result<()> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan: SplitPlan = self.read("split", "split_plan")?;
        let features: SemanticsFeatures = self.read("semantics", "semantics_features")?;
        let model: SiameseModel = self.read("ce_model", "ce_model")?;
        let store: ConceptStore = self.read("store", "concept_store")?;
        let by_id = doc_index(&corpus);
        let universe = plan.partition().universe();

        let im: Option<ImModel> = if self.error_free {
            None
        } else {
            Some(self.read("im_model", "im_model")?)
        };
        let vectors = if self.error_free {
            BTreeMap::new()
        } else {
            self.instance_vectors(&plan)?
        };

        // Scored pool: the protocol's test documents plus the held-out
        // validation documents, whose truth is T-only — these populate the
        // Training-Labels report rows.
        let mut scored_ids: Vec<String> = plan.test_docs().to_vec();
        scored_ids.extend(plan.im_val.iter().cloned());
        scored_ids.sort();
        scored_ids.dedup();

        let mut predictions = Vec::new();
        for id in &scored_ids {
            let doc = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("unknown test document '{id}'")))?;
            let s_hat = match &im {
                Some(im) => {
                    let x = vectors.get(id.as_str()).ok_or_else(|| {
                        Error::Config(format!("no instance vector for document '{id}'"))
                    })?;
                    predict_im(im, x)?
                }
                // Error-free condition: the ground-truth compressed target.
                None => compress_target(&model, &features, doc)?,
            };
            predictions.push(prime(&s_hat, &store, &universe, id)?);
        }
        self.write("predictions", "predictions", &predictions)
    }

    fn evaluate(&self) -> Result<TrialOutcome> {
        let corpus: Corpus = self.read("corpus", "corpus")?;
        let plan: SplitPlan = self.read("split", "split_plan")?;
        let features: SemanticsFeatures = self.read("semantics", "semantics_features")?;
        let predictions: Vec<RankedScores> = self.read("predictions", "predictions")?;
        let by_id = doc_index(&corpus);

        let mut truths = BTreeMap::new();
        for ranked in &predictions {
            let doc = by_id.get(ranked.doc_id.as_str()).ok_or_else(|| {
                Error::Config(format!("unknown scored document '{}'", ranked.doc_id))
            })?;
            truths.insert(
                doc.doc_id.clone(),
                doc.labels.iter().cloned().collect::<std::collections::BTreeSet<_>>(),
            );
        }
        let gamma_s = features.vocab.iter().cloned().collect();
        let metrics =
            compute_trial_metrics(&predictions, &truths, &plan.partition(), &gamma_s)?;

        let regression = if self.error_free {
            None
        } else {
            match self.regression_stats(&corpus, &plan, &features) {
                Ok(stats) => Some(stats),
                Err(e) => {
                    log::warn!("regression statistics unavailable: {e}");
                    None
                }
            }
        };

        let outcome = TrialOutcome {
            metrics,
            regression,
        };
        self.write("trial_report", "trial_report", &outcome)?;
        Ok(outcome)
    }

    fn regression_stats(
        &self,
        corpus: &Corpus,
        plan: &SplitPlan,
        features: &SemanticsFeatures,
    ) -> Result<RegressionStats> {
        let model: SiameseModel = self.read("ce_model", "ce_model")?;
        let im: ImModel = self.read("im_model", "im_model")?;
        let store: ConceptStore = self.read("store", "concept_store")?;
        let vectors = self.instance_vectors(plan)?;
        let by_id = doc_index(corpus);
        let mut test = Vec::new();
        for id in plan.test_docs() {
            let doc = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("unknown test document '{id}'")))?;
            let x = vectors
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("no instance vector for '{id}'")))?;
            test.push((x.clone(), compress_target(&model, features, doc)?));
        }
        regression_error(&im, &test, &store)
    }

    // ----- artifact plumbing -----

    fn write<T: Serialize>(&self, stage: &str, schema: &str, data: &T) -> Result<()> {
        write_artifact(
            &self.path(stage),
            schema,
            &self.hash,
            self.stage_seed(stage),
            data,
        )
    }

    fn read<T: serde::de::DeserializeOwned>(&self, stage: &str, schema: &str) -> Result<T> {
        Ok(read_artifact(&self.path(stage), schema, Some(&self.hash))?.data)
    }

    /// Instance vectors keyed by id, either loaded directly or derived from
    /// frames through a codebook fitted on the training instances only.
    fn instance_vectors(&self, plan: &SplitPlan) -> Result<BTreeMap<String, Vec<f64>>> {
        if self.path("vectors").exists() {
            let vectors: Vec<InstanceVector> = self.read("vectors", "instance_vectors")?;
            return Ok(vectors
                .into_iter()
                .map(|v| (v.instance_id, v.values))
                .collect());
        }
        let frames: Vec<FrameSequence> = self.read("frames", "frame_sequences")?;
        let training_ids: std::collections::BTreeSet<&str> =
            plan.training_docs().iter().map(String::as_str).collect();
        let training_frames: Vec<FrameSequence> = frames
            .iter()
            .filter(|f| training_ids.contains(f.instance_id.as_str()))
            .cloned()
            .collect();
        let mut codebook_config = self.config.codebook.clone();
        codebook_config.seed = self.stage_seed("codebook");
        let fit = fit_codebook(&training_frames, &codebook_config)?;
        self.write("codebook", "codebook", &fit.codebook)?;
        let codebook: Codebook = fit.codebook;
        let mut vectors = Vec::with_capacity(frames.len());
        for seq in &frames {
            let seq = if codebook_config.derivatives {
                FrameSequence {
                    instance_id: seq.instance_id.clone(),
                    frames: crate::instance_features::augment_with_derivatives(&seq.frames),
                }
            } else {
                seq.clone()
            };
            vectors.push(abow(&seq, &codebook)?);
        }
        self.write("vectors", "instance_vectors", &vectors)?;
        Ok(vectors
            .into_iter()
            .map(|v| (v.instance_id, v.values))
            .collect())
    }
}

fn doc_index(corpus: &Corpus) -> BTreeMap<&str, &Document> {
    corpus
        .documents
        .iter()
        .map(|d| (d.doc_id.as_str(), d))
        .collect()
}

fn collect_docs<'c>(
    by_id: &BTreeMap<&str, &'c Document>,
    ids: &[String],
) -> Result<Vec<&'c Document>> {
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Config(format!("unknown document '{id}'")))
        })
        .collect()
}

fn load_frames(path: &Path, dim: usize) -> Result<Vec<FrameSequence>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut sequences = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq: FrameSequence = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        seq.validate(Some(dim))?;
        sequences.push(seq);
    }
    if sequences.is_empty() {
        return Err(Error::Config(format!(
            "no frame sequences in '{}'",
            path.display()
        )));
    }
    Ok(sequences)
}

/// Loads a split plan either as a stage artifact or as a bare JSON plan
/// (the format used for pre-split corpora).
fn load_split_plan(path: &Path) -> Result<SplitPlan> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(artifact) = serde_json::from_str::<super::Artifact<SplitPlan>>(&text) {
        if artifact.schema == "split_plan" {
            return Ok(artifact.data);
        }
    }
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("'{}' is not a split plan: {e}", path.display())))
}
