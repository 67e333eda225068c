//! End-to-end experiments driven by one declarative JSON configuration:
//! split generation, feature building, embedding training (or import),
//! store construction, regression training, priming and evaluation, with
//! every intermediate artifact persisted for reproducibility.

mod artifact;
mod pipeline;
mod synthetic;

pub use artifact::{config_hash, read_artifact, write_artifact, Artifact};
pub use pipeline::{
    error_free_upper_bound, run_experiment, RunOptions, RunOutcome, Stage, TrialOutcome,
    TrialRunner,
};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ce::{Architecture, CeHyperParams};
use crate::corpus::{LabelFractions, SplitProtocol, SplitRatios};
use crate::error::{Error, Result};
use crate::im::SvrConfig;
use crate::instance_features::CodebookConfig;
use crate::semantics::LdaConfig;

/// Where the instance input vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSource {
    /// Precomputed fixed-length vectors, line-delimited JSON.
    Vectors { path: PathBuf, dim: usize },
    /// Frame sequences aggregated through a fitted codebook.
    Frames { path: PathBuf, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// Annotated corpus plus instance features loaded from disk.
    Files {
        corpus: PathBuf,
        #[serde(default)]
        vocabulary: Option<PathBuf>,
        features: FeatureSource,
    },
    /// The bundled planted-topic generator.
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CeSection {
    pub hyper: CeHyperParams,
    pub architecture: Architecture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_protocol")]
    pub protocol: SplitProtocol,
    #[serde(default)]
    pub label_fractions: LabelFractions,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lda: LdaConfig,
    /// Cosine-normalize tf-idf usage rows before the label gram.
    #[serde(default)]
    pub normalize_label_features: bool,
    #[serde(default)]
    pub ce: CeSection,
    #[serde(default)]
    pub svr: SvrConfig,
    #[serde(default)]
    pub codebook: CodebookConfig,
    /// Fixed split plan (pre-split corpora); generated when absent.
    #[serde(default)]
    pub split_file: Option<PathBuf>,
    /// Semantics features of an already-trained embedding model (CCT).
    #[serde(default)]
    pub imported_semantics: Option<PathBuf>,
    /// Trained embedding model to apply instead of training one (CCT).
    #[serde(default)]
    pub imported_ce_model: Option<PathBuf>,
    /// Concept records of the source run's semantics documents (CCT); these
    /// keep the source vocabulary primeable when no semantics documents
    /// exist locally.
    #[serde(default)]
    pub imported_concepts: Option<PathBuf>,
    pub output_dir: PathBuf,
}

fn default_protocol() -> SplitProtocol {
    SplitProtocol::Wct
}

fn default_trials() -> usize {
    3
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.ce.hyper.validate()?;
        self.svr.validate()?;
        match &self.dataset {
            DatasetConfig::Files {
                corpus, features, ..
            } => {
                if !corpus.exists() {
                    return Err(Error::Config(format!(
                        "corpus file '{}' does not exist",
                        corpus.display()
                    )));
                }
                let feature_path = match features {
                    FeatureSource::Vectors { path, .. } | FeatureSource::Frames { path, .. } => path,
                };
                if !feature_path.exists() {
                    return Err(Error::Config(format!(
                        "feature file '{}' does not exist",
                        feature_path.display()
                    )));
                }
            }
            DatasetConfig::Synthetic(synth) => synth.validate()?,
        }
        if matches!(self.protocol, SplitProtocol::Cct)
            && (self.imported_ce_model.is_none()
                || self.imported_semantics.is_none()
                || self.imported_concepts.is_none())
        {
            return Err(Error::Config(
                "the cross-corpora protocol needs imported_ce_model, imported_semantics and imported_concepts"
                    .into(),
            ));
        }
        for import in [
            &self.split_file,
            &self.imported_semantics,
            &self.imported_ce_model,
            &self.imported_concepts,
        ]
        .into_iter()
        .flatten()
        {
            if !import.exists() {
                return Err(Error::Config(format!(
                    "referenced file '{}' does not exist",
                    import.display()
                )));
            }
        }
        Ok(())
    }
}
