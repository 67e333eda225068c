//! On-disk artifacts: every stage output is wrapped with the configuration
//! hash and the stage seed, so any file in a run tree can be traced back to
//! what produced it.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

/// SHA-256 over the canonical JSON form of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_artifact<T: Serialize>(
    path: &Path,
    schema: &str,
    config_hash: &str,
    seed: u64,
    data: &T,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let artifact = Artifact {
        schema: schema.to_string(),
        config_hash: config_hash.to_string(),
        seed,
        data,
    };
    let mut text = serde_json::to_string_pretty(&artifact)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a stage artifact, checking the schema name and (when given) the
/// producing configuration hash.
pub fn read_artifact<T: DeserializeOwned>(
    path: &Path,
    schema: &str,
    expected_hash: Option<&str>,
) -> Result<Artifact<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!(
            "cannot read artifact '{}': {e}; run the producing stage first",
            path.display()
        ))
    })?;
    let artifact: Artifact<T> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("artifact '{}' is corrupt: {e}", path.display())))?;
    if artifact.schema != schema {
        return Err(Error::Config(format!(
            "artifact '{}' holds schema '{}', expected '{schema}'",
            path.display(),
            artifact.schema
        )));
    }
    if let Some(expected) = expected_hash {
        if artifact.config_hash != expected {
            return Err(Error::Config(format!(
                "artifact '{}' was produced under a different configuration; re-run upstream stages",
                path.display()
            )));
        }
    }
    Ok(artifact)
}
