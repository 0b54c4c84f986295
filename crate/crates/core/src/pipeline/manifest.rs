use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_file::ContentHash;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seconds: f64,
    pub artifacts: Vec<Artifact>,
}

/// What a run produced, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn file_hash(path: &Path) -> Result<ContentHash> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ContentHash::of_bytes(&bytes))
}

impl RunManifest {
    pub fn new(config_hash: &ContentHash) -> Self {
        RunManifest {
            software_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.to_hex(),
            stages: BTreeMap::new(),
        }
    }

    /// The manifest in `out_dir`, or a fresh one when it is missing.
    pub fn load_or_new(out_dir: &Path, config_hash: &ContentHash) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(config_hash));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        m.config_hash = config_hash.to_hex();
        Ok(m)
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Hashes `files` (relative to `out_dir`) and records them as the
    /// stage's artifacts.
    pub fn record(
        &mut self,
        stage: &str,
        out_dir: &Path,
        files: &[PathBuf],
        seconds: f64,
    ) -> Result<()> {
        let artifacts = files
            .iter()
            .map(|rel| {
                Ok(Artifact {
                    path: rel.clone(),
                    sha256: file_hash(&out_dir.join(rel))?.to_hex(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.stages.insert(
            stage.into(),
            StageRecord {
                config_hash: self.config_hash.clone(),
                seconds,
                artifacts,
            },
        );
        Ok(())
    }

    /// Checks that every listed artifact exists with its recorded hash.
    pub fn verify(&self, out_dir: &Path) -> Result<()> {
        for (stage, rec) in &self.stages {
            for a in &rec.artifacts {
                let actual = file_hash(&out_dir.join(&a.path))?.to_hex();
                if actual != a.sha256 {
                    return Err(Error::Integrity(format!(
                        "{stage} artifact {} has hash {actual}, manifest says {}",
                        a.path.display(),
                        a.sha256
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when `stage` completed under the current config and its
    /// artifacts are intact.
    pub fn is_current(&self, stage: &str, out_dir: &Path) -> bool {
        self.stages.get(stage).is_some_and(|rec| {
            rec.config_hash == self.config_hash
                && rec.artifacts.iter().all(|a| {
                    file_hash(&out_dir.join(&a.path)).is_ok_and(|h| h.to_hex() == a.sha256)
                })
        })
    }
}
