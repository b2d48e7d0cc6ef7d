//! Run manifests: what was run, with which seeds, and a checksum of every
//! file it wrote.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory for outputs; the bare file name for inputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn from_bytes(path: impl Into<String>, bytes: &[u8]) -> Self {
        FileEntry { path: path.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
    }

    pub fn from_file(path: impl Into<String>, file: &Path) -> Result<Self> {
        Ok(Self::from_bytes(path, &fs::read(file)?))
    }
}

/// Seed of one derived stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSeed {
    pub stage: String,
    pub index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// RFC 3339, taken from `SOURCE_DATE_EPOCH` when it is set.
    pub created: String,
    pub config_hash: String,
    pub params_hash: String,
    pub master_seed: u64,
    pub seeds: Vec<StreamSeed>,
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub artifacts: Vec<FileEntry>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig, created: OffsetDateTime) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created: created.format(&Rfc3339).expect("RFC 3339 formats any UTC time"),
            config_hash: cfg.hash(),
            params_hash: cfg.physical().hash(),
            master_seed: cfg.seed,
            seeds: Vec::new(),
            config: cfg.clone(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Serialized form with artifacts sorted by path.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut m = self.clone();
        m.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let mut out = serde_json::to_vec_pretty(&m)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), self.to_json()?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?)
    }

    /// Recomputes every artifact checksum under `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let now = FileEntry::from_file(a.path.clone(), &dir.join(&a.path))?;
            if now.sha256 != a.sha256 {
                return Err(Error::Format(format!("{} changed since the run", a.path)));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `SOURCE_DATE_EPOCH` if set and valid, else the wall clock.
pub fn build_time() -> Result<OffsetDateTime> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => epoch_time(&v),
        Err(_) => Ok(OffsetDateTime::now_utc()),
    }
}

pub fn epoch_time(value: &str) -> Result<OffsetDateTime> {
    let secs: i64 = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("SOURCE_DATE_EPOCH is not an integer: {value:?}")))?;
    OffsetDateTime::from_unix_timestamp(secs).map_err(|e| Error::Config(format!("SOURCE_DATE_EPOCH: {e}")))
}

/// `YYYYMMDDTHHMMSSZ`, safe in file names.
pub fn compact_timestamp(t: OffsetDateTime) -> String {
    format!(
        "{:04}{:02}{:02}T{:02}{:02}{:02}Z",
        t.year(),
        u8::from(t.month()),
        t.day(),
        t.hour(),
        t.minute(),
        t.second()
    )
}
