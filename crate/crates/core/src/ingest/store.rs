//! Append-only NDJSON store of canonical responses.
//!
//! One writer at a time, enforced by a `<store>.lock` file created with
//! `O_EXCL`; readers never take the lock.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::survey::SurveyResponse;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {path} unreadable: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("store {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("response_id {0:?} already in store")]
    DuplicateResponseId(String),
    #[error("invalid record {response_id:?}: {reason}")]
    InvalidRecord { response_id: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An immutable view of the store contents.
#[derive(Debug, Clone, Default)]
pub struct StoreSnapshot {
    pub responses: Arc<Vec<SurveyResponse>>,
    /// Content hash of the bytes the snapshot was read from.
    pub version: u64,
}

impl StoreSnapshot {
    pub fn from_responses(responses: Vec<SurveyResponse>) -> Self {
        let version = fnv1a(super::to_ndjson(&responses).as_bytes());
        Self {
            responses: Arc::new(responses),
            version,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone)]
pub struct Store {
    path: PathBuf,
}

/// Held while appending; removes the lock file on drop.
#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl Store {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock_path(&self) -> PathBuf {
        let mut name = self.path.as_os_str().to_owned();
        name.push(".lock");
        PathBuf::from(name)
    }

    pub fn lock(&self) -> Result<StoreLock, StoreError> {
        let path = self.lock_path();
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StoreLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(StoreError::Locked(self.path.clone()))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Reads the whole store. A missing file is an empty store.
    pub fn load(&self) -> Result<StoreSnapshot, StoreError> {
        let bytes = match fs::read(&self.path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(StoreSnapshot::default()),
            Err(e) => {
                return Err(StoreError::Unreadable {
                    path: self.path.clone(),
                    reason: e.to_string(),
                })
            }
        };
        let text = std::str::from_utf8(&bytes).map_err(|e| StoreError::Unreadable {
            path: self.path.clone(),
            reason: e.to_string(),
        })?;
        let mut responses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: SurveyResponse =
                serde_json::from_str(line).map_err(|e| StoreError::Unreadable {
                    path: self.path.clone(),
                    reason: format!("line {}: {e}", i + 1),
                })?;
            responses.push(r);
        }
        Ok(StoreSnapshot {
            responses: Arc::new(responses),
            version: fnv1a(&bytes),
        })
    }

    /// Appends responses under the writer lock. Fails without writing
    /// anything if any response_id is already stored or repeated.
    pub fn append(&self, responses: &[SurveyResponse]) -> Result<usize, StoreError> {
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let _lock = self.lock()?;
        let existing = self.load()?;
        let mut ids: HashSet<&str> = existing
            .responses
            .iter()
            .map(|r| r.response_id.as_str())
            .collect();
        for r in responses {
            r.validate().map_err(|e| StoreError::InvalidRecord {
                response_id: r.response_id.clone(),
                reason: e.to_string(),
            })?;
            if !ids.insert(&r.response_id) {
                return Err(StoreError::DuplicateResponseId(r.response_id.clone()));
            }
        }
        let mut file: File = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(super::to_ndjson(responses).as_bytes())?;
        file.sync_data()?;
        Ok(responses.len())
    }
}
