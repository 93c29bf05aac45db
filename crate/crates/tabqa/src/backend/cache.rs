//! Append-only JSON-lines store of completions keyed by request hash.
//!
//! Each line holds one request and the completions it produced. Identical
//! requests may appear several times; replay serves them in recorded order
//! and repeats the last one once the queue is exhausted.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tabqa_core::{BackendError, Completion, CompletionBackend, CompletionRequest};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cache {path} line {line}: {detail}")]
    Corrupt { path: PathBuf, line: usize, detail: String },
}

#[derive(Serialize)]
struct HashInput<'a> {
    prompt: &'a str,
    temperature: f64,
    n: usize,
    stop: &'a [String],
    max_tokens: usize,
}

/// Hex SHA-256 over the request fields that influence sampling.
pub fn request_hash(request: &CompletionRequest) -> String {
    let input = HashInput {
        prompt: &request.prompt,
        temperature: request.temperature,
        n: request.n,
        stop: &request.stop,
        max_tokens: request.max_tokens,
    };
    let bytes = serde_json::to_vec(&input).expect("request serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub hash: String,
    pub request: CompletionRequest,
    pub completions: Vec<Completion>,
}

pub fn load_records(path: &Path) -> Result<Vec<CacheRecord>, CacheError> {
    let io_err = |source| CacheError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Forwards to a live backend and appends every successful response.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    file: Mutex<File>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn open(inner: B, path: &Path) -> Result<RecordingBackend<B>, CacheError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| CacheError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(RecordingBackend {
            inner,
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let completions = self.inner.complete(request)?;
        let record = CacheRecord {
            hash: request_hash(request),
            request: request.clone(),
            completions: completions.clone(),
        };
        let mut line = serde_json::to_string(&record).map_err(|e| BackendError::Other(e.to_string()))?;
        line.push('\n');
        let mut file = self.file.lock().expect("cache writer poisoned");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| BackendError::Other(format!("cannot append to {}: {e}", self.path.display())))?;
        Ok(completions)
    }
}

/// Serves recorded completions; unknown requests are a `CacheMiss`.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    entries: HashMap<String, Vec<Vec<Completion>>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn open(path: &Path) -> Result<ReplayBackend, CacheError> {
        Ok(ReplayBackend::from_records(load_records(path)?))
    }

    pub fn from_records(records: impl IntoIterator<Item = CacheRecord>) -> ReplayBackend {
        let mut entries: HashMap<String, Vec<Vec<Completion>>> = HashMap::new();
        for r in records {
            entries.entry(r.hash).or_default().push(r.completions);
        }
        ReplayBackend {
            entries,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let hash = request_hash(request);
        let Some(queue) = self.entries.get(&hash) else {
            return Err(BackendError::CacheMiss { hash });
        };
        let mut cursors = self.cursors.lock().expect("replay cursor poisoned");
        let cursor = cursors.entry(hash).or_insert(0);
        let served = queue[(*cursor).min(queue.len() - 1)].clone();
        *cursor += 1;
        Ok(served)
    }
}
