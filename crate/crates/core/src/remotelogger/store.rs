// SPDX-License-Identifier: Apache-2.0

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::protocol::ComponentIdentity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LogKind {
    HostResources,
    ResponseTime,
    ExecutionDuration,
    Event,
}

impl LogKind {
    pub fn from_sub_type(sub_type: &str) -> Option<Self> {
        match sub_type {
            "hostResources" => Some(LogKind::HostResources),
            "responseTime" => Some(LogKind::ResponseTime),
            "executionDuration" => Some(LogKind::ExecutionDuration),
            "event" => Some(LogKind::Event),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    pub kind: LogKind,
    pub source: ComponentIdentity,
    /// The envelope's `sentAtSourceTimestamp`.
    pub timestamp: f64,
    pub payload: Map<String, Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("log store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("cannot encode record: {0}")]
    Encode(String),
}

/// Where log records go. Queries return records in append order.
pub trait LogStore: Send {
    fn append(&mut self, record: LogRecord) -> Result<(), StoreError>;

    fn query(&self, kind: Option<LogKind>, filter: &dyn Fn(&LogRecord) -> bool) -> Result<Vec<LogRecord>, StoreError>;

    fn all(&self) -> Result<Vec<LogRecord>, StoreError> {
        self.query(None, &|_| true)
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    records: Vec<LogRecord>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl LogStore for MemoryStore {
    fn append(&mut self, record: LogRecord) -> Result<(), StoreError> {
        self.records.push(record);
        Ok(())
    }

    fn query(&self, kind: Option<LogKind>, filter: &dyn Fn(&LogRecord) -> bool) -> Result<Vec<LogRecord>, StoreError> {
        Ok(self
            .records
            .iter()
            .filter(|r| kind.is_none_or(|k| r.kind == k) && filter(r))
            .cloned()
            .collect())
    }
}

/// Append-only newline-delimited JSON file, one record per line.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    file: File,
}

impl FileStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(FileStore { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl LogStore for FileStore {
    fn append(&mut self, record: LogRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(&record).map_err(|e| StoreError::Encode(e.to_string()))?;
        line.push(b'\n');
        // One write per record keeps lines whole even if the process dies.
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }

    fn query(&self, kind: Option<LogKind>, filter: &dyn Fn(&LogRecord) -> bool) -> Result<Vec<LogRecord>, StoreError> {
        let reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if kind.is_none_or(|k| rec.kind == k) && filter(&rec) {
                out.push(rec);
            }
        }
        Ok(out)
    }
}
