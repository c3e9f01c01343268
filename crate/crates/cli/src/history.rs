//! Append-only translation history: one JSON record per line, newest last on
//! disk and newest first when listed.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sqlbridge_core::engine::{TranslationStatus, TranslationTask};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub task: TranslationTask,
    pub status: TranslationStatus,
    pub translated_sql: Option<String>,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
#[error("history storage failure at {path}: {source}")]
pub struct StorageError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

pub struct HistoryStore {
    path: PathBuf,
}

impl HistoryStore {
    pub fn new(path: PathBuf) -> HistoryStore {
        HistoryStore { path }
    }

    pub fn append(&self, record: &HistoryRecord) -> Result<(), StorageError> {
        let wrap = |source| StorageError { path: self.path.clone(), source };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(wrap)?;
        let line = serde_json::to_string(record).expect("history record serializes");
        writeln!(file, "{line}").map_err(wrap)?;
        Ok(())
    }

    /// Most recent records first, at most `limit`.
    pub fn list(&self, limit: usize) -> Result<Vec<HistoryRecord>, StorageError> {
        if limit == 0 || !self.path.exists() {
            return Ok(Vec::new());
        }
        let text = std::fs::read_to_string(&self.path)
            .map_err(|source| StorageError { path: self.path.clone(), source })?;
        let mut records: Vec<HistoryRecord> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .filter_map(|l| serde_json::from_str(l).ok())
            .collect();
        records.reverse();
        records.truncate(limit);
        Ok(records)
    }

}
