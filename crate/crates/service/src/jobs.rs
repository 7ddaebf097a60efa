//! Job records and their append-only log.
//!
//! Every line of the log is one [`LogEntry`]: either a job or a review of an
//! earlier job. Lines are never rewritten; a review amends a job by
//! reference.

use std::collections::HashMap;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use larf_core::annotator::Exchange;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::fs::{File, OpenOptions};
use tokio::io::AsyncWriteExt;
use tokio::sync::{Mutex, RwLock};
use tracing::warn;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Annotate,
    Bionic,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Succeeded,
    FallbackUsed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: Uuid,
    pub created_at: DateTime<Utc>,
    pub kind: JobKind,
    pub request: Value,
    pub result: Value,
    #[serde(default)]
    pub llm_exchanges: Vec<Exchange>,
    pub status: JobStatus,
}

impl JobRecord {
    pub fn new(kind: JobKind, request: Value, result: Value, llm_exchanges: Vec<Exchange>, status: JobStatus) -> Self {
        Self {
            id: Uuid::new_v4(),
            created_at: Utc::now(),
            kind,
            request,
            result,
            llm_exchanges,
            status,
        }
    }
}

/// A human reviewer's verdict on a job, e.g. a corrected score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub job_id: Uuid,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_score: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "lowercase")]
pub enum LogEntry {
    Job(JobRecord),
    Review(Review),
}

/// A job with the reviews recorded against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    #[serde(flatten)]
    pub record: JobRecord,
    #[serde(default)]
    pub reviews: Vec<Review>,
    /// The latest reviewed score, if any. Recorded, never computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_score: Option<u8>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("job log I/O failed on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no job {0}")]
    UnknownJob(Uuid),
}

/// Where job records live. Implementations must serialize appends.
#[async_trait]
pub trait JobStore: Send + Sync {
    async fn append(&self, entry: LogEntry) -> Result<(), StoreError>;
    async fn get(&self, id: Uuid) -> Option<JobView>;
    /// Newest first, optionally of one kind. Returns the page and the total.
    async fn list(&self, kind: Option<JobKind>, limit: usize, offset: usize) -> (Vec<JobView>, usize);
}

/// In-memory view of the log, in append order.
#[derive(Debug, Default)]
struct JobIndex {
    jobs: Vec<JobRecord>,
    by_id: HashMap<Uuid, usize>,
    reviews: HashMap<Uuid, Vec<Review>>,
}

impl JobIndex {
    fn check(&self, entry: &LogEntry) -> Result<(), StoreError> {
        match entry {
            LogEntry::Review(r) if !self.by_id.contains_key(&r.job_id) => Err(StoreError::UnknownJob(r.job_id)),
            _ => Ok(()),
        }
    }

    fn insert(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Job(job) => {
                if self.by_id.contains_key(&job.id) {
                    warn!(id = %job.id, "duplicate job id in log, keeping the first");
                    return;
                }
                self.by_id.insert(job.id, self.jobs.len());
                self.jobs.push(job);
            }
            LogEntry::Review(review) => self.reviews.entry(review.job_id).or_default().push(review),
        }
    }

    fn view(&self, job: &JobRecord) -> JobView {
        let reviews = self.reviews.get(&job.id).cloned().unwrap_or_default();
        let adjusted_score = reviews.iter().rev().find_map(|r| r.adjusted_score);
        JobView {
            record: job.clone(),
            reviews,
            adjusted_score,
        }
    }

    fn get(&self, id: Uuid) -> Option<JobView> {
        self.by_id.get(&id).map(|&i| self.view(&self.jobs[i]))
    }

    fn list(&self, kind: Option<JobKind>, limit: usize, offset: usize) -> (Vec<JobView>, usize) {
        // append order is creation order, so newest first is reverse order
        let matching: Vec<&JobRecord> = self
            .jobs
            .iter()
            .rev()
            .filter(|j| kind.is_none_or(|k| j.kind == k))
            .collect();
        let page = matching.iter().skip(offset).take(limit).map(|j| self.view(j)).collect();
        (page, matching.len())
    }
}

/// Keeps everything in memory; for tests and throwaway servers.
#[derive(Debug, Default)]
pub struct MemoryJobStore {
    index: RwLock<JobIndex>,
}

#[async_trait]
impl JobStore for MemoryJobStore {
    async fn append(&self, entry: LogEntry) -> Result<(), StoreError> {
        let mut index = self.index.write().await;
        index.check(&entry)?;
        index.insert(entry);
        Ok(())
    }

    async fn get(&self, id: Uuid) -> Option<JobView> {
        self.index.read().await.get(id)
    }

    async fn list(&self, kind: Option<JobKind>, limit: usize, offset: usize) -> (Vec<JobView>, usize) {
        self.index.read().await.list(kind, limit, offset)
    }
}

/// Append-only JSON Lines file. One writer; the whole log is indexed in
/// memory on open.
#[derive(Debug)]
pub struct JsonlJobStore {
    path: PathBuf,
    writer: Mutex<File>,
    index: RwLock<JobIndex>,
}

impl JsonlJobStore {
    /// Opens or creates the log. Unparseable lines (e.g. a line truncated by
    /// a crash) are skipped with a warning.
    pub async fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut index = JobIndex::default();
        match tokio::fs::read_to_string(&path).await {
            Ok(contents) => {
                for (n, line) in contents.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    match serde_json::from_str::<LogEntry>(line) {
                        Ok(entry) => index.insert(entry),
                        Err(e) => warn!(line = n + 1, error = %e, "skipping unreadable job log line"),
                    }
                }
            }
            Err(e) if e.kind() == ErrorKind::NotFound => {}
            Err(e) => return Err(io(e)),
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            tokio::fs::create_dir_all(dir).await.map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).await.map_err(io)?;
        Ok(Self {
            path,
            writer: Mutex::new(file),
            index: RwLock::new(index),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[async_trait]
impl JobStore for JsonlJobStore {
    async fn append(&self, entry: LogEntry) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(&entry).expect("log entries serialize");
        line.push('\n');
        let mut writer = self.writer.lock().await;
        self.index.read().await.check(&entry)?;
        let io = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        writer.write_all(line.as_bytes()).await.map_err(io)?;
        writer.flush().await.map_err(io)?;
        // indexed while still holding the writer, so index order is file order
        self.index.write().await.insert(entry);
        Ok(())
    }

    async fn get(&self, id: Uuid) -> Option<JobView> {
        self.index.read().await.get(id)
    }

    async fn list(&self, kind: Option<JobKind>, limit: usize, offset: usize) -> (Vec<JobView>, usize) {
        self.index.read().await.list(kind, limit, offset)
    }
}
