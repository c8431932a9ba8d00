//! Append-only session record storage, one JSON line per event.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::session::SessionRecord;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no records for session {0:?}")]
    NotFound(String),
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("session store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("session {id:?} line {line}: {reason}")]
    Corrupt {
        id: String,
        line: usize,
        reason: String,
    },
}

pub trait RecordStore: Send + Sync {
    /// Appends all `records` in a single write.
    fn append(&self, session_id: &str, records: &[SessionRecord]) -> Result<(), StoreError>;
    /// Raw record bytes exactly as persisted.
    fn raw(&self, session_id: &str) -> Result<String, StoreError>;
    fn ids(&self) -> Result<Vec<String>, StoreError>;

    fn load(&self, session_id: &str) -> Result<Vec<SessionRecord>, StoreError> {
        parse_lines(session_id, &self.raw(session_id)?)
    }
}

fn parse_lines(id: &str, raw: &str) -> Result<Vec<SessionRecord>, StoreError> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            SessionRecord::from_line(l).map_err(|e| StoreError::Corrupt {
                id: id.to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn encode(records: &[SessionRecord]) -> String {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&r.to_line());
        buf.push('\n');
    }
    buf
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// `<dir>/<session_id>.jsonl`
#[derive(Debug, Clone)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(FileStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_session_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.jsonl")))
    }
}

impl RecordStore for FileStore {
    fn append(&self, session_id: &str, records: &[SessionRecord]) -> Result<(), StoreError> {
        let path = self.path(session_id)?;
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(encode(records).as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    fn raw(&self, session_id: &str) -> Result<String, StoreError> {
        let path = self.path(session_id)?;
        match fs::read_to_string(&path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(session_id.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".jsonl")) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    data: Mutex<BTreeMap<String, String>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RecordStore for MemoryStore {
    fn append(&self, session_id: &str, records: &[SessionRecord]) -> Result<(), StoreError> {
        if !valid_session_id(session_id) {
            return Err(StoreError::InvalidId(session_id.to_string()));
        }
        self.data
            .lock()
            .unwrap()
            .entry(session_id.to_string())
            .or_default()
            .push_str(&encode(records));
        Ok(())
    }

    fn raw(&self, session_id: &str) -> Result<String, StoreError> {
        self.data
            .lock()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(session_id.to_string()))
    }

    fn ids(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.data.lock().unwrap().keys().cloned().collect())
    }
}
