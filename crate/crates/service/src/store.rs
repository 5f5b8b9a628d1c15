//! Append-only journal with snapshot compaction.
//!
//! Layout under the data directory:
//!
//! - `LOCK`: held exclusively by the process that has the store open.
//! - `snapshot.jsonl`: one [`Record`] per line, replaced atomically.
//! - `journal.jsonl`: one commit per line; a commit is a list of records
//!   that are applied together or not at all.
//!
//! A line that fails to parse at the end of the journal is a torn write from
//! a crash and is cut off on open. A bad line followed by good ones is
//! corruption and fails the open.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use classifieds_core::{Change, UserId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SNAPSHOT_FILE: &str = "snapshot.jsonl";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const LOCK_FILE: &str = "LOCK";

/// A signed-in session. Only the digest of the bearer token is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub digest: String,
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", content = "body", rename_all = "snake_case")]
pub enum Record {
    Change(Box<Change>),
    Session(SessionRecord),
    SessionRevoked { digest: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Commit {
    commit: u64,
    records: Vec<Record>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("data directory {0} is in use by another process")]
    Locked(PathBuf),
    #[error("{path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub struct Store {
    dir: PathBuf,
    journal: File,
    next_commit: u64,
    fsync: bool,
    _lock: File,
}

impl Store {
    /// Locks `dir` and returns the store with every durable record in order:
    /// the snapshot first, then committed journal entries.
    pub fn open(dir: &Path, fsync: bool) -> Result<(Store, Vec<Record>), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lock_path = dir.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io_err(&lock_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(StoreError::Locked(dir.to_path_buf())),
            Err(TryLockError::Error(e)) => return Err(io_err(&lock_path)(e)),
        }

        let mut records = read_snapshot(&dir.join(SNAPSHOT_FILE))?;
        let journal_path = dir.join(JOURNAL_FILE);
        let (commits, valid_len) = read_journal(&journal_path)?;
        let next_commit = commits.last().map_or(0, |c| c.commit + 1);
        for c in commits {
            records.extend(c.records);
        }

        let journal = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&journal_path)
            .map_err(io_err(&journal_path))?;
        let len = journal.metadata().map_err(io_err(&journal_path))?.len();
        if len != valid_len {
            journal.set_len(valid_len).map_err(io_err(&journal_path))?;
            journal.sync_all().map_err(io_err(&journal_path))?;
        }
        let store = Store {
            dir: dir.to_path_buf(),
            journal,
            next_commit,
            fsync,
            _lock: lock,
        };
        Ok((store, records))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Durably appends one atomic group of records.
    pub fn commit(&mut self, records: &[Record]) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let path = self.dir.join(JOURNAL_FILE);
        let commit = Commit {
            commit: self.next_commit,
            records: records.to_vec(),
        };
        let mut line = serde_json::to_vec(&commit).expect("records serialize");
        line.push(b'\n');
        self.journal.write_all(&line).map_err(io_err(&path))?;
        if self.fsync {
            self.journal.sync_data().map_err(io_err(&path))?;
        }
        self.next_commit += 1;
        Ok(())
    }

    /// Replaces the snapshot with `records` and empties the journal.
    pub fn compact(&mut self, records: &[Record]) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let mut out = io::BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
        for r in records {
            serde_json::to_writer(&mut out, r).expect("records serialize");
            out.write_all(b"\n").map_err(io_err(&tmp))?;
        }
        let file = out.into_inner().map_err(|e| io_err(&tmp)(e.into_error()))?;
        file.sync_all().map_err(io_err(&tmp))?;
        let snapshot = self.dir.join(SNAPSHOT_FILE);
        fs::rename(&tmp, &snapshot).map_err(io_err(&snapshot))?;
        sync_dir(&self.dir);
        // replaying the journal over the new snapshot is harmless, so a crash
        // before this truncation loses nothing
        let journal = self.dir.join(JOURNAL_FILE);
        self.journal.set_len(0).map_err(io_err(&journal))?;
        self.journal.sync_all().map_err(io_err(&journal))?;
        self.next_commit = 0;
        Ok(())
    }
}

fn sync_dir(dir: &Path) {
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

fn read_snapshot(path: &Path) -> Result<Vec<Record>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Parses the journal, returning complete commits and the byte length of
/// the valid prefix.
fn read_journal(path: &Path) -> Result<(Vec<Commit>, u64), StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut commits = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            // no newline: the final write never finished
            break;
        };
        match serde_json::from_slice::<Commit>(&rest[..end]) {
            Ok(c) => {
                commits.push(c);
                offset += end + 1;
            }
            Err(e) => {
                let tail_is_blank = rest[end + 1..].iter().all(u8::is_ascii_whitespace);
                if tail_is_blank {
                    break;
                }
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((commits, offset as u64))
}
