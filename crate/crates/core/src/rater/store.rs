//! Append-only JSONL rating log.
//!
//! Every accepted rating is one line written under a lock, so concurrent
//! raters never interleave records. A re-rating appends a superseding event
//! and the earlier one stays in the history. On open the log is replayed; a
//! trailing partial line left by a crash is cut off, anything else that does
//! not parse is reported as corruption.

use super::{RaterError, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricRating {
    pub case_id: String,
    pub reader_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub comment: String,
    pub ai_is_report_a: bool,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub seq: u64,
    /// Sequence number of the event this one replaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
    #[serde(flatten)]
    pub rating: RubricRating,
}

#[derive(Default)]
struct Inner {
    events: Vec<RatingEvent>,
    latest: BTreeMap<(String, String), usize>,
    file: Option<File>,
}

/// Events from the complete lines of `bytes`, and the length of that prefix.
fn replay(bytes: &[u8]) -> Result<(Inner, usize), RaterError> {
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let mut inner = Inner::default();
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| RaterError::CorruptEventLog {
        line: 0,
        reason: e.to_string(),
    })?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: RatingEvent = serde_json::from_str(line).map_err(|e| RaterError::CorruptEventLog {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if event.seq != inner.events.len() as u64 {
            return Err(RaterError::CorruptEventLog {
                line: i + 1,
                reason: format!("sequence {} out of order", event.seq),
            });
        }
        inner.apply(event);
    }
    Ok((inner, complete))
}

impl Inner {
    fn apply(&mut self, event: RatingEvent) {
        let key = (event.rating.case_id.clone(), event.rating.reader_id.clone());
        self.latest.insert(key, self.events.len());
        self.events.push(event);
    }
}

pub struct RatingStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
    recovered_bytes: u64,
}

impl RatingStore {
    pub fn in_memory() -> Self {
        RatingStore {
            path: None,
            inner: Mutex::new(Inner::default()),
            recovered_bytes: 0,
        }
    }

    /// Open or create the log at `path` and replay it. A partial last line
    /// (a write interrupted by a crash) is truncated away.
    pub fn open(path: &Path) -> Result<Self, RaterError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let (mut inner, complete) = replay(&bytes)?;
        let recovered_bytes = (bytes.len() - complete) as u64;
        if recovered_bytes > 0 {
            file.set_len(complete as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        inner.file = Some(file);
        Ok(RatingStore {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(inner),
            recovered_bytes,
        })
    }

    /// Replay a log without opening it for writing; a partial last line is ignored, not truncated.
    pub fn read_only(path: &Path) -> Result<Self, RaterError> {
        let bytes = std::fs::read(path)?;
        let (inner, complete) = replay(&bytes)?;
        Ok(RatingStore {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(inner),
            recovered_bytes: (bytes.len() - complete) as u64,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Bytes of a partial trailing record dropped during replay.
    pub fn recovered_bytes(&self) -> u64 {
        self.recovered_bytes
    }

    fn append(&self, rating: RubricRating, allow_existing: bool) -> Result<RatingEvent, RaterError> {
        let mut inner = self.inner.lock().expect("rating store lock poisoned");
        let key = (rating.case_id.clone(), rating.reader_id.clone());
        let previous = inner.latest.get(&key).map(|&i| inner.events[i].seq);
        if previous.is_some() && !allow_existing {
            return Err(RaterError::Duplicate {
                case: rating.case_id,
                reader: rating.reader_id,
            });
        }
        let event = RatingEvent {
            seq: inner.events.len() as u64,
            supersedes: previous,
            rating,
        };
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_vec(&event).map_err(|e| RaterError::Invalid(e.to_string()))?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        inner.apply(event.clone());
        Ok(event)
    }

    /// Record a first rating; a second rating for the same (case, reader) is a conflict.
    pub fn submit(&self, rating: RubricRating) -> Result<RatingEvent, RaterError> {
        self.append(rating, false)
    }

    /// Record a rating that replaces any earlier one for the same (case, reader).
    pub fn revise(&self, rating: RubricRating) -> Result<RatingEvent, RaterError> {
        self.append(rating, true)
    }

    pub fn has_rated(&self, case_id: &str, reader_id: &str) -> bool {
        let inner = self.inner.lock().expect("rating store lock poisoned");
        inner.latest.contains_key(&(case_id.to_string(), reader_id.to_string()))
    }

    /// Current ratings (latest per case and reader) ordered by (case, reader).
    pub fn snapshot(&self) -> Vec<RubricRating> {
        let inner = self.inner.lock().expect("rating store lock poisoned");
        inner.latest.values().map(|&i| inner.events[i].rating.clone()).collect()
    }

    /// Every event in log order, superseded ones included.
    pub fn history(&self) -> Vec<RatingEvent> {
        self.inner.lock().expect("rating store lock poisoned").events.clone()
    }

    /// Number of current ratings per reader.
    pub fn progress(&self) -> BTreeMap<String, usize> {
        let inner = self.inner.lock().expect("rating store lock poisoned");
        let mut out = BTreeMap::new();
        for (_, reader) in inner.latest.keys() {
            *out.entry(reader.clone()).or_default() += 1;
        }
        out
    }

    /// Force buffered log writes to disk.
    pub fn sync(&self) -> Result<(), RaterError> {
        let inner = self.inner.lock().expect("rating store lock poisoned");
        if let Some(file) = inner.file.as_ref() {
            file.sync_data()?;
        }
        Ok(())
    }

    /// Write the current ratings as one JSON array.
    pub fn write_snapshot(&self, path: &Path) -> Result<(), RaterError> {
        let ratings = self.snapshot();
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &ratings).map_err(|e| RaterError::Invalid(e.to_string()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rating(case: &str, reader: &str, verdict: Verdict) -> RubricRating {
        RubricRating {
            case_id: case.into(),
            reader_id: reader.into(),
            verdict,
            comment: String::new(),
            ai_is_report_a: true,
            timestamp_ms: 0,
        }
    }

    #[test]
    fn duplicate_and_supersede() {
        let store = RatingStore::in_memory();
        store.submit(rating("c1", "r1", Verdict::A1)).unwrap();
        assert!(matches!(store.submit(rating("c1", "r1", Verdict::C)), Err(RaterError::Duplicate { .. })));
        let e = store.revise(rating("c1", "r1", Verdict::C)).unwrap();
        assert_eq!(e.supersedes, Some(0));
        assert_eq!(store.snapshot()[0].verdict, Verdict::C);
        assert_eq!(store.history().len(), 2);
        assert_eq!(store.progress()["r1"], 1);
    }

    #[test]
    fn replay_and_truncated_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.jsonl");
        {
            let store = RatingStore::open(&path).unwrap();
            store.submit(rating("c1", "r1", Verdict::A1)).unwrap();
            store.submit(rating("c2", "r1", Verdict::X)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":2,\"case_id\":\"c3\",\"rea").unwrap();
        drop(f);
        let len = std::fs::metadata(&path).unwrap().len();
        let view = RatingStore::read_only(&path).unwrap();
        assert_eq!((view.snapshot().len(), std::fs::metadata(&path).unwrap().len()), (2, len));
        let store = RatingStore::open(&path).unwrap();
        assert!(store.recovered_bytes() > 0);
        assert_eq!(store.snapshot().len(), 2);
        store.submit(rating("c3", "r1", Verdict::C)).unwrap();
        drop(store);
        let store = RatingStore::open(&path).unwrap();
        assert_eq!(store.snapshot().len(), 3);
        assert_eq!(store.recovered_bytes(), 0);
    }

    #[test]
    fn corrupt_middle_line_refuses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(RatingStore::open(&path), Err(RaterError::CorruptEventLog { line: 1, .. })));
    }
}
