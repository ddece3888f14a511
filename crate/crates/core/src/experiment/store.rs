//! On-disk session layout.
//!
//! ```text
//! <session dir>/
//!   manifest.json        immutable session description
//!   responses.jsonl      append-only response log, one JSON record per line
//!   profiles.csv         flat per-trial profile table
//!   profiles/trial_NNNN.json
//!   audio/trial_NNNN.wav
//! ```
//!
//! Every response is written and synced before it is acknowledged. A torn
//! final line (crash mid-write) is discarded on reopen.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::experiment::session::{ResponseRecord, Session, SessionManifest};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESPONSE_LOG: &str = "responses.jsonl";

/// A session backed by a directory; the single writer of its response log.
#[derive(Debug)]
pub struct SessionDir {
    dir: PathBuf,
    session: Session,
    log: File,
}

impl SessionDir {
    /// Writes a fresh manifest and an empty response log.
    pub fn create(dir: impl AsRef<Path>, manifest: SessionManifest) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        write_synced(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        let log_path = dir.join(RESPONSE_LOG);
        write_synced(&log_path, b"")?;
        Self::open(dir)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: SessionManifest = serde_json::from_str(&text)?;
        let log_path = dir.join(RESPONSE_LOG);
        let responses = recover_log(&log_path)?;
        let mut session = Session::new(manifest);
        for r in responses {
            let rec = session.validate_response(r.trial_index, &r.choice, r.rt_ms, r.timestamp)?;
            session.responses.push(rec);
        }
        let log = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        Ok(SessionDir { dir, session, log })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn audio_path(&self, trial_index: usize) -> Option<PathBuf> {
        self.session
            .manifest
            .trials
            .get(trial_index)
            .map(|t| self.dir.join(&t.stimulus_path))
    }

    pub fn record_response(&mut self, trial_index: usize, choice: &str, rt_ms: f64) -> Result<&ResponseRecord> {
        self.record_response_at(trial_index, choice, rt_ms, Utc::now())
    }

    /// Validates, appends and syncs one response; the in-memory session only
    /// changes once the record is durable.
    pub fn record_response_at(
        &mut self,
        trial_index: usize,
        choice: &str,
        rt_ms: f64,
        timestamp: DateTime<Utc>,
    ) -> Result<&ResponseRecord> {
        let rec = self
            .session
            .validate_response(trial_index, choice, rt_ms, timestamp)?;
        let mut line = serde_json::to_vec(&rec)?;
        line.push(b'\n');
        let log_path = self.dir.join(RESPONSE_LOG);
        self.log
            .write_all(&line)
            .and_then(|_| self.log.sync_data())
            .map_err(|e| Error::io(&log_path, e))?;
        self.session.responses.push(rec);
        Ok(self.session.responses.last().expect("just pushed"))
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(path, e))
}

/// Parses the response log, truncating an incomplete trailing record.
fn recover_log(path: &Path) -> Result<Vec<ResponseRecord>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        let complete = line.ends_with('\n');
        match serde_json::from_str::<ResponseRecord>(line.trim_end()) {
            Ok(rec) if complete => {
                records.push(rec);
                good_len += n as u64;
            }
            _ => {
                // only the final line may be torn
                let mut rest = String::new();
                reader.read_line(&mut rest).map_err(|e| Error::io(path, e))?;
                if !rest.is_empty() {
                    return Err(Error::Malformed(format!(
                        "{}: corrupt record after {} valid lines",
                        path.display(),
                        records.len()
                    )));
                }
                let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
                f.set_len(good_len).map_err(|e| Error::io(path, e))?;
                f.sync_all().map_err(|e| Error::io(path, e))?;
                break;
            }
        }
    }
    Ok(records)
}

/// Session directories under `root`: `root` itself if it holds a manifest,
/// otherwise every immediate subdirectory that does, sorted by path.
pub fn discover_sessions(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}
