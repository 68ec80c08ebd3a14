//! Append-only journal of evaluation results.
//!
//! Each record is one line: a 16-hex-digit checksum of the JSON text, one
//! space, the JSON text of an [`EvalResult`], `\n`. A final line without its
//! newline is a write cut short by a crash; it is dropped on open. Any other
//! damage is reported with its byte offset and the journal is refused.

use super::request::EvalResult;
use crate::fingerprint;
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("journal {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt journal at byte {offset} (line {line}): {reason}")]
    Corrupt { offset: usize, line: usize, reason: String },
}

/// Result of replaying journal bytes.
#[derive(Debug, Default)]
pub struct Replay {
    pub records: Vec<EvalResult>,
    /// Length of the intact prefix; anything after it is a torn record.
    pub valid_len: usize,
}

pub fn encode_record(result: &EvalResult) -> String {
    let json = serde_json::to_string(result).expect("results serialize");
    format!("{} {}\n", fingerprint::digest_str(&[&json]), json)
}

pub fn replay(bytes: &[u8]) -> Result<Replay, CacheError> {
    let mut out = Replay::default();
    let mut offset = 0;
    let mut line = 0;
    while offset < bytes.len() {
        let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            log::warn!("ignoring torn journal record of {} bytes at byte {offset}", bytes.len() - offset);
            break;
        };
        line += 1;
        let corrupt = |reason: String| CacheError::Corrupt { offset, line, reason };
        let text = std::str::from_utf8(&bytes[offset..offset + nl]).map_err(|e| corrupt(e.to_string()))?;
        let (sum, json) = text.split_once(' ').ok_or_else(|| corrupt("missing checksum separator".into()))?;
        if fingerprint::digest_str(&[json]) != sum {
            return Err(corrupt("checksum mismatch".into()));
        }
        let record: EvalResult = serde_json::from_str(json).map_err(|e| corrupt(e.to_string()))?;
        out.records.push(record);
        offset += nl + 1;
        out.valid_len = offset;
    }
    Ok(out)
}

/// Results by request key, backed by an optional journal file.
#[derive(Debug, Default)]
pub struct ResultCache {
    map: HashMap<String, EvalResult>,
    journal: Option<(PathBuf, File)>,
}

impl ResultCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a journal and replays it.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io = |source| CacheError::Io { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(e)),
        };
        let replayed = replay(&bytes)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if replayed.valid_len < bytes.len() {
            file.set_len(replayed.valid_len as u64).map_err(io)?;
        }
        let mut cache = Self { map: HashMap::new(), journal: Some((path.to_path_buf(), file)) };
        for r in replayed.records {
            cache.map.entry(r.request.key()).or_insert(r);
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&EvalResult> {
        self.map.get(key)
    }

    /// Journals `result` (synced to disk) and then makes it visible. A key
    /// already present is left untouched.
    pub fn insert(&mut self, result: EvalResult) -> Result<(), CacheError> {
        let key = result.request.key();
        if self.map.contains_key(&key) {
            return Ok(());
        }
        if let Some((path, file)) = &mut self.journal {
            let io = |source| CacheError::Io { path: path.clone(), source };
            file.write_all(encode_record(&result).as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        self.map.insert(key, result);
        Ok(())
    }
}
