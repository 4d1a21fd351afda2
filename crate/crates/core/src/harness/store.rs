//! Append-only TaskRun storage in JSON Lines.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::pipeline::TaskRun;

/// `(instance key, strategy, provider)`; the instance key carries family,
/// index and variant.
pub type CellKey = (String, String, String);

pub fn cell_key(run: &TaskRun) -> CellKey {
    (run.instance.clone(), run.strategy.clone(), run.provider.clone())
}

#[derive(Clone, Debug, Default)]
pub struct ResultsStore {
    runs: BTreeMap<CellKey, TaskRun>,
}

impl ResultsStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a run; returns false and keeps the existing record if the
    /// cell is already present.
    pub fn insert(&mut self, run: TaskRun) -> bool {
        let key = cell_key(&run);
        if self.runs.contains_key(&key) {
            return false;
        }
        self.runs.insert(key, run);
        true
    }

    pub fn contains(&self, key: &CellKey) -> bool {
        self.runs.contains_key(key)
    }

    pub fn get(&self, key: &CellKey) -> Option<&TaskRun> {
        self.runs.get(key)
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn runs(&self) -> impl Iterator<Item = &TaskRun> {
        self.runs.values()
    }

    /// Reads a JSONL file. A torn final line (no trailing newline and not
    /// parseable) is cut off so that later appends start on a clean line.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut store = ResultsStore::new();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(e) => return Err(HarnessError::io(path, e)),
        };
        let mut valid_len = 0;
        let mut offset = 0;
        for (n, line) in text.split_inclusive('\n').enumerate() {
            offset += line.len();
            let body = line.trim_end();
            if body.is_empty() {
                valid_len = offset;
                continue;
            }
            match serde_json::from_str::<TaskRun>(body) {
                Ok(run) => {
                    if !line.ends_with('\n') {
                        break;
                    }
                    if !store.insert(run) {
                        return Err(HarnessError::Corrupt(format!("{}: duplicate cell on line {}", path.display(), n + 1)));
                    }
                    valid_len = offset;
                }
                Err(_) if !line.ends_with('\n') => break,
                Err(e) => return Err(HarnessError::Corrupt(format!("{}:{}: {e}", path.display(), n + 1))),
            }
        }
        if valid_len < text.len() {
            let f = OpenOptions::new().write(true).open(path).map_err(|e| HarnessError::io(path, e))?;
            f.set_len(valid_len as u64).map_err(|e| HarnessError::io(path, e))?;
        }
        Ok(store)
    }
}

/// The single writer of a run's JSONL file.
pub struct StoreWriter {
    path: PathBuf,
    file: std::fs::File,
}

impl StoreWriter {
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| HarnessError::io(path, e))?;
        Ok(StoreWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, run: &TaskRun) -> Result<(), HarnessError> {
        let mut line = serde_json::to_string(run).expect("TaskRun serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}
