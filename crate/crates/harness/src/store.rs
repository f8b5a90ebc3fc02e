use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::record::RunRecord;

pub const RECORDS_FILE: &str = "records.jsonl";

/// Append-only JSON-lines result store, indexed by record key.
///
/// A torn final line (from an interrupted append) is dropped on open and
/// truncated away before the next append.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    records: BTreeMap<String, RunRecord>,
    valid_len: u64,
}

impl Store {
    /// Opens `dir/records.jsonl`, creating the directory if needed.
    pub fn open(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Self::open_file(&dir.join(RECORDS_FILE))
    }

    pub fn open_file(path: &Path) -> anyhow::Result<Self> {
        let mut records = BTreeMap::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
            let mut reader = BufReader::new(file);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line).with_context(|| format!("reading {}", path.display()))?;
                if read == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with('\n') {
                    break;
                }
                valid_len += read as u64;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: RunRecord = serde_json::from_str(line.trim_end())
                    .with_context(|| format!("{}:{lineno}: malformed record", path.display()))?;
                records.entry(rec.key.clone()).or_insert(rec);
            }
        }
        Ok(Self { path: path.to_path_buf(), records, valid_len })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &str) -> bool {
        self.records.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&RunRecord> {
        self.records.get(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in key order.
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.values()
    }

    /// Appends a record unless one with the same key is already stored.
    /// Returns whether the record was written.
    pub fn append(&mut self, record: RunRecord) -> anyhow::Result<bool> {
        if self.records.contains_key(&record.key) {
            return Ok(false);
        }
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .with_context(|| format!("opening {}", self.path.display()))?;
        if file.metadata()?.len() != self.valid_len {
            file.set_len(self.valid_len).with_context(|| format!("truncating {}", self.path.display()))?;
        }
        file.write_all(line.as_bytes()).with_context(|| format!("writing {}", self.path.display()))?;
        file.flush()?;
        self.valid_len += line.len() as u64;
        self.records.insert(record.key.clone(), record);
        Ok(true)
    }
}
