//! Run records, persisted as one JSON object per line.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentKind;
use crate::error::{HarnessError, Result};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One result row. `passed` is set only for rows that assert something.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub anchor: String,
    pub label: String,
    #[serde(default)]
    pub values: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
}

impl ResultRow {
    pub fn new(anchor: &str, label: impl Into<String>) -> Self {
        ResultRow {
            anchor: anchor.to_string(),
            label: label.into(),
            values: BTreeMap::new(),
            passed: None,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.values.insert(key.to_string(), value.into());
        self
    }

    /// Stores a float, mapping non-finite values to strings so the line
    /// stays valid JSON.
    pub fn num(self, key: &str, x: f64) -> Self {
        if x.is_finite() {
            self.with(key, x)
        } else {
            self.with(key, x.to_string())
        }
    }

    pub fn check(mut self, passed: bool) -> Self {
        self.passed = Some(passed);
        self
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        match self.values.get(key)? {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<String> {
        match self.values.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub kind: ExperimentKind,
    pub config: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub version: String,
    pub rows: Vec<ResultRow>,
}

impl RunRecord {
    pub fn checks(&self) -> (usize, usize) {
        let total = self.rows.iter().filter(|r| r.passed.is_some()).count();
        let passed = self.rows.iter().filter(|r| r.passed == Some(true)).count();
        (passed, total)
    }

    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed != Some(false))
    }
}

pub(crate) fn now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Appends one record as a line.
pub fn append(path: &Path, record: &RunRecord) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut line = serde_json::to_string(record).map_err(|e| HarnessError::Record {
        path: path.display().to_string(),
        line: 0,
        source: e,
    })?;
    line.push('\n');
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| HarnessError::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<RunRecord>> {
    let f = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Record {
            path: path.display().to_string(),
            line: i + 1,
            source: e,
        })?);
    }
    Ok(out)
}
