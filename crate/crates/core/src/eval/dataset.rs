use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rewards::GoldRecord;

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<GoldRecord>,
    pub errors: Vec<LineError>,
}

/// Reads a gold JSONL file. Bad lines are collected, not fatal, unless no
/// line is valid.
pub fn load_dataset(path: &Path) -> Result<Dataset, EvalError> {
    let io = |e| EvalError::io(path, e);
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<GoldRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r))
            .and_then(|r| {
                if seen.insert(r.id.clone()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate id \"{}\"", r.id))
                }
            });
        match parsed {
            Ok(r) => records.push(r),
            Err(message) => {
                tracing::warn!("{}:{}: {message}", path.display(), i + 1);
                errors.push(LineError { line: i + 1, message });
            }
        }
    }
    if records.is_empty() {
        return Err(EvalError::EmptyDataset {
            path: path.to_owned(),
            errors,
        });
    }
    Ok(Dataset { records, errors })
}
