use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::attributes::Document;

/// One corpus line: a document plus where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(flatten)]
    pub document: Document,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

impl From<Document> for CorpusRecord {
    fn from(document: Document) -> Self {
        Self {
            document,
            dataset: None,
            split: None,
        }
    }
}

/// Parses JSON lines; blank lines are skipped. Line numbers start at 1.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, HarnessError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| HarnessError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(rec.document.id.clone()) {
            return Err(HarnessError::DuplicateId {
                line: line_no,
                id: rec.document.id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_corpus(&text)
}

/// JSON lines, one record per line, each newline-terminated.
pub fn write_corpus(records: &[CorpusRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}
