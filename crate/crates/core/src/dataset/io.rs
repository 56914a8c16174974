//! JSONL storage: one session per line. Blank lines and lines starting with
//! `#` are skipped. When a file name names a split (`seen_test.jsonl`,
//! `corpus_train.jsonl`), every session in it must carry that split.

use std::fs;
use std::path::Path;

use super::DatasetError;
use crate::types::{Session, Split};

pub fn parse_jsonl(src: &str) -> Result<Vec<Session>, DatasetError> {
    parse_with_split(src, None)
}

fn parse_with_split(src: &str, expected: Option<Split>) -> Result<Vec<Session>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let session: Session =
            serde_json::from_str(line).map_err(|e| DatasetError::Decode { line: i + 1, reason: e.to_string() })?;
        if let Some(split) = expected {
            if session.split != split {
                return Err(DatasetError::Decode {
                    line: i + 1,
                    reason: format!("split {} in a {} file", session.split.as_str(), split.as_str()),
                });
            }
        }
        out.push(session);
    }
    Ok(out)
}

/// The split a file name announces, if any.
pub fn split_from_file_name(path: &Path) -> Option<Split> {
    let stem = path.file_stem()?.to_str()?;
    // longest names first so "unseen_test" is not read as "seen_test"
    let mut splits = Split::ALL;
    splits.sort_by_key(|s| std::cmp::Reverse(s.as_str().len()));
    splits.into_iter().find(|s| {
        let name = s.as_str();
        stem == name || stem.strip_suffix(name).is_some_and(|head| head.ends_with(['_', '-', '.']))
    })
}

pub fn load(path: &Path) -> Result<Vec<Session>, DatasetError> {
    let src =
        fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_with_split(&src, split_from_file_name(path))
}

pub fn to_jsonl(sessions: &[Session]) -> String {
    let mut out = String::new();
    for s in sessions {
        out.push_str(&serde_json::to_string(s).expect("session serialization cannot fail"));
        out.push('\n');
    }
    out
}

pub fn save(sessions: &[Session], path: &Path) -> Result<(), DatasetError> {
    fs::write(path, to_jsonl(sessions)).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}
