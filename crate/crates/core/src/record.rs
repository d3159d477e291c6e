//! Line-oriented `key: value` record files.
//!
//! Every `.corpus` file (sites, taxonomy, knowledge, lexicon, fixtures and
//! workflow descriptors) shares this format: UTF-8 text, records separated by
//! blank lines, `#` comment lines, and a leading header record that is exactly
//! `corpus_version: 1`. Keys may repeat inside a record to express lists.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}:{line}: {message}")]
pub struct RecordError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Field {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// One blank-line separated block of fields.
#[derive(Debug, Clone)]
pub struct Record {
    path: Arc<PathBuf>,
    line: usize,
    fields: Vec<Field>,
}

impl Record {
    pub fn line(&self) -> usize {
        self.line
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// The first field names the record kind, e.g. `site: ruishi-lou`.
    pub fn kind(&self) -> (&str, &str) {
        let f = &self.fields[0];
        (&f.key, &f.value)
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> RecordError {
        RecordError {
            path: self.path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn opt(&self, key: &str) -> Result<Option<&str>, RecordError> {
        let mut found = self.fields.iter().filter(|f| f.key == key);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(self.error(dup.line, format!("field `{key}` given more than once")));
        }
        match first {
            Some(f) if f.value.is_empty() => Err(self.error(f.line, format!("field `{key}` is empty"))),
            Some(f) => Ok(Some(f.value.as_str())),
            None => Ok(None),
        }
    }

    pub fn one(&self, key: &str) -> Result<&str, RecordError> {
        self.opt(key)?
            .ok_or_else(|| self.error(self.line, format!("missing required field `{key}`")))
    }

    /// All values for a repeatable key, in authored order.
    pub fn all(&self, key: &str) -> Result<Vec<&str>, RecordError> {
        self.fields
            .iter()
            .filter(|f| f.key == key)
            .map(|f| {
                if f.value.is_empty() {
                    Err(self.error(f.line, format!("field `{key}` is empty")))
                } else {
                    Ok(f.value.as_str())
                }
            })
            .collect()
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.fields.iter().find(|f| f.key == key).map_or(self.line, |f| f.line)
    }

    /// Rejects keys outside `allowed`.
    pub fn only_keys(&self, allowed: &[&str]) -> Result<(), RecordError> {
        for f in &self.fields {
            if !allowed.contains(&f.key.as_str()) {
                return Err(self.error(f.line, format!("unknown field `{}`", f.key)));
            }
        }
        Ok(())
    }

    pub fn parse_num<T: std::str::FromStr>(&self, key: &str) -> Result<T, RecordError> {
        let raw = self.one(key)?;
        raw.parse()
            .map_err(|_| self.error(self.line_of(key), format!("`{key}` is not a number: {raw}")))
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (k, v) = self.kind();
        write!(f, "{k}: {v} ({}:{})", self.path.display(), self.line)
    }
}

/// Parses a whole file body. The header record is validated and dropped.
pub fn parse_records(text: &str, path: &Path) -> Result<Vec<Record>, RecordError> {
    let shared = Arc::new(path.to_path_buf());
    let err = |line: usize, message: String| RecordError {
        path: path.display().to_string(),
        line,
        message,
    };

    let mut records = Vec::new();
    let mut current: Vec<Field> = Vec::new();
    let mut start = 0;
    let flush = |current: &mut Vec<Field>, start: usize, records: &mut Vec<Record>| {
        if !current.is_empty() {
            records.push(Record {
                path: shared.clone(),
                line: start,
                fields: std::mem::take(current),
            });
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.trim_start().starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            flush(&mut current, start, &mut records);
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(err(line_no, format!("expected `key: value`, got `{}`", line.trim())));
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(err(line_no, format!("malformed key `{key}`")));
        }
        if current.is_empty() {
            start = line_no;
        }
        current.push(Field {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    flush(&mut current, start, &mut records);

    let Some(header) = records.first() else {
        return Err(err(1, "missing `corpus_version` header".into()));
    };
    let (key, value) = header.kind();
    if key != "corpus_version" || header.fields.len() != 1 {
        return Err(err(
            header.line,
            "first record must be exactly `corpus_version: 1`".into(),
        ));
    }
    if value.parse::<u32>().ok() != Some(CORPUS_VERSION) {
        return Err(err(header.line, format!("unsupported corpus_version `{value}`")));
    }
    records.remove(0);
    Ok(records)
}
