//! Plain `key = value` configuration files. Blank lines and lines starting
//! with `#` are ignored.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Entry {
    pub fn unknown_key(&self) -> KvError {
        KvError::UnknownKey {
            line: self.line,
            key: self.key.clone(),
        }
    }

    pub fn invalid(&self, message: impl Into<String>) -> KvError {
        KvError::InvalidValue {
            line: self.line,
            key: self.key.clone(),
            message: message.into(),
        }
    }

    pub fn bool_value(&self) -> Result<bool, KvError> {
        match self.value.as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(self.invalid(format!("`{other}` is not a boolean"))),
        }
    }

    pub fn parsed<T: std::str::FromStr>(&self) -> Result<T, KvError>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse::<T>().map_err(|e| self.invalid(e.to_string()))
    }
}

pub fn parse(text: &str) -> Result<Vec<Entry>, KvError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::Syntax { line: i + 1 });
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Comma-separated list items, trimmed, empties dropped.
pub fn split_list(value: &str) -> impl Iterator<Item = String> + '_ {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries() {
        let e = parse("# c\n\n a = 1 \nb=x = y\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].key, "a");
        assert_eq!(e[0].value, "1");
        assert_eq!(e[1].value, "x = y");
        assert_eq!(e[1].line, 4);
        assert_eq!(parse("novalue\n").unwrap_err(), KvError::Syntax { line: 1 });
        assert_eq!(split_list(" a, ,b ").collect::<Vec<_>>(), ["a", "b"]);
    }
}
