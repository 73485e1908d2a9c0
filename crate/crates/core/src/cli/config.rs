//! Flat `key=value` configuration text.
//!
//! A config file holds one entry per line; `#` starts a comment line. A
//! battery file holds one record per line, each a whitespace-separated list
//! of `key=value` tokens.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    pub column: usize,
}

fn parse_token(token: &str, line: usize, column: usize) -> Result<Entry> {
    let err = |column: usize, message: String| Error::Parse {
        line,
        column,
        message,
    };
    let Some(eq) = token.find('=') else {
        return Err(err(column, format!("expected key=value, got {token:?}")));
    };
    let key = token[..eq].trim_end();
    let value = token[eq + 1..].trim();
    if key.is_empty() {
        return Err(err(column, "empty key".into()));
    }
    if let Some(off) = key.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
        return Err(err(
            column + off,
            format!("invalid character in key {key:?}"),
        ));
    }
    if value.is_empty() {
        return Err(err(
            column + eq + 1,
            format!("missing value for key {key:?}"),
        ));
    }
    Ok(Entry {
        key: key.replace('_', "-"),
        value: value.to_string(),
        line,
        column,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.trim_start();
        let indent = raw.len() - body.len();
        let body = body.trim_end();
        (!body.is_empty() && !body.starts_with('#')).then_some((i + 1, indent + 1, body))
    })
}

/// Entries of a config document. Keys are normalised to kebab case so that
/// `burn_in` and `burn-in` name the same flag; a repeated key is an error.
pub fn parse_config(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (line, column, body) in content_lines(text) {
        let e = parse_token(body, line, column)?;
        if let Some(prev) = out.iter().find(|p| p.key == e.key) {
            return Err(Error::Parse {
                line,
                column,
                message: format!("key {:?} already set on line {}", e.key, prev.line),
            });
        }
        out.push(e);
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<Entry>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Records of a battery document, one per non-empty line.
pub fn parse_battery(text: &str) -> Result<Vec<Vec<Entry>>> {
    content_lines(text)
        .map(|(line, column, body)| {
            let mut entries: Vec<Entry> = Vec::new();
            let mut offset = 0;
            for token in body.split_whitespace() {
                let start = offset + body[offset..].find(token).expect("token comes from body");
                offset = start + token.len();
                let e = parse_token(token, line, column + start)?;
                if entries.iter().any(|p| p.key == e.key) {
                    return Err(Error::Parse {
                        line,
                        column: e.column,
                        message: format!("key {:?} repeated", e.key),
                    });
                }
                entries.push(e);
            }
            Ok(entries)
        })
        .collect()
}
