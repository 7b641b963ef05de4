//! Positional content strings such as `[1645254204, 867.00, nan, 0.006418]`.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorRecord;
use crate::error::{ResourceError, Result};

/// One slot of a positional payload. `nan` on the wire becomes [`PayloadValue::Null`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadValue {
    Number(f64),
    Text(String),
    Null,
}

impl PayloadValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            PayloadValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, PayloadValue::Null)
    }
}

impl fmt::Display for PayloadValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayloadValue::Number(v) => write!(f, "{v}"),
            PayloadValue::Text(s) => write!(f, "\"{}\"", s.replace('"', "")),
            PayloadValue::Null => f.write_str("nan"),
        }
    }
}

pub type NamedValues = IndexMap<String, PayloadValue>;

/// Splits a bracketed array into its values.
pub fn parse_positional(con: &str) -> Result<Vec<PayloadValue>> {
    let trimmed = con.trim();
    let inner = trimmed
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| ResourceError::MalformedContent(format!("not a bracketed array: {con}")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }

    let mut values = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let value = match chars.peek() {
            Some(&q) if q == '"' || q == '\'' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some(c) if c == q => break,
                        Some(c) => s.push(c),
                        None => {
                            return Err(ResourceError::MalformedContent(
                                "unterminated string".into(),
                            ))
                        }
                    }
                }
                PayloadValue::Text(s)
            }
            _ => {
                let mut tok = String::new();
                while let Some(&c) = chars.peek() {
                    if c == ',' {
                        break;
                    }
                    tok.push(c);
                    chars.next();
                }
                parse_token(tok.trim())?
            }
        };
        values.push(value);
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next() {
            None => break,
            Some(',') => continue,
            Some(c) => {
                return Err(ResourceError::MalformedContent(format!(
                    "unexpected {c:?} after value"
                )))
            }
        }
    }
    Ok(values)
}

fn parse_token(tok: &str) -> Result<PayloadValue> {
    match tok.to_ascii_lowercase().as_str() {
        "" => Err(ResourceError::MalformedContent("empty value".into())),
        "nan" | "null" | "none" => Ok(PayloadValue::Null),
        _ => match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(PayloadValue::Number(v)),
            Ok(_) => Ok(PayloadValue::Null),
            Err(_) => Err(ResourceError::MalformedContent(format!("not a number: {tok}"))),
        },
    }
}

pub fn format_positional<'a, I>(values: I) -> String
where
    I: IntoIterator<Item = &'a PayloadValue>,
{
    let parts: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Binds the i-th value of `con` to the i-th data string parameter.
pub fn parse_positional_payload(desc: &DescriptorRecord, con: &str) -> Result<NamedValues> {
    let values = parse_positional(con)?;
    let names = desc.parameter_names();
    if values.len() != names.len() {
        return Err(ResourceError::ArityMismatch {
            expected: names.len(),
            found: values.len(),
        });
    }
    Ok(names.into_iter().map(str::to_owned).zip(values).collect())
}
