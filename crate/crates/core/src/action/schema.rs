use std::collections::BTreeMap;

use thiserror::Error;

use super::parser::ActionInvocation;
use super::payload::PayloadValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Text,
    /// Accepts either a YAML list or a comma-separated string.
    List,
    Bool,
    Int,
}

#[derive(Debug, Clone, Copy)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldSpec {
    pub const fn required(name: &'static str, kind: FieldKind) -> Self {
        Self {
            name,
            kind,
            required: true,
        }
    }

    pub const fn optional(name: &'static str, kind: FieldKind) -> Self {
        Self {
            name,
            kind,
            required: false,
        }
    }
}

pub type FieldSchema = [FieldSpec];

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Text(String),
    List(Vec<String>),
    Bool(bool),
    Int(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("missing required field `{0}`")]
    MissingRequired(String),
    #[error("field `{0}` has the wrong kind (expected {1})")]
    WrongKind(String, &'static str),
}

/// Coerced payload fields, keyed by schema field name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fields(BTreeMap<&'static str, FieldValue>);

impl Fields {
    pub fn text(&self, name: &str) -> Option<&str> {
        match self.0.get(name)? {
            FieldValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self, name: &str) -> Option<&[String]> {
        match self.0.get(name)? {
            FieldValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        match self.0.get(name)? {
            FieldValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.0.get(name)? {
            FieldValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn coerce(value: &PayloadValue, spec: &FieldSpec) -> Result<Option<FieldValue>, ValidationError> {
    let wrong = |what| ValidationError::WrongKind(spec.name.to_string(), what);
    if matches!(value, PayloadValue::Null) {
        return Ok(None);
    }
    let v = match spec.kind {
        FieldKind::Text => {
            let s = value.scalar_text().ok_or_else(|| wrong("text"))?;
            if s.trim().is_empty() {
                return Ok(None);
            }
            FieldValue::Text(s)
        }
        FieldKind::List => {
            let items = match value {
                PayloadValue::Text(s) => split_list(s),
                PayloadValue::List(items) => {
                    let mut out = Vec::new();
                    for item in items {
                        let s = item.scalar_text().ok_or_else(|| wrong("list of scalars"))?;
                        let s = s.trim();
                        if !s.is_empty() {
                            out.push(s.to_string());
                        }
                    }
                    out
                }
                other => vec![other.scalar_text().ok_or_else(|| wrong("list"))?],
            };
            if items.is_empty() {
                return Ok(None);
            }
            FieldValue::List(items)
        }
        FieldKind::Bool => match value {
            PayloadValue::Bool(b) => FieldValue::Bool(*b),
            PayloadValue::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "true" | "yes" => FieldValue::Bool(true),
                "false" | "no" => FieldValue::Bool(false),
                _ => return Err(wrong("boolean")),
            },
            _ => return Err(wrong("boolean")),
        },
        FieldKind::Int => match value {
            PayloadValue::Int(i) => FieldValue::Int(*i),
            PayloadValue::Float(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => FieldValue::Int(*f as i64),
            PayloadValue::Text(s) => FieldValue::Int(s.trim().parse().map_err(|_| wrong("integer"))?),
            _ => return Err(wrong("integer")),
        },
    };
    Ok(Some(v))
}

/// Checks an invocation's payload against a room's field schema. Fields not
/// named in the schema are ignored.
pub fn validate_payload(invocation: &ActionInvocation, schema: &FieldSchema) -> Result<Fields, ValidationError> {
    let mut fields = Fields::default();
    for spec in schema {
        let value = invocation.payload.as_ref().and_then(|p| p.get(spec.name));
        let coerced = match value {
            Some(v) => coerce(v, spec)?,
            None => None,
        };
        match coerced {
            Some(v) => {
                fields.0.insert(spec.name, v);
            }
            None if spec.required => return Err(ValidationError::MissingRequired(spec.name.to_string())),
            None => {}
        }
    }
    Ok(fields)
}
