use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

/// A payload value as it arrives from an agent's YAML block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PayloadValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<PayloadValue>),
}

pub type Payload = BTreeMap<String, PayloadValue>;

impl PayloadValue {
    fn from_yaml(value: &Value) -> Result<Self, String> {
        Ok(match value {
            Value::Null => PayloadValue::Null,
            Value::Bool(b) => PayloadValue::Bool(*b),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    PayloadValue::Int(i)
                } else if let Some(f) = n.as_f64() {
                    PayloadValue::Float(f)
                } else {
                    return Err("unrepresentable number".into());
                }
            }
            Value::String(s) => PayloadValue::Text(s.clone()),
            Value::Sequence(items) => {
                PayloadValue::List(items.iter().map(PayloadValue::from_yaml).collect::<Result<_, _>>()?)
            }
            Value::Mapping(_) => return Err("nested mappings are not supported".into()),
            Value::Tagged(_) => return Err("tagged values are not supported".into()),
        })
    }

    fn to_yaml(&self) -> Value {
        match self {
            PayloadValue::Null => Value::Null,
            PayloadValue::Bool(b) => Value::Bool(*b),
            PayloadValue::Int(i) => Value::Number((*i).into()),
            PayloadValue::Float(f) => Value::Number((*f).into()),
            PayloadValue::Text(s) => Value::String(s.clone()),
            PayloadValue::List(items) => Value::Sequence(items.iter().map(PayloadValue::to_yaml).collect()),
        }
    }

    /// Scalar rendering used when a text field receives a number or boolean.
    pub fn scalar_text(&self) -> Option<String> {
        match self {
            PayloadValue::Bool(b) => Some(b.to_string()),
            PayloadValue::Int(i) => Some(i.to_string()),
            PayloadValue::Float(f) => Some(f.to_string()),
            PayloadValue::Text(s) => Some(s.clone()),
            PayloadValue::Null | PayloadValue::List(_) => None,
        }
    }
}

fn key_text(key: &Value) -> Result<String, String> {
    match key {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err("payload keys must be scalars".into()),
    }
}

/// Parses the body of a payload block. An empty body is an empty payload.
pub fn parse_block(body: &str) -> Result<Payload, String> {
    let value: Value = serde_yaml::from_str(body).map_err(|e| e.to_string())?;
    match value {
        Value::Null => Ok(Payload::new()),
        Value::Mapping(map) => {
            let mut out = Payload::new();
            for (k, v) in &map {
                out.insert(key_text(k)?, PayloadValue::from_yaml(v)?);
            }
            Ok(out)
        }
        _ => Err("payload block must be a key-value mapping".into()),
    }
}

/// Canonical YAML rendering of a payload (without fences).
pub fn render_block(payload: &Payload) -> String {
    if payload.is_empty() {
        return String::new();
    }
    let map: serde_yaml::Mapping = payload
        .iter()
        .map(|(k, v)| (Value::String(k.clone()), v.to_yaml()))
        .collect();
    serde_yaml::to_string(&Value::Mapping(map)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_mapping_rejected() {
        assert!(parse_block("a:\n  b: 1\n").is_err());
    }

    #[test]
    fn numeric_keys_become_text() {
        let p = parse_block("1: one\n").unwrap();
        assert_eq!(p["1"], PayloadValue::Text("one".into()));
    }

    #[test]
    fn render_then_parse_is_identity() {
        let mut p = Payload::new();
        p.insert("content".into(), PayloadValue::Text("line one\nline: two\n".into()));
        p.insert("tick".into(), PayloadValue::Int(3));
        p.insert(
            "tags".into(),
            PayloadValue::List(vec![PayloadValue::Text("a".into()), PayloadValue::Bool(true)]),
        );
        assert_eq!(parse_block(&render_block(&p)).unwrap(), p);
    }
}
