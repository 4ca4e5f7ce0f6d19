use serde_json::Value;
use thiserror::Error;

use super::{is_valid_symbol, SExpr, SExprKind};

/// Head of the two-element array that encodes a string literal.
pub const STRING_MARKER: &str = "string";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JsonError {
    #[error("{path}: JSON {kind} has no S-expression form")]
    UnsupportedValue { path: String, kind: &'static str },
    #[error("{path}: string {text:?} is not a valid symbol")]
    InvalidSymbol { path: String, text: String },
    #[error("{path}: integer {text} does not fit in 64 bits")]
    IntegerOutOfRange { path: String, text: String },
    #[error("expected a JSON array of forms at the top level")]
    NotAFormList,
}

/// Symbols become strings, numbers stay numbers, lists become arrays, and a
/// string literal becomes `["string", text]`.
pub fn to_json(expr: &SExpr) -> Value {
    match &expr.kind {
        SExprKind::Symbol(s) => Value::String(s.clone()),
        SExprKind::Integer(v) => Value::from(*v),
        SExprKind::Float(v) => Value::from(*v),
        SExprKind::String(s) => Value::Array(vec![
            Value::String(STRING_MARKER.into()),
            Value::String(s.clone()),
        ]),
        SExprKind::List(items) => Value::Array(items.iter().map(to_json).collect()),
    }
}

/// Encodes a sequence of top-level forms as one JSON array.
pub fn to_json_forms(forms: &[SExpr]) -> Value {
    Value::Array(forms.iter().map(to_json).collect())
}

/// Inverse of [`to_json`]. Booleans, null and objects are rejected.
pub fn from_json(value: &Value) -> Result<SExpr, JsonError> {
    convert(value, &mut Vec::new())
}

/// Decodes a top-level JSON array into its forms.
pub fn from_json_forms(value: &Value) -> Result<Vec<SExpr>, JsonError> {
    let Value::Array(items) = value else {
        return Err(JsonError::NotAFormList);
    };
    let mut path = Vec::new();
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            path.push(i);
            let form = convert(item, &mut path);
            path.pop();
            form
        })
        .collect()
}

fn render_path(path: &[usize]) -> String {
    let mut s = String::from("$");
    for i in path {
        s.push_str(&format!("[{i}]"));
    }
    s
}

fn convert(value: &Value, path: &mut Vec<usize>) -> Result<SExpr, JsonError> {
    match value {
        Value::String(s) => {
            if is_valid_symbol(s) {
                Ok(SExpr::symbol(s.clone()))
            } else {
                Err(JsonError::InvalidSymbol {
                    path: render_path(path),
                    text: s.clone(),
                })
            }
        }
        Value::Number(n) => {
            if let Some(v) = n.as_i64() {
                Ok(SExpr::integer(v))
            } else if n.is_u64() {
                Err(JsonError::IntegerOutOfRange {
                    path: render_path(path),
                    text: n.to_string(),
                })
            } else {
                Ok(SExpr::float(n.as_f64().expect("finite JSON number")))
            }
        }
        Value::Array(items) => {
            if let [Value::String(marker), Value::String(text)] = items.as_slice() {
                if marker == STRING_MARKER {
                    return Ok(SExpr::string(text.clone()));
                }
            }
            let mut children = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                path.push(i);
                children.push(convert(item, path)?);
                path.pop();
            }
            Ok(SExpr::list(children))
        }
        Value::Null => Err(JsonError::UnsupportedValue {
            path: render_path(path),
            kind: "null",
        }),
        Value::Bool(_) => Err(JsonError::UnsupportedValue {
            path: render_path(path),
            kind: "boolean",
        }),
        Value::Object(_) => Err(JsonError::UnsupportedValue {
            path: render_path(path),
            kind: "object",
        }),
    }
}
