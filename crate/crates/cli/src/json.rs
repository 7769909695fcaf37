//! Ordered JSON documents with fixed number formatting.
//!
//! Objects keep insertion order and floats are written with 17 significant
//! digits, so equal inputs always serialize to the same bytes and every
//! `f64` reads back bit-exactly.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Num(f64),
    Int(i64),
    Str(String),
    Arr(Vec<Value>),
    Obj(Vec<(String, Value)>),
}

/// `{:.16e}` for finite values, `"inf"` / `"-inf"` strings for infinities
/// and `null` for NaN.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "null".into()
    } else if v == f64::INFINITY {
        "\"inf\"".into()
    } else if v == f64::NEG_INFINITY {
        "\"-inf\"".into()
    } else {
        format!("{v:.16e}")
    }
}

impl Value {
    pub fn obj() -> Value {
        Value::Obj(Vec::new())
    }

    /// Appends a key; panics on non-objects.
    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Value {
        match &mut self {
            Value::Obj(fields) => fields.push((key.to_string(), v.into())),
            _ => panic!("with() on a non-object"),
        }
        self
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Value::Arr(_) | Value::Obj(_))
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Num(v) => out.push_str(&format_f64(*v)),
            Value::Int(i) => write!(out, "{i}").unwrap(),
            Value::Str(s) => out.push_str(&serde_json::to_string(s).unwrap()),
            Value::Arr(items) if items.is_empty() => out.push_str("[]"),
            Value::Arr(items) if items.iter().all(Value::is_scalar) => {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.write(out, indent);
                }
                out.push(']');
            }
            Value::Arr(items) => {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    out.push_str(if i > 0 { ",\n" } else { "\n" });
                    pad(out, indent + 1);
                    v.write(out, indent + 1);
                }
                out.push('\n');
                pad(out, indent);
                out.push(']');
            }
            Value::Obj(fields) if fields.is_empty() => out.push_str("{}"),
            Value::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    out.push_str(if i > 0 { ",\n" } else { "\n" });
                    pad(out, indent + 1);
                    out.push_str(&serde_json::to_string(k).unwrap());
                    out.push_str(": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                pad(out, indent);
                out.push('}');
            }
        }
    }

    /// Pretty-printed document with a trailing newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::Arr(v.into_iter().map(Into::into).collect())
    }
}

impl From<&[f64]> for Value {
    fn from(v: &[f64]) -> Self {
        Value::Arr(v.iter().map(|&x| Value::Num(x)).collect())
    }
}

impl From<riskgrowth::ExtReal> for Value {
    fn from(v: riskgrowth::ExtReal) -> Self {
        Value::Num(v.to_f64())
    }
}

/// Splits a flat row-major buffer into `rows × cols` nested arrays.
pub fn matrix(data: &[f64], cols: usize) -> Value {
    Value::Arr(data.chunks(cols).map(Value::from).collect())
}

/// Nested `[x][u][y]` arrays from a flat `s × a × s` tensor.
pub fn tensor(data: &[f64], a: usize, s: usize) -> Value {
    Value::Arr(data.chunks(a * s).map(|block| matrix(block, s)).collect())
}
