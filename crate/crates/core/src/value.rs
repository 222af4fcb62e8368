//! Runtime values. MiniScript is dynamically typed; every value carries a
//! tag. Strings are immutable byte strings (8-bit code units).

use crate::util::{decode_str_token, encode_str_token};
use std::fmt;

/// Maximum string length a run may produce. Producing a longer string
/// raises a catchable `RangeError`.
pub const MAX_STRING_LEN: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Str(Vec<u8>),
    Bool(bool),
    Null,
}

impl Value {
    pub fn str_from(s: &str) -> Value {
        Value::Str(s.as_bytes().to_vec())
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Str(_) => "string",
            Value::Bool(_) => "bool",
            Value::Null => "null",
        }
    }

    /// JS-style ToBoolean: `0`, `""`, `false` and `null` are falsy.
    pub fn truthy(&self) -> bool {
        match self {
            Value::Int(n) => *n != 0,
            Value::Str(s) => !s.is_empty(),
            Value::Bool(b) => *b,
            Value::Null => false,
        }
    }

    /// Stable single-token encoding used by trace files and CLI output.
    pub fn encode(&self) -> String {
        match self {
            Value::Int(n) => n.to_string(),
            Value::Str(s) => encode_str_token(s),
            Value::Bool(b) => b.to_string(),
            Value::Null => "-".to_string(),
        }
    }

    pub fn decode(ty: &str, token: &str) -> Result<Value, String> {
        match ty {
            "int" => token.parse().map(Value::Int).map_err(|e| format!("bad int: {e}")),
            "str" | "string" => decode_str_token(token).map(Value::Str),
            "bool" => token.parse().map(Value::Bool).map_err(|e| format!("bad bool: {e}")),
            "null" => Ok(Value::Null),
            other => Err(format!("unknown value type `{other}`")),
        }
    }

    /// Short type token for the trace format (`int`, `str`, `bool`, `null`).
    pub fn type_token(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Str(_) => "str",
            Value::Bool(_) => "bool",
            Value::Null => "null",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "\"{}\"", String::from_utf8_lossy(s)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => write!(f, "null"),
        }
    }
}
