use std::fmt;

use serde_json::{json, Value};

use crate::sexpr::{SExpr, SExprKind};

/// The C-Lisp type lattice. `int` is 32 bits; pointers are 64 bits.
///
/// Equality is structural, except that structs compare by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CLispType {
    Void,
    Int8,
    Int,
    Int64,
    Float32,
    Float64,
    Ptr(Box<CLispType>),
    Struct(String),
}

impl CLispType {
    pub fn ptr(pointee: CLispType) -> Self {
        CLispType::Ptr(Box::new(pointee))
    }

    pub fn int_bits(&self) -> Option<u32> {
        match self {
            CLispType::Int8 => Some(8),
            CLispType::Int => Some(32),
            CLispType::Int64 => Some(64),
            _ => None,
        }
    }

    pub fn float_bits(&self) -> Option<u32> {
        match self {
            CLispType::Float32 => Some(32),
            CLispType::Float64 => Some(64),
            _ => None,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.int_bits().is_some()
    }

    pub fn is_float(&self) -> bool {
        self.float_bits().is_some()
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, CLispType::Ptr(_))
    }

    pub fn primitive(name: &str) -> Option<Self> {
        Some(match name {
            "void" => CLispType::Void,
            "int8" => CLispType::Int8,
            "int" => CLispType::Int,
            "int64" => CLispType::Int64,
            "float32" => CLispType::Float32,
            "float64" => CLispType::Float64,
            _ => return None,
        })
    }

    /// Reads a type written as `int`, `(ptr T)` or a struct name.
    pub fn from_sexpr(expr: &SExpr) -> Option<Self> {
        match &expr.kind {
            SExprKind::Symbol(name) => {
                Some(Self::primitive(name).unwrap_or_else(|| CLispType::Struct(name.clone())))
            }
            SExprKind::List(items) => match items.as_slice() {
                [head, pointee] if head.as_symbol() == Some("ptr") => {
                    Self::from_sexpr(pointee).map(Self::ptr)
                }
                _ => None,
            },
            _ => None,
        }
    }

    pub fn to_sexpr(&self) -> SExpr {
        match self {
            CLispType::Ptr(inner) => SExpr::list(vec![SExpr::symbol("ptr"), inner.to_sexpr()]),
            other => SExpr::symbol(other.to_string()),
        }
    }

    /// The JSON form, as a macro would return it.
    pub fn to_json(&self) -> Value {
        match self {
            CLispType::Ptr(inner) => json!(["ptr", inner.to_json()]),
            other => Value::String(other.to_string()),
        }
    }
}

impl fmt::Display for CLispType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CLispType::Void => f.write_str("void"),
            CLispType::Int8 => f.write_str("int8"),
            CLispType::Int => f.write_str("int"),
            CLispType::Int64 => f.write_str("int64"),
            CLispType::Float32 => f.write_str("float32"),
            CLispType::Float64 => f.write_str("float64"),
            CLispType::Ptr(inner) => write!(f, "(ptr {inner})"),
            CLispType::Struct(name) => f.write_str(name),
        }
    }
}
