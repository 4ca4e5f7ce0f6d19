//! S-expression trees: reading, printing, and the JSON interchange form.
//!
//! Every stage of the toolchain speaks [`SExpr`]. Source files are read with
//! [`parse_sexprs`], written back with [`print_sexpr`], and exchanged with
//! other processes through [`to_json`] / [`from_json`].

mod json;
mod parse;
mod print;

use std::fmt;

pub use json::{from_json, from_json_forms, to_json, to_json_forms, JsonError, STRING_MARKER};
pub use parse::{parse_sexprs, ParseError};
pub use print::print_sexpr;

/// A top-level JSON array with one compact form per line, as the CLI
/// writes it. Anything other than a nonempty array renders as `[]`.
pub fn render_json_forms(forms: &serde_json::Value) -> String {
    match forms.as_array() {
        Some(items) if !items.is_empty() => {
            let body: Vec<String> = items.iter().map(serde_json::Value::to_string).collect();
            format!("[\n{}\n]\n", body.join(",\n"))
        }
        _ => "[]\n".to_owned(),
    }
}

/// One printed form per line.
pub fn render_forms(forms: &[SExpr]) -> String {
    forms
        .iter()
        .map(|f| format!("{}\n", print_sexpr(f)))
        .collect()
}

/// 1-based line and column of the first character of a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourcePosition {
    pub line: u32,
    pub column: u32,
}

impl SourcePosition {
    pub fn new(line: u32, column: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self { line, column }
    }
}

impl fmt::Display for SourcePosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone)]
pub enum SExprKind {
    Symbol(String),
    Integer(i64),
    Float(f64),
    String(String),
    List(Vec<SExpr>),
}

/// A node of an S-expression tree.
///
/// Equality is structural and ignores source positions. `Integer` and
/// `Float` never compare equal to each other, and floats compare by bit
/// pattern so that `-0.0` and `0.0` stay distinct.
#[derive(Debug, Clone)]
pub struct SExpr {
    pub kind: SExprKind,
    pub pos: Option<SourcePosition>,
}

impl PartialEq for SExprKind {
    fn eq(&self, other: &Self) -> bool {
        use SExprKind::*;
        match (self, other) {
            (Symbol(a), Symbol(b)) => a == b,
            (Integer(a), Integer(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (String(a), String(b)) => a == b,
            (List(a), List(b)) => a == b,
            _ => false,
        }
    }
}

impl PartialEq for SExpr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl SExpr {
    pub fn new(kind: SExprKind) -> Self {
        Self { kind, pos: None }
    }

    pub fn at(mut self, pos: SourcePosition) -> Self {
        self.pos = Some(pos);
        self
    }

    pub fn symbol(text: impl Into<String>) -> Self {
        Self::new(SExprKind::Symbol(text.into()))
    }

    pub fn integer(value: i64) -> Self {
        Self::new(SExprKind::Integer(value))
    }

    pub fn float(value: f64) -> Self {
        Self::new(SExprKind::Float(value))
    }

    pub fn string(text: impl Into<String>) -> Self {
        Self::new(SExprKind::String(text.into()))
    }

    pub fn list(items: Vec<SExpr>) -> Self {
        Self::new(SExprKind::List(items))
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match &self.kind {
            SExprKind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match &self.kind {
            SExprKind::List(items) => Some(items),
            _ => None,
        }
    }

    /// The head symbol of a list form, if it has one.
    pub fn head(&self) -> Option<&str> {
        self.as_list()
            .and_then(|items| items.first())
            .and_then(SExpr::as_symbol)
    }

    /// Whether this tree contains an `unquote` or `unquote-splicing` form.
    pub fn contains_unquote(&self) -> bool {
        match &self.kind {
            SExprKind::List(items) => {
                matches!(self.head(), Some("unquote" | "unquote-splicing"))
                    || items.iter().any(SExpr::contains_unquote)
            }
            _ => false,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_sexpr(self))
    }
}

/// Characters that can never appear inside a symbol.
pub(crate) fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';')
}

/// What a bare token reads as.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenClass {
    Integer(i64),
    IntegerOverflow,
    Float(f64),
    Symbol,
}

pub(crate) fn classify_token(text: &str) -> TokenClass {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        return match text.parse::<i64>() {
            Ok(v) => TokenClass::Integer(v),
            Err(_) => TokenClass::IntegerOverflow,
        };
    }
    if looks_like_real(digits) {
        if let Ok(v) = text.parse::<f64>() {
            return TokenClass::Float(v);
        }
    }
    TokenClass::Symbol
}

// digits [. digits] [e [+-] digits], needing a `.` or an exponent and at
// least one mantissa digit.
fn looks_like_real(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    let int_digits = b.iter().take_while(|c| c.is_ascii_digit()).count();
    i += int_digits;
    let mut frac_digits = 0;
    let mut has_dot = false;
    if i < b.len() && b[i] == b'.' {
        has_dot = true;
        i += 1;
        frac_digits = b[i..].iter().take_while(|c| c.is_ascii_digit()).count();
        i += frac_digits;
    }
    if int_digits + frac_digits == 0 {
        return false;
    }
    let mut has_exp = false;
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_digits = b[i..].iter().take_while(|c| c.is_ascii_digit()).count();
        if exp_digits == 0 {
            return false;
        }
        i += exp_digits;
        has_exp = true;
    }
    i == b.len() && (has_dot || has_exp)
}

/// The reserved symbol that marks string literals in JSON.
pub const RESERVED_SYMBOL: &str = STRING_MARKER;

/// Whether `text` can be printed as a symbol and read back as the same
/// symbol.
pub fn is_valid_symbol(text: &str) -> bool {
    !text.is_empty()
        && !text.starts_with(',')
        && !text.chars().any(is_delimiter)
        && text != RESERVED_SYMBOL
        && classify_token(text) == TokenClass::Symbol
}
