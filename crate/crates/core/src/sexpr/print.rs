use super::{SExpr, SExprKind};

/// Canonical single-line rendering: one space between list elements, no
/// trailing whitespace, strings re-escaped.
pub fn print_sexpr(expr: &SExpr) -> String {
    let mut out = String::new();
    write_sexpr(expr, &mut out);
    out
}

fn write_sexpr(expr: &SExpr, out: &mut String) {
    match &expr.kind {
        SExprKind::Symbol(s) => out.push_str(s),
        SExprKind::Integer(v) => out.push_str(&v.to_string()),
        // `{:?}` is the shortest representation that reads back to the same
        // bits, and always carries a `.` or an exponent.
        SExprKind::Float(v) => out.push_str(&format!("{v:?}")),
        SExprKind::String(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        SExprKind::List(items) => {
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_sexpr(item, out);
            }
            out.push(')');
        }
    }
}
