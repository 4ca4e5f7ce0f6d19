//! Macro preprocessing over the JSON form of a program.
//!
//! A macro expression is an array headed by `"unquote"` or
//! `"unquote-splicing"`. `["unquote", "NAME"]` is replaced by the value of
//! the variable macro `NAME`; `["unquote", ["NAME", args...]]` by the result
//! of calling the macro `NAME` with the unevaluated `args`. The splicing
//! forms do the same but the result (which must be an array) is spliced into
//! the enclosing array.
//!
//! Expansion is a single depth-first, left-to-right pass. Macro results are
//! substituted verbatim and are not scanned again.

mod host;
mod resolver;

use std::fmt;

use serde_json::Value;
use thiserror::Error;

use crate::sexpr::{self, JsonError, SExpr, SourcePosition};

pub use host::{HostRequest, HostResolver, HostResponse};
pub use resolver::{LayeredResolver, MacroResolver, ResolveError, StaticResolver};

pub const UNQUOTE: &str = "unquote";
pub const UNQUOTE_SPLICING: &str = "unquote-splicing";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacroKind {
    Variable,
    Call,
    SpliceVariable,
    SpliceCall,
}

impl MacroKind {
    pub fn is_splice(self) -> bool {
        matches!(self, MacroKind::SpliceVariable | MacroKind::SpliceCall)
    }
}

impl fmt::Display for MacroKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MacroKind::Variable => "variable",
            MacroKind::Call => "call",
            MacroKind::SpliceVariable => "splice-variable",
            MacroKind::SpliceCall => "splice-call",
        })
    }
}

/// Index path from the program root to a node, rendered as `$[i][j]...`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodePath(pub Vec<usize>);

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("$")?;
        for i in &self.0 {
            write!(f, "[{i}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroExpr {
    pub kind: MacroKind,
    pub name: String,
    /// Unevaluated arguments; empty for the variable kinds.
    pub args: Vec<Value>,
    pub path: NodePath,
    pub site: Option<SourcePosition>,
}

impl MacroExpr {
    fn location(&self) -> String {
        match self.site {
            Some(pos) => pos.to_string(),
            None => self.path.to_string(),
        }
    }
}

impl fmt::Display for MacroExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} {}", self.location(), self.kind, self.name)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(Value::to_string).collect();
            write!(f, " {}", args.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("{location}: malformed macro expression: {reason}")]
    Malformed { location: String, reason: String },
    #[error("{}: {} `{}`: {source}", .expr.location(), .expr.kind, .expr.name)]
    Resolve {
        expr: Box<MacroExpr>,
        #[source]
        source: ResolveError,
    },
    #[error("{}: splicing macro `{}` produced {found}, expected an array", .expr.location(), .expr.name)]
    SpliceNotArray {
        expr: Box<MacroExpr>,
        found: &'static str,
    },
    #[error("{}: splicing macro `{}` has no enclosing list to splice into", .expr.location(), .expr.name)]
    SpliceWithoutParent { expr: Box<MacroExpr> },
    #[error("expanded program is not a valid S-expression: {0}")]
    InvalidResult(#[from] JsonError),
}

impl ExpandError {
    /// Whether the failure came from the resolver's transport rather than
    /// from the program or macro definitions.
    pub fn is_host_failure(&self) -> bool {
        matches!(
            self,
            ExpandError::Resolve {
                source: ResolveError::Host(_),
                ..
            }
        )
    }
}

type Locate<'a> = &'a dyn Fn(&[usize]) -> Option<SourcePosition>;

fn no_sites(_: &[usize]) -> Option<SourcePosition> {
    None
}

/// Expands every macro expression in `program`.
pub fn expand(program: &Value, resolver: &mut dyn MacroResolver) -> Result<Value, ExpandError> {
    Expander {
        resolver,
        locate: &no_sites,
    }
    .expand_root(program)
}

/// Lists the macro expressions [`expand`] would evaluate, in evaluation
/// order, without resolving any of them.
pub fn scan_macros(program: &Value) -> Result<Vec<MacroExpr>, ExpandError> {
    let mut found = Vec::new();
    scan_node(program, &mut Vec::new(), &no_sites, &mut found)?;
    Ok(found)
}

/// Expands parsed top-level forms, reporting errors at source positions.
pub fn expand_forms(
    forms: &[SExpr],
    resolver: &mut dyn MacroResolver,
) -> Result<Vec<SExpr>, ExpandError> {
    let program = sexpr::to_json_forms(forms);
    let locate = |path: &[usize]| locate_in(forms, path);
    let expanded = Expander {
        resolver,
        locate: &locate,
    }
    .expand_root(&program)?;
    Ok(sexpr::from_json_forms(&expanded)?)
}

/// [`scan_macros`] over parsed forms, with source positions attached.
pub fn scan_forms(forms: &[SExpr]) -> Result<Vec<MacroExpr>, ExpandError> {
    let program = sexpr::to_json_forms(forms);
    let locate = |path: &[usize]| locate_in(forms, path);
    let mut found = Vec::new();
    scan_node(&program, &mut Vec::new(), &locate, &mut found)?;
    Ok(found)
}

fn locate_in(forms: &[SExpr], path: &[usize]) -> Option<SourcePosition> {
    let (first, rest) = path.split_first()?;
    let mut node = forms.get(*first)?;
    for i in rest {
        node = node.as_list()?.get(*i)?;
    }
    node.pos
}

/// Recognizes a macro node. Returns `Ok(None)` for ordinary nodes.
fn classify(
    node: &Value,
    path: &[usize],
    locate: Locate<'_>,
) -> Result<Option<MacroExpr>, ExpandError> {
    let Value::Array(items) = node else {
        return Ok(None);
    };
    let splice = match items.first() {
        Some(Value::String(h)) if h == UNQUOTE => false,
        Some(Value::String(h)) if h == UNQUOTE_SPLICING => true,
        _ => return Ok(None),
    };
    let location = || match locate(path) {
        Some(pos) => pos.to_string(),
        None => NodePath(path.to_vec()).to_string(),
    };
    let head = if splice { UNQUOTE_SPLICING } else { UNQUOTE };
    if items.len() != 2 {
        return Err(ExpandError::Malformed {
            location: location(),
            reason: format!(
                "`{head}` takes exactly one operand, found {}",
                items.len() - 1
            ),
        });
    }
    let (kind, name, args) = match &items[1] {
        Value::String(name) => {
            let kind = if splice {
                MacroKind::SpliceVariable
            } else {
                MacroKind::Variable
            };
            (kind, name.clone(), Vec::new())
        }
        Value::Array(call) => match call.split_first() {
            Some((Value::String(name), args)) => {
                let kind = if splice {
                    MacroKind::SpliceCall
                } else {
                    MacroKind::Call
                };
                (kind, name.clone(), args.to_vec())
            }
            Some(_) => {
                return Err(ExpandError::Malformed {
                    location: location(),
                    reason: "macro call must start with a macro name".into(),
                })
            }
            None => {
                return Err(ExpandError::Malformed {
                    location: location(),
                    reason: "empty macro call".into(),
                })
            }
        },
        other => {
            return Err(ExpandError::Malformed {
                location: location(),
                reason: format!("expected a macro name or call, found {}", json_kind(other)),
            })
        }
    };
    Ok(Some(MacroExpr {
        kind,
        name,
        args,
        path: NodePath(path.to_vec()),
        site: locate(path),
    }))
}

fn json_kind(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn scan_node(
    node: &Value,
    path: &mut Vec<usize>,
    locate: Locate<'_>,
    found: &mut Vec<MacroExpr>,
) -> Result<(), ExpandError> {
    if let Some(m) = classify(node, path, locate)? {
        found.push(m);
        return Ok(());
    }
    if let Value::Array(items) = node {
        for (i, item) in items.iter().enumerate() {
            path.push(i);
            scan_node(item, path, locate, found)?;
            path.pop();
        }
    }
    Ok(())
}

struct Expander<'r, 'l> {
    resolver: &'r mut dyn MacroResolver,
    locate: Locate<'l>,
}

impl Expander<'_, '_> {
    fn expand_root(&mut self, program: &Value) -> Result<Value, ExpandError> {
        self.expand_node(program, &mut Vec::new())
    }

    fn resolve(&mut self, expr: &MacroExpr) -> Result<Value, ExpandError> {
        let result = match expr.kind {
            MacroKind::Variable | MacroKind::SpliceVariable => {
                self.resolver.resolve_variable(&expr.name)
            }
            MacroKind::Call | MacroKind::SpliceCall => {
                self.resolver.resolve_call(&expr.name, &expr.args)
            }
        };
        result.map_err(|source| ExpandError::Resolve {
            expr: Box::new(expr.clone()),
            source,
        })
    }

    fn expand_node(&mut self, node: &Value, path: &mut Vec<usize>) -> Result<Value, ExpandError> {
        if let Some(m) = classify(node, path, self.locate)? {
            if m.kind.is_splice() {
                return Err(ExpandError::SpliceWithoutParent { expr: Box::new(m) });
            }
            return self.resolve(&m);
        }
        let Value::Array(items) = node else {
            return Ok(node.clone());
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            path.push(i);
            match classify(item, path, self.locate)? {
                Some(m) if m.kind.is_splice() => match self.resolve(&m)? {
                    Value::Array(spliced) => out.extend(spliced),
                    other => {
                        return Err(ExpandError::SpliceNotArray {
                            expr: Box::new(m),
                            found: json_kind(&other),
                        })
                    }
                },
                Some(m) => out.push(self.resolve(&m)?),
                None => out.push(self.expand_node(item, path)?),
            }
            path.pop();
        }
        Ok(Value::Array(out))
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn example_macros() -> StaticResolver {
        StaticResolver::new()
            .variable("EOF", json!(["trunc", -1, "int8"]))
            .function("incr", |args| match args {
                [name, amt] => Ok(json!(["set", name, ["add", name, amt]])),
                _ => Err("incr takes 2 arguments".into()),
            })
            .function("declare_multiple", |args| match args {
                [Value::Array(names), typ] => Ok(Value::Array(
                    names.iter().map(|n| json!(["declare", n, typ])).collect(),
                )),
                _ => Err("declare_multiple takes (names) type".into()),
            })
    }

    #[test]
    fn variable_substitution() {
        let program = json!(["eq", ["call", "getchar"], ["unquote", "EOF"]]);
        let out = expand(&program, &mut example_macros()).unwrap();
        assert_eq!(
            out,
            json!(["eq", ["call", "getchar"], ["trunc", -1, "int8"]])
        );
    }

    #[test]
    fn parametric_macro() {
        let program = json!([["unquote", ["incr", "var", 45]]]);
        let out = expand(&program, &mut example_macros()).unwrap();
        assert_eq!(out, json!([["set", "var", ["add", "var", 45]]]));
        // Root-level call is replaced outright.
        let out = expand(
            &json!(["unquote", ["incr", "var", 45]]),
            &mut example_macros(),
        )
        .unwrap();
        assert_eq!(out, json!(["set", "var", ["add", "var", 45]]));
    }

    #[test]
    fn splicing_vs_nesting() {
        let call = json!(["declare_multiple", ["ch", "i"], "int"]);
        let spliced = expand(
            &json!(["block", ["unquote-splicing", call], ["ret"]]),
            &mut example_macros(),
        )
        .unwrap();
        assert_eq!(
            spliced,
            json!([
                "block",
                ["declare", "ch", "int"],
                ["declare", "i", "int"],
                ["ret"]
            ])
        );
        let nested = expand(
            &json!(["block", ["unquote", call], ["ret"]]),
            &mut example_macros(),
        )
        .unwrap();
        assert_eq!(
            nested,
            json!([
                "block",
                [["declare", "ch", "int"], ["declare", "i", "int"]],
                ["ret"]
            ])
        );
    }

    #[test]
    fn identity_without_macros() {
        let program = json!([
            ["define", [["f", "int"]], ["ret", 1]],
            ["string", "unquote"]
        ]);
        assert_eq!(
            expand(&program, &mut StaticResolver::new()).unwrap(),
            program
        );
    }

    #[test]
    fn results_are_not_rescanned() {
        let mut r = StaticResolver::new().variable("A", json!(["unquote", "B"]));
        let out = expand(&json!(["x", ["unquote", "A"]]), &mut r).unwrap();
        assert_eq!(out, json!(["x", ["unquote", "B"]]));
    }

    #[test]
    fn errors() {
        let mut r = example_macros();
        let err = expand(&json!(["x", ["unquote", "missing"]]), &mut r).unwrap_err();
        assert!(matches!(
            err,
            ExpandError::Resolve {
                source: ResolveError::Unresolved(_),
                ..
            }
        ));
        assert!(err.to_string().contains("$[1]"), "{err}");

        let mut scalar = example_macros().variable("FIVE", json!(5));
        let err = expand(&json!(["x", ["unquote-splicing", "FIVE"]]), &mut scalar).unwrap_err();
        assert!(matches!(
            err,
            ExpandError::SpliceNotArray {
                found: "a number",
                ..
            }
        ));

        let err = expand(&json!(["unquote-splicing", "EOF"]), &mut r).unwrap_err();
        assert!(matches!(err, ExpandError::SpliceWithoutParent { .. }));

        for bad in [
            json!(["x", ["unquote"]]),
            json!(["x", ["unquote", 5]]),
            json!(["unquote", []]),
        ] {
            assert!(
                matches!(expand(&bad, &mut r), Err(ExpandError::Malformed { .. })),
                "{bad}"
            );
        }
        let err = expand(&json!(["unquote", ["incr", "a"]]), &mut r).unwrap_err();
        assert!(matches!(
            err,
            ExpandError::Resolve {
                source: ResolveError::Failed { .. },
                ..
            }
        ));
    }

    #[test]
    fn scan_lists_macros_in_order() {
        let program = json!([
            ["eq", ["call", "getchar"], ["unquote", "EOF"]],
            ["unquote-splicing", ["include", ["h.h"], ["f"], [], []]],
            ["unquote", ["incr", "v", 1]],
            ["unquote-splicing", "MORE"]
        ]);
        let found = scan_macros(&program).unwrap();
        let summary: Vec<(MacroKind, &str)> =
            found.iter().map(|m| (m.kind, m.name.as_str())).collect();
        assert_eq!(
            summary,
            vec![
                (MacroKind::Variable, "EOF"),
                (MacroKind::SpliceCall, "include"),
                (MacroKind::Call, "incr"),
                (MacroKind::SpliceVariable, "MORE"),
            ]
        );
        assert_eq!(found[0].path, NodePath(vec![0, 2]));
        assert_eq!(found[2].args, vec![json!("v"), json!(1)]);
        assert!(scan_macros(&json!([])).unwrap().is_empty());
    }

    #[test]
    fn forms_api_reports_source_positions() {
        let forms = sexpr::parse_sexprs("(a)\n(b ,missing)").unwrap();
        let err = expand_forms(&forms, &mut example_macros()).unwrap_err();
        assert!(err.to_string().starts_with("2:4:"), "{err}");
        let found = scan_forms(&forms).unwrap();
        assert_eq!(found[0].site, Some(SourcePosition::new(2, 4)));

        let forms = sexpr::parse_sexprs("(eq (call getchar) ,EOF)").unwrap();
        let out = expand_forms(&forms, &mut example_macros()).unwrap();
        assert_eq!(
            out,
            sexpr::parse_sexprs("(eq (call getchar) (trunc -1 int8))").unwrap()
        );
    }
}
