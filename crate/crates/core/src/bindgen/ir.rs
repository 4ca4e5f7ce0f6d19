//! Scraping function and struct signatures out of frontend-emitted IR.

use std::collections::HashMap;

use crate::frontend::{CLispType, FunctionSig, Param, StructDef};

use super::BindError;

/// One `declare`/`define` line, with types left as IR text.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IrDecl {
    pub ret: String,
    pub params: Vec<IrParam>,
    pub variadic: bool,
    /// The normalized `declare` line: no attributes, no parameter names.
    pub normalized: String,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IrParam {
    pub ty: String,
    pub attrs: Vec<String>,
}

impl IrParam {
    /// `byval`, `sret` and friends mean the C signature passes a struct by
    /// value and the IR shows an ABI-lowered form.
    pub fn is_abi_lowered(&self) -> bool {
        self.attrs.iter().any(|a| {
            ["byval", "sret", "inalloca", "preallocated", "byref"]
                .iter()
                .any(|k| a.starts_with(k))
        })
    }
}

#[derive(Debug, Default)]
pub(crate) struct IrModule {
    pub decls: HashMap<String, IrDecl>,
    /// `%struct.Name` → field type texts.
    pub structs: HashMap<String, Vec<String>>,
    /// Global variable name → its value type text.
    pub globals: HashMap<String, String>,
}

const RET_ATTRS: &[&str] = &[
    "dso_local",
    "dso_preemptable",
    "external",
    "internal",
    "private",
    "extern_weak",
    "weak",
    "linkonce_odr",
    "available_externally",
    "hidden",
    "protected",
    "default",
    "noundef",
    "signext",
    "zeroext",
    "inreg",
    "noalias",
    "nonnull",
    "local_unnamed_addr",
    "unnamed_addr",
    "dllimport",
    "dllexport",
    "fastcc",
    "ccc",
    "coldcc",
];

/// Splits on commas that are not nested inside brackets.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '{' | '[' | '<' => depth += 1,
            ')' | '}' | ']' | '>' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = text[start..].trim();
    if !last.is_empty() || !parts.is_empty() {
        parts.push(last);
    }
    parts
}

/// Reads one IR type token from the front of `text`, returning it and the rest.
fn take_type(text: &str) -> (&str, &str) {
    let text = text.trim_start();
    let mut depth = 0i32;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '{' | '[' | '<' => depth += 1,
            ')' | '}' | ']' | '>' => depth -= 1,
            ' ' if depth == 0 => return (&text[..i], &text[i..]),
            _ => {}
        }
    }
    (text, "")
}

/// Finds the index of the `)` matching the `(` at `open`.
fn matching_paren(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_decl_line(line: &str) -> Option<(String, IrDecl)> {
    let rest = line
        .strip_prefix("declare ")
        .or_else(|| line.strip_prefix("define "))?;
    let at = rest.find(" @")?;
    let head = &rest[..at];
    let after = &rest[at + 2..];
    let open = after.find('(')?;
    let name = after[..open].trim_matches('"').to_owned();
    let close = matching_paren(after, open)?;
    let params_text = &after[open + 1..close];

    let ret_words: Vec<&str> = head
        .split_whitespace()
        .filter(|w| !RET_ATTRS.contains(w))
        .collect();
    let ret = ret_words.join(" ");

    let mut params = Vec::new();
    let mut variadic = false;
    for part in split_top_level(params_text) {
        if part == "..." {
            variadic = true;
            continue;
        }
        let (ty, attrs) = take_type(part);
        let attrs = attrs
            .split_whitespace()
            .filter(|w| !w.starts_with('%'))
            .map(str::to_owned)
            .collect();
        params.push(IrParam {
            ty: ty.to_owned(),
            attrs,
        });
    }
    let mut tys: Vec<String> = params.iter().map(|p| p.ty.clone()).collect();
    if variadic {
        tys.push("...".into());
    }
    let normalized = format!("declare {ret} @{name}({})", tys.join(", "));
    Some((
        name,
        IrDecl {
            ret,
            params,
            variadic,
            normalized,
        },
    ))
}

pub(crate) fn parse_module(ir: &str) -> IrModule {
    let mut module = IrModule::default();
    for line in ir.lines() {
        let line = line.trim_end();
        if let Some((name, decl)) = parse_decl_line(line) {
            module.decls.insert(name, decl);
        } else if let Some(rest) = line.strip_prefix("%struct.") {
            let Some((name, body)) = rest.split_once(" = type ") else {
                continue;
            };
            let body = body.trim();
            let fields = match body.strip_prefix('{').and_then(|b| b.strip_suffix('}')) {
                Some(inner) => split_top_level(inner)
                    .into_iter()
                    .map(str::to_owned)
                    .collect(),
                // `opaque`, packed structs and the like
                None => vec![body.to_owned()],
            };
            module
                .structs
                .insert(name.trim_matches('"').to_owned(), fields);
        } else if let Some(rest) = line.strip_prefix('@') {
            let Some((name, def)) = rest.split_once(" = ") else {
                continue;
            };
            let mut words = def.split_whitespace();
            if words.by_ref().any(|w| w == "global" || w == "constant") {
                if let Some(ty) = words.next() {
                    module.globals.insert(name.to_owned(), ty.to_owned());
                }
            }
        }
    }
    module
}

/// Maps an IR type back to C-Lisp. `structs` maps `%struct` names to the
/// C-Lisp struct names that are in scope.
pub(crate) fn map_ir_type(ty: &str, structs: &HashMap<String, String>) -> Option<CLispType> {
    Some(match ty {
        "void" => CLispType::Void,
        "i8" => CLispType::Int8,
        "i32" => CLispType::Int,
        "i64" => CLispType::Int64,
        "float" => CLispType::Float32,
        "double" => CLispType::Float64,
        "ptr" => CLispType::ptr(CLispType::Void),
        t if t.ends_with('*') => CLispType::ptr(CLispType::Void),
        t => {
            let name = t.strip_prefix("%struct.")?.trim_matches('"');
            CLispType::Struct(structs.get(name)?.clone())
        }
    })
}

/// The requested signatures, in request order, with positional parameter
/// names and every pointer as `(ptr void)`.
///
/// `structs` lists requested structs as (C-Lisp name, IR name) pairs.
pub fn parse_ir_signatures(
    ir_text: &str,
    functions: &[String],
    structs: &[(String, String)],
) -> Result<(Vec<FunctionSig>, Vec<StructDef>), BindError> {
    let module = parse_module(ir_text);
    signatures_from_module(&module, functions, structs)
}

pub(crate) fn signatures_from_module(
    module: &IrModule,
    functions: &[String],
    structs: &[(String, String)],
) -> Result<(Vec<FunctionSig>, Vec<StructDef>), BindError> {
    let in_scope: HashMap<String, String> = structs
        .iter()
        .map(|(clisp, ir)| (ir.clone(), clisp.clone()))
        .collect();

    let missing: Vec<String> = functions
        .iter()
        .filter(|f| !module.decls.contains_key(*f))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(BindError::Missing {
            stage: "ir",
            what: "function",
            names: missing,
        });
    }
    let missing: Vec<String> = structs
        .iter()
        .filter(|(_, ir)| !module.structs.contains_key(ir))
        .map(|(clisp, _)| clisp.clone())
        .collect();
    if !missing.is_empty() {
        return Err(BindError::Missing {
            stage: "ir",
            what: "struct",
            names: missing,
        });
    }

    let mut sigs = Vec::new();
    for name in functions {
        let decl = &module.decls[name];
        if decl.variadic {
            return Err(BindError::Unsupported {
                stage: "ir",
                name: name.clone(),
                reason: "variadic functions".into(),
            });
        }
        if decl.params.iter().any(IrParam::is_abi_lowered) {
            return Err(BindError::Unsupported {
                stage: "ir",
                name: name.clone(),
                reason: "structs passed or returned by value".into(),
            });
        }
        let unmappable = |ty: &str| BindError::Unmappable {
            name: name.clone(),
            ty: ty.to_owned(),
        };
        let ret = map_ir_type(&decl.ret, &HashMap::new()).ok_or_else(|| unmappable(&decl.ret))?;
        let mut params = Vec::new();
        for (i, p) in decl.params.iter().enumerate() {
            let ty = map_ir_type(&p.ty, &HashMap::new())
                .filter(|t| *t != CLispType::Void)
                .ok_or_else(|| unmappable(&p.ty))?;
            params.push(Param {
                name: format!("arg{i}"),
                ty,
            });
        }
        sigs.push(FunctionSig::new(name.clone(), params, ret));
    }

    let mut defs = Vec::new();
    for (clisp, ir) in structs {
        let mut fields = Vec::new();
        for (i, ty) in module.structs[ir].iter().enumerate() {
            let mapped = map_ir_type(ty, &in_scope)
                .filter(|t| *t != CLispType::Void)
                .ok_or_else(|| BindError::Unmappable {
                    name: clisp.clone(),
                    ty: ty.clone(),
                })?;
            fields.push(Param {
                name: format!("field{i}"),
                ty: mapped,
            });
        }
        defs.push(StructDef {
            name: clisp.clone(),
            fields,
            pos: None,
        });
    }
    Ok((sigs, defs))
}
