//! Typedef aliases, parameter names and field names from the frontend's JSON
//! AST dump.
//!
//! Only `TypedefDecl`, `RecordDecl`, `FunctionDecl`, `ParmVarDecl` and
//! `FieldDecl` nodes are looked at; everything else in the dump is skipped.

use std::collections::HashMap;

use serde_json::Value;

use crate::frontend::CLispType;

use super::{BindError, BindRequest};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AstFunction {
    pub param_names: Vec<String>,
    /// The C type of each parameter, where it maps to C-Lisp. Used to
    /// recover pointee types that the IR no longer carries.
    pub param_types: Vec<Option<CLispType>>,
    pub ret: Option<CLispType>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AstStruct {
    pub field_names: Vec<String>,
    pub field_types: Vec<Option<CLispType>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AstMetadata {
    /// Requested typedefs in request order.
    pub aliases: Vec<(String, CLispType)>,
    pub functions: HashMap<String, AstFunction>,
    /// Keyed by the C-Lisp struct name.
    pub structs: HashMap<String, AstStruct>,
}

struct Record {
    name: String,
    fields: Vec<(String, String)>,
}

#[derive(Default)]
struct Decls {
    typedefs: HashMap<String, String>,
    /// Typedef name → id of the record it defines inline.
    typedef_records: HashMap<String, String>,
    records_by_id: HashMap<String, Record>,
    records_by_name: HashMap<String, String>,
    functions: HashMap<String, (String, Vec<(String, String)>)>,
}

fn qual_type(node: &Value) -> Option<&str> {
    node.get("type")?.get("qualType")?.as_str()
}

fn str_field<'a>(node: &'a Value, key: &str) -> &'a str {
    node.get(key).and_then(Value::as_str).unwrap_or("")
}

fn children(node: &Value) -> &[Value] {
    node.get("inner")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

fn collect(root: &Value) -> Decls {
    let mut decls = Decls::default();
    for node in children(root) {
        match str_field(node, "kind") {
            "TypedefDecl" => {
                let name = str_field(node, "name").to_owned();
                if let Some(q) = qual_type(node) {
                    decls.typedefs.insert(name.clone(), q.to_owned());
                }
                let owned = children(node)
                    .first()
                    .and_then(|t| t.get("ownedTagDecl"))
                    .and_then(|d| d.get("id"))
                    .and_then(Value::as_str);
                if let Some(id) = owned {
                    decls.typedef_records.insert(name, id.to_owned());
                }
            }
            "RecordDecl"
                if node.get("completeDefinition").and_then(Value::as_bool) == Some(true) =>
            {
                if str_field(node, "tagUsed") != "struct" {
                    continue;
                }
                let id = str_field(node, "id").to_owned();
                let name = str_field(node, "name").to_owned();
                let fields = children(node)
                    .iter()
                    .filter(|f| str_field(f, "kind") == "FieldDecl")
                    .map(|f| {
                        (
                            str_field(f, "name").to_owned(),
                            qual_type(f).unwrap_or("").to_owned(),
                        )
                    })
                    .collect();
                if !name.is_empty() {
                    decls.records_by_name.insert(name.clone(), id.clone());
                }
                decls.records_by_id.insert(id, Record { name, fields });
            }
            "FunctionDecl" => {
                let name = str_field(node, "name").to_owned();
                let params: Vec<(String, String)> = children(node)
                    .iter()
                    .filter(|p| str_field(p, "kind") == "ParmVarDecl")
                    .map(|p| {
                        (
                            str_field(p, "name").to_owned(),
                            qual_type(p).unwrap_or("").to_owned(),
                        )
                    })
                    .collect();
                let ret = qual_type(node).map(return_type_text).unwrap_or_default();
                // Later redeclarations win unless they drop the parameter names.
                let keep_old = decls.functions.get(&name).is_some_and(|(_, old)| {
                    old.iter().any(|(n, _)| !n.is_empty())
                        && params.iter().all(|(n, _)| n.is_empty())
                });
                if !keep_old {
                    decls.functions.insert(name, (ret, params));
                }
            }
            _ => {}
        }
    }
    decls
}

/// `"int (void *, char)"` → `"int"`.
fn return_type_text(fn_type: &str) -> String {
    let t = fn_type.trim_end();
    if !t.ends_with(')') {
        return String::new();
    }
    let mut depth = 0i32;
    for (i, c) in t.char_indices().rev() {
        match c {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    return t[..i].trim().to_owned();
                }
            }
            _ => {}
        }
    }
    String::new()
}

/// C type spellings as the frontend prints them, resolved against the
/// header's typedefs.
struct CTypes<'a> {
    typedefs: &'a HashMap<String, String>,
    /// Struct tag → C-Lisp struct name, for the requested structs only.
    tags: &'a HashMap<String, String>,
}

const QUALIFIERS: &[&str] = &[
    "const",
    "volatile",
    "restrict",
    "__restrict",
    "__restrict__",
    "_Nonnull",
    "_Nullable",
];

impl CTypes<'_> {
    fn resolve(&self, text: &str) -> Result<CLispType, String> {
        self.resolve_at(text, 0)
    }

    fn resolve_at(&self, text: &str, depth: usize) -> Result<CLispType, String> {
        if depth > 64 {
            return Err(format!("typedef cycle at `{text}`"));
        }
        if text.contains('(') {
            return Err(format!("function pointer type `{text}`"));
        }
        if text.contains('[') {
            return Err(format!("array type `{text}`"));
        }
        let spaced = text.replace('*', " * ");
        let words: Vec<&str> = spaced
            .split_whitespace()
            .filter(|w| !QUALIFIERS.contains(w))
            .collect();
        let stars = words.iter().rev().take_while(|w| **w == "*").count();
        let base = &words[..words.len() - stars];
        if base.is_empty() || base.contains(&"*") {
            return Err(format!("cannot read C type `{text}`"));
        }
        let resolved = self.resolve_base(base, depth);
        if stars == 0 {
            return resolved;
        }
        // Anything a pointer points at that C-Lisp cannot spell, an
        // incomplete struct included, is treated as void.
        let mut ty = resolved.unwrap_or(CLispType::Void);
        for _ in 0..stars {
            ty = CLispType::ptr(ty);
        }
        Ok(ty)
    }

    fn resolve_base(&self, words: &[&str], depth: usize) -> Result<CLispType, String> {
        match words {
            ["struct", tag] => {
                return self
                    .tags
                    .get(*tag)
                    .map(|name| CLispType::Struct(name.clone()))
                    .ok_or_else(|| format!("struct `{tag}` is not among the requested structs"));
            }
            ["enum", _] => return Ok(CLispType::Int),
            ["union", tag] => return Err(format!("union `{tag}`")),
            _ => {}
        }
        const BUILTIN: &[&str] = &[
            "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned",
            "_Bool",
        ];
        if words.iter().all(|w| BUILTIN.contains(w)) {
            let core: Vec<&str> = words
                .iter()
                .copied()
                .filter(|w| *w != "signed" && *w != "unsigned")
                .collect();
            return match core.as_slice() {
                [] | ["int"] => Ok(CLispType::Int),
                ["char"] => Ok(CLispType::Int8),
                ["long"] | ["long", "int"] | ["long", "long"] | ["long", "long", "int"] => {
                    Ok(CLispType::Int64)
                }
                ["float"] => Ok(CLispType::Float32),
                ["double"] => Ok(CLispType::Float64),
                ["void"] => Ok(CLispType::Void),
                _ => Err(format!(
                    "C type `{}` has no C-Lisp equivalent",
                    words.join(" ")
                )),
            };
        }
        match words {
            [name] => match self.typedefs.get(*name) {
                Some(aliased) => self.resolve_at(aliased, depth + 1),
                None => Err(format!("unknown C type `{name}`")),
            },
            _ => Err(format!("cannot read C type `{}`", words.join(" "))),
        }
    }

    /// Lenient resolution for refining IR pointers.
    fn pointer(&self, text: &str) -> Option<CLispType> {
        self.resolve(text).ok().filter(CLispType::is_pointer)
    }
}

/// Splits a requested struct entry into its C-Lisp name and, for a
/// `struct Tag` spelling, the tag.
pub(crate) fn struct_entry(entry: &str) -> (&str, Option<&str>) {
    match entry.trim().strip_prefix("struct ") {
        Some(tag) => (tag.trim(), Some(tag.trim())),
        None => (entry.trim(), None),
    }
}

/// Finds the record a requested struct refers to, and its tag.
fn find_record<'d>(decls: &'d Decls, entry: &str) -> Option<(String, &'d Record)> {
    let (name, tag) = struct_entry(entry);
    if let Some(tag) = tag {
        let id = decls.records_by_name.get(tag)?;
        return Some((tag.to_owned(), decls.records_by_id.get(id)?));
    }
    if let Some(id) = decls.typedef_records.get(name) {
        let record = decls.records_by_id.get(id)?;
        let tag = if record.name.is_empty() {
            name.to_owned()
        } else {
            record.name.clone()
        };
        return Some((tag, record));
    }
    let aliased = decls.typedefs.get(name)?;
    let tag = aliased
        .split_whitespace()
        .filter(|w| !QUALIFIERS.contains(w))
        .collect::<Vec<_>>();
    match tag.as_slice() {
        ["struct", tag] => {
            let id = decls.records_by_name.get(*tag)?;
            Some(((*tag).to_owned(), decls.records_by_id.get(id)?))
        }
        _ => None,
    }
}

/// Resolves requested typedefs and recovers parameter and field names.
pub fn parse_ast_metadata(ast_json: &str, request: &BindRequest) -> Result<AstMetadata, BindError> {
    let root: Value = serde_json::from_str(ast_json).map_err(|e| BindError::Ast(e.to_string()))?;
    let decls = collect(&root);

    let mut tags = HashMap::new();
    let mut records = Vec::new();
    for entry in &request.structs {
        let (name, _) = struct_entry(entry);
        if let Some((tag, record)) = find_record(&decls, entry) {
            tags.insert(tag, name.to_owned());
            records.push((name.to_owned(), record));
        }
    }
    let types = CTypes {
        typedefs: &decls.typedefs,
        tags: &tags,
    };

    let missing: Vec<String> = request
        .typedefs
        .iter()
        .filter(|t| !decls.typedefs.contains_key(*t))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(BindError::Missing {
            stage: "ast",
            what: "typedef",
            names: missing,
        });
    }
    let mut aliases = Vec::new();
    for name in &request.typedefs {
        let ty = types
            .resolve(&decls.typedefs[name])
            .map_err(|reason| BindError::Unsupported {
                stage: "ast",
                name: name.clone(),
                reason,
            })?;
        aliases.push((name.clone(), ty));
    }

    let mut functions = HashMap::new();
    for name in &request.functions {
        let Some((ret, params)) = decls.functions.get(name) else {
            continue;
        };
        functions.insert(
            name.clone(),
            AstFunction {
                param_names: params.iter().map(|(n, _)| n.clone()).collect(),
                param_types: params.iter().map(|(_, t)| types.pointer(t)).collect(),
                ret: types.pointer(ret),
            },
        );
    }

    let structs = records
        .into_iter()
        .map(|(name, record)| {
            let info = AstStruct {
                field_names: record.fields.iter().map(|(n, _)| n.clone()).collect(),
                field_types: record
                    .fields
                    .iter()
                    .map(|(_, t)| types.pointer(t))
                    .collect(),
            };
            (name, info)
        })
        .collect();

    Ok(AstMetadata {
        aliases,
        functions,
        structs,
    })
}
