//! C header bindings.
//!
//! A probe program that mentions every requested symbol is compiled by a C
//! frontend twice: once to textual IR, which is authoritative for types, and
//! once to a JSON AST dump, which supplies typedef aliases, parameter names
//! and the pointee types that opaque IR pointers no longer carry.

mod ast;
mod ir;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

use crate::frontend::{CLispType, FunctionSig, StructDef};
use crate::prelisp::{MacroResolver, ResolveError};
use crate::toolchain::{ToolError, Toolchain, C_FRONTEND};

pub use ast::{parse_ast_metadata, AstFunction, AstMetadata, AstStruct};
pub use ir::parse_ir_signatures;

#[derive(Debug, Error)]
pub enum BindError {
    #[error("{stage}: requested {what} not found: {}", names.join(", "))]
    Missing {
        stage: &'static str,
        what: &'static str,
        names: Vec<String>,
    },
    #[error("ir: `{name}` uses IR type `{ty}`, which has no C-Lisp equivalent")]
    Unmappable { name: String, ty: String },
    #[error("{stage}: `{name}` is unsupported: {reason}")]
    Unsupported {
        stage: &'static str,
        name: String,
        reason: String,
    },
    #[error("ast: {0}")]
    Ast(String),
    #[error("frontend: {0}")]
    Tool(ToolError),
    #[error("frontend: {source}\nscratch files kept in {}", scratch.display())]
    Frontend { scratch: PathBuf, source: ToolError },
    #[error("request: {0}")]
    Request(String),
}

impl BindError {
    /// Failures of the external frontend rather than of the request.
    pub fn is_tool_failure(&self) -> bool {
        matches!(self, BindError::Tool(_) | BindError::Frontend { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BindRequest {
    pub headers: Vec<PathBuf>,
    pub functions: Vec<String>,
    /// A struct is named by a typedef (`Point`) or by its tag (`struct Pair`).
    pub structs: Vec<String>,
    pub typedefs: Vec<String>,
}

fn dedup<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> Vec<T> {
    let mut seen = HashSet::new();
    items
        .iter()
        .filter(|i| seen.insert((*i).clone()))
        .cloned()
        .collect()
}

impl BindRequest {
    pub fn deduplicated(&self) -> Self {
        Self {
            headers: dedup(&self.headers),
            functions: dedup(&self.functions),
            structs: dedup(&self.structs),
            typedefs: dedup(&self.typedefs),
        }
    }

    /// Reads the arguments of an `include` macro call:
    /// `(headers...) (functions...) (structs...) (typedefs...)`, trailing
    /// lists optional.
    pub fn from_macro_args(args: &[Value]) -> Result<Self, String> {
        if args.is_empty() || args.len() > 4 {
            return Err(format!(
                "expected (include (headers...) (functions...) (structs...) (typedefs...)), got {} arguments",
                args.len()
            ));
        }
        let list = |i: usize, what: &str| -> Result<Vec<String>, String> {
            let Some(v) = args.get(i) else {
                return Ok(Vec::new());
            };
            let Some(items) = v.as_array() else {
                return Err(format!("{what} must be a list, found {v}"));
            };
            items.iter().map(|item| name_of(item, what)).collect()
        };
        let request = Self {
            headers: list(0, "headers")?.into_iter().map(PathBuf::from).collect(),
            functions: list(1, "functions")?,
            structs: list(2, "structs")?,
            typedefs: list(3, "typedefs")?,
        };
        if request.headers.is_empty() {
            return Err("at least one header is required".into());
        }
        Ok(request)
    }
}

fn name_of(item: &Value, what: &str) -> Result<String, String> {
    match item {
        Value::String(s) => Ok(s.clone()),
        Value::Array(pair) => match pair.as_slice() {
            [Value::String(tag), Value::String(s)] if tag == "string" || tag == "struct" => {
                Ok(if tag == "struct" {
                    format!("struct {s}")
                } else {
                    s.clone()
                })
            }
            _ => Err(format!("bad entry in {what}: {item}")),
        },
        _ => Err(format!("bad entry in {what}: {item}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeArtifacts {
    pub ir_text: String,
    pub ast_json: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    pub signatures: Vec<FunctionSig>,
    pub struct_defs: Vec<StructDef>,
    pub aliases: Vec<(String, CLispType)>,
}

fn decl_form(sig: &FunctionSig) -> Value {
    let params: Vec<Value> = sig
        .params
        .iter()
        .map(|p| json!([p.name, p.ty.to_json()]))
        .collect();
    json!(["declare-fn", sig.name, params, sig.ret.to_json()])
}

fn struct_form(def: &StructDef) -> Value {
    let mut form = vec![json!("struct"), json!(def.name)];
    form.extend(def.fields.iter().map(|f| json!([f.name, f.ty.to_json()])));
    Value::Array(form)
}

impl Binding {
    /// One `struct` form per struct, then one `declare-fn` per function.
    pub fn forms(&self) -> Vec<Value> {
        self.struct_defs
            .iter()
            .map(struct_form)
            .chain(self.signatures.iter().map(decl_form))
            .collect()
    }
}

const PROBE_FN: &str = "clisp_probe_fn_";
const PROBE_STRUCT: &str = "clisp_probe_struct_";
const PROBE_TYPEDEF: &str = "clisp_probe_typedef_";

fn c_string(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// C source that includes the headers and uses every requested name without
/// calling anything.
pub fn generate_probe(request: &BindRequest) -> String {
    let request = request.deduplicated();
    let mut src = String::new();
    for h in &request.headers {
        let _ = writeln!(src, "#include {}", c_string(&h.to_string_lossy()));
    }
    for (i, f) in request.functions.iter().enumerate() {
        let _ = writeln!(src, "void *volatile {PROBE_FN}{i} = (void *)&{f};");
    }
    for (i, s) in request.structs.iter().enumerate() {
        let _ = writeln!(src, "{s} {PROBE_STRUCT}{i};");
    }
    for (i, t) in request.typedefs.iter().enumerate() {
        let _ = writeln!(src, "{t} {PROBE_TYPEDEF}{i};");
    }
    src
}

/// Runs the frontend on `probe` in a scratch directory, which is removed on
/// success and kept on failure.
pub fn run_frontend(
    cc: &Toolchain,
    probe: &str,
    include_paths: &[PathBuf],
) -> Result<ProbeArtifacts, BindError> {
    let dir = tempfile::Builder::new()
        .prefix("clisp-bindgen-")
        .tempdir()
        .map_err(|source| {
            BindError::Tool(ToolError::Io {
                context: "creating a scratch directory".into(),
                source,
            })
        })?;
    let source = dir.path().join("probe.c");
    let kept = |dir: tempfile::TempDir, source: ToolError| BindError::Frontend {
        scratch: dir.keep(),
        source,
    };
    if let Err(e) = std::fs::write(&source, probe) {
        return Err(kept(
            dir,
            ToolError::Io {
                context: format!("writing {}", source.display()),
                source: e,
            },
        ));
    }
    let ir_text = match cc.c_to_ir(&source, include_paths) {
        Ok(t) => t,
        Err(e) => return Err(kept(dir, e)),
    };
    let ast_json = match cc.c_ast_json(&source, include_paths) {
        Ok(t) => t,
        Err(e) => return Err(kept(dir, e)),
    };
    Ok(ProbeArtifacts { ir_text, ast_json })
}

/// Normalized `declare` lines of every function in frontend IR, keyed by
/// name: no attributes, no parameter names.
pub fn probe_declare_lines(ir_text: &str) -> HashMap<String, String> {
    ir::parse_module(ir_text)
        .decls
        .into_iter()
        .map(|(name, d)| (name, d.normalized))
        .collect()
}

/// Combines the two artifacts of a probe built from `request`.
pub fn binding_from_artifacts(
    request: &BindRequest,
    artifacts: &ProbeArtifacts,
) -> Result<Binding, BindError> {
    let request = request.deduplicated();
    let meta = parse_ast_metadata(&artifacts.ast_json, &request)?;
    let module = ir::parse_module(&artifacts.ir_text);

    let mut structs = Vec::new();
    let mut missing = Vec::new();
    for (i, entry) in request.structs.iter().enumerate() {
        let (name, _) = ast::struct_entry(entry);
        match module
            .globals
            .get(&format!("{PROBE_STRUCT}{i}"))
            .and_then(|t| t.strip_prefix("%struct."))
        {
            Some(ir_name) => structs.push((name.to_owned(), ir_name.trim_matches('"').to_owned())),
            None => missing.push(name.to_owned()),
        }
    }
    if !missing.is_empty() {
        return Err(BindError::Missing {
            stage: "ir",
            what: "struct",
            names: missing,
        });
    }

    let (mut signatures, mut struct_defs) =
        ir::signatures_from_module(&module, &request.functions, &structs)?;

    for sig in &mut signatures {
        let Some(info) = meta.functions.get(&sig.name) else {
            continue;
        };
        if info.param_names.len() != sig.params.len() {
            return Err(BindError::Unsupported {
                stage: "ir",
                name: sig.name.clone(),
                reason: "structs passed or returned by value".into(),
            });
        }
        for (i, p) in sig.params.iter_mut().enumerate() {
            if !info.param_names[i].is_empty() {
                p.name = info.param_names[i].clone();
            }
            refine(&mut p.ty, &info.param_types[i]);
        }
        refine(&mut sig.ret, &info.ret);
        let mut seen = HashSet::new();
        for (i, p) in sig.params.iter_mut().enumerate() {
            if !seen.insert(p.name.clone()) {
                p.name = format!("arg{i}");
            }
        }
    }

    for def in &mut struct_defs {
        let Some(info) = meta.structs.get(&def.name) else {
            continue;
        };
        if info.field_names.len() != def.fields.len() {
            return Err(BindError::Unsupported {
                stage: "ast",
                name: def.name.clone(),
                reason: "field layout differs from the C declaration (bit-fields or padding)"
                    .into(),
            });
        }
        for (i, f) in def.fields.iter_mut().enumerate() {
            if !info.field_names[i].is_empty() {
                f.name = info.field_names[i].clone();
            }
            refine(&mut f.ty, &info.field_types[i]);
        }
    }

    Ok(Binding {
        signatures,
        struct_defs,
        aliases: meta.aliases,
    })
}

/// The IR only says `ptr`; take the pointee from the C declaration.
fn refine(ir_ty: &mut CLispType, from_c: &Option<CLispType>) {
    if let (CLispType::Ptr(_), Some(c @ CLispType::Ptr(_))) = (&*ir_ty, from_c) {
        *ir_ty = c.clone();
    }
}

/// Header paths that exist relative to the working directory are made
/// absolute, since the probe is compiled elsewhere.
fn anchor_headers(request: &BindRequest) -> BindRequest {
    let mut request = request.clone();
    for h in &mut request.headers {
        if h.is_relative() && h.exists() {
            if let Ok(abs) = h.canonicalize() {
                *h = abs;
            }
        }
    }
    request
}

/// The whole pipeline.
pub fn bind(
    cc: &Toolchain,
    request: &BindRequest,
    include_paths: &[PathBuf],
) -> Result<Binding, BindError> {
    if request.headers.is_empty() {
        return Err(BindError::Request("at least one header is required".into()));
    }
    let request = anchor_headers(&request.deduplicated());
    let artifacts = run_frontend(cc, &generate_probe(&request), include_paths)?;
    binding_from_artifacts(&request, &artifacts)
}

/// `include` as a splicing macro, plus the aliases it registers for the rest
/// of the session.
pub struct BindgenResolver {
    cc_flag: Option<PathBuf>,
    cc: Option<Toolchain>,
    include_paths: Vec<PathBuf>,
    aliases: HashMap<String, Value>,
}

impl BindgenResolver {
    pub fn new(cc_flag: Option<PathBuf>, include_paths: Vec<PathBuf>) -> Self {
        Self {
            cc_flag,
            cc: None,
            include_paths,
            aliases: HashMap::new(),
        }
    }

    pub fn aliases(&self) -> &HashMap<String, Value> {
        &self.aliases
    }

    fn toolchain(&mut self) -> Result<&Toolchain, ToolError> {
        if self.cc.is_none() {
            self.cc = Some(Toolchain::locate(C_FRONTEND, self.cc_flag.as_deref())?);
        }
        Ok(self.cc.as_ref().expect("just located"))
    }

    pub fn include(&mut self, request: &BindRequest) -> Result<Vec<Value>, BindError> {
        let include_paths = self.include_paths.clone();
        let cc = self.toolchain().map_err(BindError::Tool)?;
        let binding = bind(cc, request, &include_paths)?;
        for (name, ty) in &binding.aliases {
            self.aliases.insert(name.clone(), ty.to_json());
        }
        Ok(binding.forms())
    }
}

impl MacroResolver for BindgenResolver {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        self.aliases
            .get(name)
            .cloned()
            .ok_or_else(|| ResolveError::Unresolved(name.into()))
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        if name != "include" {
            return Err(ResolveError::Unresolved(name.into()));
        }
        let request =
            BindRequest::from_macro_args(args).map_err(|message| ResolveError::Failed {
                name: name.into(),
                message,
            })?;
        match self.include(&request) {
            Ok(forms) => Ok(Value::Array(forms)),
            Err(e) if e.is_tool_failure() => Err(ResolveError::Host(e.to_string())),
            Err(e) => Err(ResolveError::Failed {
                name: name.into(),
                message: e.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Param;

    fn request() -> BindRequest {
        BindRequest {
            headers: vec!["/usr/local/cuda/include/cuda.h".into()],
            functions: vec!["cuInit".into()],
            structs: vec![],
            typedefs: vec!["CUcontext".into()],
        }
    }

    #[test]
    fn probe_mentions_everything() {
        let probe = generate_probe(&request());
        assert!(probe.contains("#include \"/usr/local/cuda/include/cuda.h\""));
        assert!(probe.contains("(void *)&cuInit;"));
        assert!(probe.contains("CUcontext clisp_probe_typedef_0;"));
    }

    #[test]
    fn probe_with_only_headers() {
        let req = BindRequest {
            functions: vec![],
            typedefs: vec![],
            ..request()
        };
        assert_eq!(
            generate_probe(&req),
            "#include \"/usr/local/cuda/include/cuda.h\"\n"
        );
    }

    #[test]
    fn probe_deduplicates() {
        let req = BindRequest {
            functions: vec!["f".into(), "g".into(), "f".into()],
            structs: vec!["struct P".into(), "struct P".into()],
            ..request()
        };
        let probe = generate_probe(&req);
        assert_eq!(probe.matches("&f;").count(), 1);
        assert_eq!(probe.matches("struct P clisp_probe").count(), 1);
    }

    #[test]
    fn macro_arguments() {
        let args = [
            json!(["/usr/local/cuda/include/cuda.h"]),
            json!(["cuInit", "cuDeviceGet"]),
            json!([]),
            json!(["CUcontext", ["string", "CUmodule"]]),
        ];
        let req = BindRequest::from_macro_args(&args).unwrap();
        assert_eq!(req.functions, vec!["cuInit", "cuDeviceGet"]);
        assert!(req.structs.is_empty());
        assert_eq!(req.typedefs, vec!["CUcontext", "CUmodule"]);
        let req = BindRequest::from_macro_args(&[
            json!([["string", "a b.h"]]),
            json!([]),
            json!([["struct", "Pair"]]),
        ])
        .unwrap();
        assert_eq!(req.headers, vec![PathBuf::from("a b.h")]);
        assert_eq!(req.structs, vec!["struct Pair"]);
        assert!(BindRequest::from_macro_args(&[json!([])]).is_err());
        assert!(BindRequest::from_macro_args(&[json!("h.h")]).is_err());
    }

    #[test]
    fn forms_shape() {
        let binding = Binding {
            signatures: vec![FunctionSig::new(
                "g",
                vec![Param {
                    name: "count".into(),
                    ty: CLispType::Int,
                }],
                CLispType::Void,
            )],
            struct_defs: vec![StructDef {
                name: "Pair".into(),
                fields: vec![Param {
                    name: "p".into(),
                    ty: CLispType::ptr(CLispType::Int8),
                }],
                pos: None,
            }],
            aliases: vec![],
        };
        assert_eq!(
            binding.forms(),
            vec![
                json!(["struct", "Pair", ["p", ["ptr", "int8"]]]),
                json!(["declare-fn", "g", [["count", "int"]], "void"])
            ]
        );
    }

    #[test]
    fn resolver_ignores_other_names() {
        let mut r = BindgenResolver::new(None, vec![]);
        assert!(matches!(
            r.resolve_call("incr", &[]),
            Err(ResolveError::Unresolved(_))
        ));
        assert!(matches!(
            r.resolve_variable("CUmodule"),
            Err(ResolveError::Unresolved(_))
        ));
    }
}
