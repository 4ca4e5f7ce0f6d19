//! C ABI for the clisp toolchain.
//!
//! Every call takes a `ClispContext*` and returns a `ClispStatus`. Output
//! strings are allocated here and must be released with
//! `clisp_string_free`. After a failure, `clisp_last_error` describes it.
//!
//! A context is not thread safe; use one per thread.

use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use clisp::bindgen::BindgenResolver;
use clisp::emit::emit_program;
use clisp::frontend::{parse_module, typecheck};
use clisp::prelisp::{self, LayeredResolver, MacroResolver, ResolveError};
use clisp::sexpr::{self, SExpr};
use serde_json::Value;

/// Result of every `clisp_*` call. Codes 1 to 5 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClispStatus {
    Ok = 0,
    Usage = 1,
    Parse = 2,
    Macro = 3,
    Type = 4,
    Tool = 5,
    NullArgument = 6,
    InvalidUtf8 = 7,
    Internal = 8,
}

/// What a resolver callback found.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClispResolveResult {
    /// `*out` holds the value as JSON text.
    Found = 0,
    /// The name is not defined. `*out` is ignored.
    NotFound = 1,
    /// The macro failed. `*out` may hold a message.
    Error = 2,
}

/// Looks up one macro. `args_json` is NULL for a variable and a JSON array
/// for a call. Text written to `*out` is released with `free_text`.
pub type ClispResolveFn = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        name: *const c_char,
        args_json: *const c_char,
        out: *mut *mut c_char,
    ) -> ClispResolveResult,
>;

pub type ClispFreeFn = Option<unsafe extern "C" fn(user_data: *mut c_void, text: *mut c_char)>;

/// Macro definitions supplied by the caller.
#[repr(C)]
pub struct ClispResolver {
    pub user_data: *mut c_void,
    pub resolve: ClispResolveFn,
    pub free_text: ClispFreeFn,
}

/// Opaque session state.
pub struct ClispContext {
    last_error: Option<CString>,
    c_frontend: Option<PathBuf>,
}

struct Failure(ClispStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<E: ToString>(status: ClispStatus) -> impl Fn(E) -> Failure {
    move |e| Failure(status, e.to_string())
}

unsafe fn input<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(Failure(
            ClispStatus::NullArgument,
            format!("{what} is NULL"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ClispStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Runs `body` and stores its result through `out`, recording any error on `ctx`.
unsafe fn call(
    ctx: *mut ClispContext,
    out: *mut *mut c_char,
    body: impl FnOnce(&mut ClispContext) -> Outcome<String>,
) -> ClispStatus {
    let Some(ctx) = ctx.as_mut() else {
        return ClispStatus::NullArgument;
    };
    if out.is_null() {
        ctx.last_error = CString::new("output pointer is NULL").ok();
        return ClispStatus::NullArgument;
    }
    *out = ptr::null_mut();
    let result = catch_unwind(AssertUnwindSafe(|| body(ctx)))
        .unwrap_or_else(|_| {
            Err(Failure(
                ClispStatus::Internal,
                "internal error (panic)".into(),
            ))
        })
        .and_then(|text| CString::new(text).map_err(fail(ClispStatus::Internal)));
    match result {
        Ok(text) => {
            ctx.last_error = None;
            *out = text.into_raw();
            ClispStatus::Ok
        }
        Err(Failure(status, message)) => {
            ctx.last_error = Some(CString::new(message.replace('\0', "\\0")).unwrap_or_default());
            status
        }
    }
}

fn parse_json(text: &str) -> Outcome<Value> {
    serde_json::from_str(text)
        .map_err(|e| Failure(ClispStatus::Parse, format!("invalid JSON: {e}")))
}

fn forms_from_json(text: &str) -> Outcome<Vec<SExpr>> {
    sexpr::from_json_forms(&parse_json(text)?).map_err(fail(ClispStatus::Parse))
}

fn compile_forms(forms: &[SExpr], entry: Option<&str>) -> Outcome<String> {
    let module = parse_module(forms).map_err(fail(ClispStatus::Parse))?;
    let typed = typecheck(&module).map_err(|errs| {
        Failure(
            ClispStatus::Type,
            errs.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("\n"),
        )
    })?;
    Ok(emit_program(&typed, entry)
        .map_err(fail(ClispStatus::Type))?
        .text)
}

struct CallbackResolver(ClispResolver);

impl CallbackResolver {
    fn lookup(&mut self, name: &str, args: Option<&[Value]>) -> Result<Value, ResolveError> {
        let Some(resolve) = self.0.resolve else {
            return Err(ResolveError::Unresolved(name.into()));
        };
        let c_name = CString::new(name).map_err(|e| ResolveError::Host(e.to_string()))?;
        let c_args = args
            .map(|a| CString::new(Value::Array(a.to_vec()).to_string()))
            .transpose()
            .map_err(|e| ResolveError::Host(e.to_string()))?;
        let mut out: *mut c_char = ptr::null_mut();
        let found = unsafe {
            resolve(
                self.0.user_data,
                c_name.as_ptr(),
                c_args.as_ref().map_or(ptr::null(), |a| a.as_ptr()),
                &mut out,
            )
        };
        let text = (!out.is_null()).then(|| {
            unsafe { CStr::from_ptr(out) }
                .to_string_lossy()
                .into_owned()
        });
        if !out.is_null() {
            if let Some(free_text) = self.0.free_text {
                unsafe { free_text(self.0.user_data, out) };
            }
        }
        match found {
            ClispResolveResult::Found => {
                let text = text.ok_or_else(|| {
                    ResolveError::Host(format!("resolver found `{name}` but gave no value"))
                })?;
                serde_json::from_str(&text).map_err(|e| ResolveError::Failed {
                    name: name.into(),
                    message: format!("resolver returned invalid JSON: {e}"),
                })
            }
            ClispResolveResult::NotFound => Err(ResolveError::Unresolved(name.into())),
            ClispResolveResult::Error => Err(ResolveError::Failed {
                name: name.into(),
                message: text.unwrap_or_else(|| "resolver reported an error".into()),
            }),
        }
    }
}

impl MacroResolver for CallbackResolver {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        self.lookup(name, None)
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        self.lookup(name, Some(args))
    }
}

/// Creates a context. Never returns NULL.
#[no_mangle]
pub extern "C" fn clisp_context_new() -> *mut ClispContext {
    Box::into_raw(Box::new(ClispContext {
        last_error: None,
        c_frontend: None,
    }))
}

/// # Safety
/// `ctx` must come from `clisp_context_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn clisp_context_free(ctx: *mut ClispContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Message for the last failed call on `ctx`, or NULL. Valid until the next
/// call on `ctx`.
///
/// # Safety
/// `ctx` must be a live context or NULL.
#[no_mangle]
pub unsafe extern "C" fn clisp_last_error(ctx: *const ClispContext) -> *const c_char {
    ctx.as_ref()
        .and_then(|c| c.last_error.as_ref())
        .map_or(ptr::null(), |e| e.as_ptr())
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn clisp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// C compiler used by the `include` macro. NULL restores the default
/// lookup (`CLISP_CC`, then `clang`).
///
/// # Safety
/// `ctx` must be live; `path` NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn clisp_context_set_c_frontend(
    ctx: *mut ClispContext,
    path: *const c_char,
) -> ClispStatus {
    let mut ignored = ptr::null_mut();
    let status = call(ctx, &mut ignored, |ctx| {
        ctx.c_frontend = if path.is_null() {
            None
        } else {
            Some(input(path, "path")?.into())
        };
        Ok(String::new())
    });
    clisp_string_free(ignored);
    status
}

/// S-expression source to the JSON form array.
///
/// # Safety
/// `ctx` must be live, `source` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clisp_s2json(
    ctx: *mut ClispContext,
    source: *const c_char,
    out: *mut *mut c_char,
) -> ClispStatus {
    call(ctx, out, |_| {
        let forms =
            sexpr::parse_sexprs(input(source, "source")?).map_err(fail(ClispStatus::Parse))?;
        Ok(sexpr::render_json_forms(&sexpr::to_json_forms(&forms)))
    })
}

/// JSON form array to S-expression source, one form per line.
///
/// # Safety
/// As for `clisp_s2json`.
#[no_mangle]
pub unsafe extern "C" fn clisp_json2s(
    ctx: *mut ClispContext,
    json: *const c_char,
    out: *mut *mut c_char,
) -> ClispStatus {
    call(ctx, out, |_| {
        Ok(sexpr::render_forms(&forms_from_json(input(json, "json")?)?))
    })
}

/// Expands macros in a JSON form array. `include` is always available;
/// other names go to `resolver`, which may be NULL.
///
/// # Safety
/// As for `clisp_s2json`; `resolver` must be NULL or point to a valid
/// `ClispResolver` whose callbacks stay valid for the call.
#[no_mangle]
pub unsafe extern "C" fn clisp_expand(
    ctx: *mut ClispContext,
    json: *const c_char,
    resolver: *const ClispResolver,
    out: *mut *mut c_char,
) -> ClispStatus {
    call(ctx, out, |ctx| {
        let program = parse_json(input(json, "json")?)?;
        sexpr::from_json_forms(&program).map_err(fail(ClispStatus::Parse))?;
        let mut layers =
            LayeredResolver::new().with(BindgenResolver::new(ctx.c_frontend.clone(), vec![]));
        if let Some(r) = resolver.as_ref() {
            layers.push(CallbackResolver(ClispResolver {
                user_data: r.user_data,
                resolve: r.resolve,
                free_text: r.free_text,
            }));
        }
        let expanded = prelisp::expand(&program, &mut layers).map_err(|e| {
            let status = if e.is_host_failure() {
                ClispStatus::Tool
            } else {
                ClispStatus::Macro
            };
            Failure(status, e.to_string())
        })?;
        Ok(sexpr::render_json_forms(&expanded))
    })
}

/// Compiles S-expression source to textual LLVM IR. When `entry` is not
/// NULL a `main` calling it is appended.
///
/// # Safety
/// As for `clisp_s2json`; `entry` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn clisp_compile(
    ctx: *mut ClispContext,
    source: *const c_char,
    entry: *const c_char,
    out: *mut *mut c_char,
) -> ClispStatus {
    call(ctx, out, |_| {
        let forms =
            sexpr::parse_sexprs(input(source, "source")?).map_err(fail(ClispStatus::Parse))?;
        let entry = if entry.is_null() {
            None
        } else {
            Some(input(entry, "entry")?)
        };
        compile_forms(&forms, entry)
    })
}

/// `clisp_compile` for a JSON form array.
///
/// # Safety
/// As for `clisp_compile`.
#[no_mangle]
pub unsafe extern "C" fn clisp_compile_json(
    ctx: *mut ClispContext,
    json: *const c_char,
    entry: *const c_char,
    out: *mut *mut c_char,
) -> ClispStatus {
    call(ctx, out, |_| {
        let forms = forms_from_json(input(json, "json")?)?;
        let entry = if entry.is_null() {
            None
        } else {
            Some(input(entry, "entry")?)
        };
        compile_forms(&forms, entry)
    })
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn clisp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
