//! The C-Lisp language: syntax trees, parsing from S-expressions, and type
//! checking.

pub mod ast;
mod parse;
mod typecheck;
mod types;

pub use ast::{FunctionDef, FunctionSig, Module, Param, StructDef};
pub use parse::{parse_module, SyntaxError};
pub use typecheck::{typecheck, Local, TypeError, TypedFunction, TypedModule};
pub use types::CLispType;
