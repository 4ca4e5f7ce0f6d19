//! A small compiler toolchain over S-expressions.
//!
//! ```text
//! .cl source --parse--> SExpr --to_json--> JSON --prelisp::expand--> JSON
//!      --from_json--> SExpr --frontend::parse_module--> Module
//!      --frontend::typecheck--> TypedModule --emit::emit--> LLVM IR text
//! ```
//!
//! [`bindgen`] turns C headers into `declare-fn`/`struct` forms by running an
//! external C frontend, and is exposed to programs as the `include` macro.

pub mod bindgen;
pub mod emit;
pub mod frontend;
pub mod prelisp;
pub mod sexpr;
pub mod toolchain;
