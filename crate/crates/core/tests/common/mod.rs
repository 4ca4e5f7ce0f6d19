#![allow(dead_code)]

use std::path::PathBuf;

use clisp::sexpr::{is_valid_symbol, SExpr};
use proptest::prelude::*;

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(rel)
}

pub fn symbol() -> impl Strategy<Value = String> {
    "[a-zA-Z_+*/<>=!?-][a-zA-Z0-9_+*/<>=!?.@-]{0,8}"
        .prop_filter("valid symbol", |s| is_valid_symbol(s))
}

pub fn atom() -> impl Strategy<Value = SExpr> {
    prop_oneof![
        symbol().prop_map(SExpr::symbol),
        any::<i64>().prop_map(SExpr::integer),
        prop::num::f64::NORMAL.prop_map(SExpr::float),
        prop_oneof![Just(0.0), Just(-0.0), Just(1e300), Just(5e-324)].prop_map(SExpr::float),
        ".{0,12}".prop_map(SExpr::string),
    ]
}

/// Trees up to four levels deep.
pub fn sexpr() -> impl Strategy<Value = SExpr> {
    atom().prop_recursive(4, 48, 6, |inner| {
        prop::collection::vec(inner, 0..6).prop_map(SExpr::list)
    })
}

/// Trees with no unquote or unquote-splicing anywhere.
pub fn plain_sexpr() -> impl Strategy<Value = SExpr> {
    sexpr().prop_filter("no macro heads", |e| !e.contains_unquote())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int8,
    Int,
    Int64,
    Float64,
}

impl Ty {
    pub fn name(self) -> &'static str {
        match self {
            Ty::Int8 => "int8",
            Ty::Int => "int",
            Ty::Int64 => "int64",
            Ty::Float64 => "float64",
        }
    }
}

/// Source text of a well-typed expression of type `ty`, over parameters
/// `a: int`, `b: int64`, `c: float64`.
pub fn typed_expr(ty: Ty, depth: u32) -> BoxedStrategy<String> {
    let leaf = match ty {
        Ty::Int8 => prop_oneof![
            Just("(trunc a int8)".to_owned()),
            (-128i64..128).prop_map(|v| format!("(trunc {v} int8)"))
        ]
        .boxed(),
        Ty::Int => prop_oneof![
            Just("a".to_owned()),
            (-1000i64..1000).prop_map(|v| v.to_string())
        ]
        .boxed(),
        Ty::Int64 => prop_oneof![
            Just("b".to_owned()),
            (-1000i64..1000).prop_map(|v| format!("(sext {v} int64)"))
        ]
        .boxed(),
        Ty::Float64 => prop_oneof![
            Just("c".to_owned()),
            (-1e6f64..1e6).prop_map(|v| format!("{v:?}"))
        ]
        .boxed(),
    };
    if depth == 0 {
        return leaf;
    }
    let sub = |t: Ty| typed_expr(t, depth - 1);
    let composite = match ty {
        Ty::Int8 => prop_oneof![
            (
                prop::sample::select(vec!["eq", "ne", "slt", "sgt", "sle", "sge"]),
                sub(Ty::Int),
                sub(Ty::Int)
            )
                .prop_map(|(op, l, r)| format!("({op} {l} {r})")),
            (
                prop::sample::select(vec!["eq", "slt"]),
                sub(Ty::Int64),
                sub(Ty::Int64)
            )
                .prop_map(|(op, l, r)| format!("({op} {l} {r})")),
            sub(Ty::Int).prop_map(|e| format!("(trunc {e} int8)")),
        ]
        .boxed(),
        Ty::Int => prop_oneof![
            (
                prop::sample::select(vec!["add", "sub", "mul"]),
                sub(Ty::Int),
                sub(Ty::Int)
            )
                .prop_map(|(op, l, r)| format!("({op} {l} {r})")),
            sub(Ty::Int64).prop_map(|e| format!("(trunc {e} int)")),
            sub(Ty::Int8).prop_map(|e| format!("(sext {e} int)")),
            sub(Ty::Float64).prop_map(|e| format!("(fptosi {e} int)")),
        ]
        .boxed(),
        Ty::Int64 => prop_oneof![
            (
                prop::sample::select(vec!["add", "sub", "mul"]),
                sub(Ty::Int64),
                sub(Ty::Int64)
            )
                .prop_map(|(op, l, r)| format!("({op} {l} {r})")),
            sub(Ty::Int).prop_map(|e| format!("(sext {e} int64)")),
            sub(Ty::Float64).prop_map(|e| format!("(fptosi {e} int64)")),
        ]
        .boxed(),
        Ty::Float64 => prop_oneof![
            (
                prop::sample::select(vec!["fadd", "fsub", "fmul", "fdiv"]),
                sub(Ty::Float64),
                sub(Ty::Float64)
            )
                .prop_map(|(op, l, r)| format!("({op} {l} {r})")),
            sub(Ty::Int).prop_map(|e| format!("(sitofp {e} float64)")),
            sub(Ty::Int64).prop_map(|e| format!("(sitofp {e} float64)")),
        ]
        .boxed(),
    };
    prop_oneof![1 => leaf, 3 => composite].boxed()
}

/// A well-typed function with locals, a loop and a branch around the
/// generated expressions.
pub fn typed_program() -> impl Strategy<Value = String> {
    (
        typed_expr(Ty::Int, 3),
        typed_expr(Ty::Int64, 3),
        typed_expr(Ty::Int8, 2),
        typed_expr(Ty::Float64, 2),
    )
        .prop_map(|(i, l, cond, f)| {
            format!(
                "(define ((f int) (a int) (b int64) (c float64))\n\
                 (declare x int)\n\
                 (declare y int64)\n\
                 (declare z float64)\n\
                 (set x {i})\n\
                 (set y {l})\n\
                 (set z {f})\n\
                 (if {cond} (set x (add x 1)) (set y (sub y (sext 1 int64))))\n\
                 (while (slt x 0) (set x (add x 1)))\n\
                 (ret (add x (trunc y int))))\n"
            )
        })
}
