mod common;

use std::collections::HashMap;

use clisp::bindgen::parse_ir_signatures;
use clisp::emit::{declare_line, emit};
use clisp::frontend::ast::{Expr, ExprKind, Stmt, StmtKind};
use clisp::frontend::{parse_module, typecheck, CLispType, TypedModule};
use clisp::prelisp::{expand, StaticResolver};
use clisp::sexpr::{from_json, parse_sexprs, print_sexpr, to_json, SExpr};
use clisp::toolchain::{Toolchain, TOOLCHAIN};
use common::*;
use proptest::prelude::*;
use serde_json::{json, Value};

fn compile_src(src: &str) -> Result<TypedModule, String> {
    let forms = parse_sexprs(src).map_err(|e| e.to_string())?;
    let module = parse_module(&forms).map_err(|e| e.to_string())?;
    typecheck(&module).map_err(|errs| {
        errs.iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    })
}

fn walk_expr(e: &Expr<CLispType>, f: &mut dyn FnMut(&Expr<CLispType>)) {
    f(e);
    match &e.kind {
        ExprKind::Binary { lhs, rhs, .. } | ExprKind::Compare { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Load(inner) => walk_expr(inner, f),
        ExprKind::Cast { value, .. } => walk_expr(value, f),
        ExprKind::Call { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        _ => {}
    }
}

fn walk_stmt(s: &Stmt<CLispType>, f: &mut dyn FnMut(&Expr<CLispType>)) {
    match &s.kind {
        StmtKind::Set { value, .. } => walk_expr(value, f),
        StmtKind::Store { ptr, value } => {
            walk_expr(ptr, f);
            walk_expr(value, f);
        }
        StmtKind::Call { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        StmtKind::Ret(Some(v)) => walk_expr(v, f),
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            walk_expr(cond, f);
            walk_stmt(then, f);
            if let Some(o) = otherwise {
                walk_stmt(o, f);
            }
        }
        StmtKind::While { cond, body } => {
            walk_expr(cond, f);
            body.iter().for_each(|s| walk_stmt(s, f));
        }
        StmtKind::Block(body) => body.iter().for_each(|s| walk_stmt(s, f)),
        _ => {}
    }
}

/// Every `%name = ...` is defined at most once per function.
fn ssa_violations(ir: &str) -> Vec<String> {
    let mut bad = Vec::new();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for line in ir.lines() {
        if line.starts_with("define ") {
            seen.clear();
        }
        let Some(rest) = line.trim_start().strip_prefix('%') else {
            continue;
        };
        let Some((name, _)) = rest.split_once(" = ") else {
            continue;
        };
        if seen.insert(name, ()).is_some() {
            bad.push(name.to_owned());
        }
    }
    bad
}

fn splice_resolver(k: usize) -> StaticResolver {
    StaticResolver::new().function("many", move |_| {
        Ok(Value::Array((0..k).map(|i| json!(["item", i])).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(x in sexpr()) {
        let text = print_sexpr(&x);
        prop_assert_eq!(parse_sexprs(&text).unwrap(), vec![x]);
    }

    #[test]
    fn json_round_trip_is_identity(x in sexpr()) {
        prop_assert_eq!(from_json(&to_json(&x)).unwrap(), x);
    }

    #[test]
    fn reader_macros_desugar(x in sexpr()) {
        let e = print_sexpr(&x);
        prop_assert_eq!(parse_sexprs(&format!(",{e}")).unwrap(), parse_sexprs(&format!("(unquote {e})")).unwrap());
        prop_assert_eq!(
            parse_sexprs(&format!(",@{e}")).unwrap(),
            parse_sexprs(&format!("(unquote-splicing {e})")).unwrap()
        );
    }

    #[test]
    fn comments_are_invisible(items in prop::collection::vec(sexpr(), 0..6), note in "[^\n]{0,20}") {
        let plain = format!("({})", items.iter().map(print_sexpr).collect::<Vec<_>>().join(" "));
        let sep = format!(" ;{note}\n ");
        let commented = format!(";{note}\n({}{sep})", items.iter().map(print_sexpr).collect::<Vec<_>>().join(&sep));
        prop_assert_eq!(parse_sexprs(&plain).unwrap(), parse_sexprs(&commented).unwrap());
    }

    #[test]
    fn expansion_without_macros_is_identity(forms in prop::collection::vec(plain_sexpr(), 0..5)) {
        let program = Value::Array(forms.iter().map(to_json).collect());
        let mut r = StaticResolver::new();
        prop_assert_eq!(expand(&program, &mut r).unwrap(), program);
    }

    #[test]
    fn splicing_changes_parent_length_by_k_minus_one(
        items in prop::collection::vec(plain_sexpr(), 0..6),
        at in 0usize..7,
        k in 0usize..5,
    ) {
        let mut parent: Vec<Value> = items.iter().map(to_json).collect();
        let at = at.min(parent.len());
        parent.insert(at, json!(["unquote-splicing", ["many"]]));
        let program = json!([parent.clone()]);
        let out = expand(&program, &mut splice_resolver(k)).unwrap();
        let out_parent = out[0].as_array().unwrap();
        prop_assert_eq!(out_parent.len() as isize - parent.len() as isize, k as isize - 1);
        // everything outside the macro is untouched and in order
        prop_assert_eq!(&out_parent[..at], &parent[..at]);
        prop_assert_eq!(&out_parent[at + k..], &parent[at + 1..]);
        let again = expand(&program, &mut splice_resolver(k)).unwrap();
        prop_assert_eq!(out, again);
    }

    #[test]
    fn expansion_substitutes_unquote_in_place(items in prop::collection::vec(plain_sexpr(), 1..5), at in 0usize..5) {
        let mut parent: Vec<Value> = items.iter().map(to_json).collect();
        let at = at.min(parent.len() - 1);
        let original = parent[at].clone();
        parent[at] = json!(["unquote", "X"]);
        let mut r = StaticResolver::new().variable("X", original);
        let expected = Value::Array(items.iter().map(to_json).collect());
        prop_assert_eq!(expand(&json!([parent]), &mut r).unwrap(), json!([expected]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn well_typed_programs_have_identical_operand_types(src in typed_program()) {
        let typed = compile_src(&src).map_err(TestCaseError::fail)?;
        for f in &typed.functions {
            for s in &f.def.body {
                walk_stmt(s, &mut |e| {
                    if let ExprKind::Binary { lhs, rhs, .. } | ExprKind::Compare { lhs, rhs, .. } = &e.kind {
                        assert_eq!(lhs.ty, rhs.ty, "{src}");
                    }
                    if !matches!(e.kind, ExprKind::Call { .. }) {
                        assert_ne!(e.ty, CLispType::Void, "{src}");
                    }
                });
            }
        }
    }

    #[test]
    fn emission_is_deterministic_and_ssa(src in typed_program()) {
        let typed = compile_src(&src).map_err(TestCaseError::fail)?;
        let a = emit(&typed).text;
        let b = emit(&compile_src(&src).unwrap()).text;
        prop_assert_eq!(&a, &b);
        prop_assert!(ssa_violations(&a).is_empty(), "{:?}\n{}", ssa_violations(&a), a);
    }

    #[test]
    fn removing_any_cast_is_a_type_error(src in typed_program(), pick in any::<prop::sample::Index>()) {
        let forms = parse_sexprs(&src).unwrap();
        let sites = cast_sites(&forms[0], &mut Vec::new());
        prop_assume!(!sites.is_empty());
        let path = &sites[pick.index(sites.len())];
        let mutated = remove_cast(&forms[0], path);
        let module = parse_module(&[mutated]).unwrap();
        prop_assert!(typecheck(&module).is_err());
    }

    #[test]
    fn mismatched_operands_are_rejected(
        l in prop::sample::select(vec!["int8", "int", "int64", "float32", "float64"]),
        r in prop::sample::select(vec!["int8", "int", "int64", "float32", "float64"]),
        op in prop::sample::select(vec!["add", "mul", "fadd", "eq", "slt"]),
    ) {
        prop_assume!(l != r);
        let src = format!("(define ((f void) (x {l}) (y {r})) (declare t int8) (call f x y) ({op} x y) (ret))");
        let src = src.replace(&format!("({op} x y)"), &format!("(set t (trunc (sext ({op} x y) int) int8))"));
        let first = compile_src(&src).unwrap_err();
        prop_assert_eq!(first, compile_src(&src).unwrap_err());
    }

    #[test]
    fn ir_type_mapping_round_trips(
        params in prop::collection::vec(prop::sample::select(vec!["int8", "int", "int64", "float32", "float64", "ptr"]), 0..6),
        ret in prop::sample::select(vec!["void", "int8", "int", "int64", "float32", "float64", "ptr"]),
    ) {
        let ty = |name: &str| match name {
            "ptr" => CLispType::ptr(CLispType::Void),
            other => CLispType::primitive(other).unwrap(),
        };
        let params: Vec<CLispType> = params.iter().map(|p| ty(p)).collect();
        let ret = ty(ret);
        let line = declare_line("ext", &params, &ret);
        let (sigs, _) = parse_ir_signatures(&line, &["ext".to_owned()], &[]).unwrap();
        let got: Vec<CLispType> = sigs[0].params.iter().map(|p| p.ty.clone()).collect();
        prop_assert_eq!(&got, &params);
        prop_assert_eq!(&sigs[0].ret, &ret);
        prop_assert_eq!(declare_line("ext", &got, &sigs[0].ret), line);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_programs_pass_the_verifier(src in typed_program()) {
        let Ok(tc) = Toolchain::locate(TOOLCHAIN, None) else { return Ok(()) };
        let ir = emit(&compile_src(&src).unwrap()).text;
        let dir = tempfile::tempdir().unwrap();
        let ll = dir.path().join("p.ll");
        std::fs::write(&ll, &ir).unwrap();
        if let Err(e) = tc.verify(&ll) {
            return Err(TestCaseError::fail(format!("{e}\n{ir}")));
        }
    }
}

const CASTS: [&str; 7] = [
    "sext", "trunc", "sitofp", "fptosi", "fpext", "fptrunc", "bitcast",
];

/// Paths to every `(sext ...)` / `(trunc ...)` node whose parent is not
/// itself a cast. A cast directly under another cast can be redundant
/// (`sitofp` takes any integer width), so removing it is not an error.
fn cast_sites(e: &SExpr, path: &mut Vec<usize>) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if let Some(items) = e.as_list() {
        let under_cast = matches!(e.head(), Some(h) if CASTS.contains(&h));
        for (i, item) in items.iter().enumerate() {
            path.push(i);
            if !under_cast
                && matches!(item.head(), Some("sext" | "trunc"))
                && item.as_list().is_some_and(|l| l.len() == 3)
            {
                out.push(path.clone());
            }
            out.extend(cast_sites(item, path));
            path.pop();
        }
    }
    out
}

fn remove_cast(e: &SExpr, path: &[usize]) -> SExpr {
    match path.split_first() {
        None => e.as_list().unwrap()[1].clone(),
        Some((i, rest)) => {
            let mut items = e.as_list().unwrap().to_vec();
            items[*i] = remove_cast(&items[*i], rest);
            SExpr::list(items)
        }
    }
}
