use std::path::PathBuf;

use clisp::bindgen::{bind, probe_declare_lines, BindError, BindRequest, BindgenResolver, Binding};
use clisp::frontend::{parse_module, typecheck, CLispType};
use clisp::prelisp::{expand, LayeredResolver, MacroResolver, ResolveError, StaticResolver};
use clisp::sexpr::parse_sexprs;
use clisp::toolchain::{Toolchain, C_FRONTEND};
use serde_json::{json, Value};

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/headers/fakecuda.h")
}

fn cc() -> Option<Toolchain> {
    match Toolchain::locate(C_FRONTEND, None) {
        Ok(tc) => Some(tc),
        Err(e) => {
            eprintln!("SKIP(no-c-frontend): {e}");
            None
        }
    }
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn request(functions: &[&str], structs: &[&str], typedefs: &[&str]) -> BindRequest {
    BindRequest {
        headers: vec![header()],
        functions: strings(functions),
        structs: strings(structs),
        typedefs: strings(typedefs),
    }
}

fn run(
    functions: &[&str],
    structs: &[&str],
    typedefs: &[&str],
) -> Option<Result<Binding, BindError>> {
    let cc = cc()?;
    Some(bind(&cc, &request(functions, structs, typedefs), &[]))
}

#[test]
fn unnamed_parameters_get_positional_names() {
    let Some(result) = run(&["f"], &[], &[]) else {
        return;
    };
    let forms = result.unwrap().forms();
    assert_eq!(
        forms,
        vec![json!([
            "declare-fn",
            "f",
            [["arg0", ["ptr", "void"]], ["arg1", "int8"]],
            "int64"
        ])]
    );
}

#[test]
fn parameter_names_come_from_the_header() {
    let Some(result) = run(&["cuInit", "g"], &[], &[]) else {
        return;
    };
    assert_eq!(
        result.unwrap().forms(),
        vec![
            json!(["declare-fn", "cuInit", [["flags", "int"]], "int"]),
            json!(["declare-fn", "g", [["count", "int"]], "void"]),
        ]
    );
}

#[test]
fn pointer_parameters_keep_their_pointee() {
    let Some(result) = run(&["cuModuleGetFunction", "cuDeviceGet"], &[], &[]) else {
        return;
    };
    let binding = result.unwrap();
    let void_ptr = CLispType::ptr(CLispType::Void);
    let sig = &binding.signatures[0];
    let tys: Vec<_> = sig.params.iter().map(|p| p.ty.clone()).collect();
    assert_eq!(
        tys,
        vec![
            CLispType::ptr(void_ptr.clone()),
            void_ptr,
            CLispType::ptr(CLispType::Int8)
        ]
    );
    assert_eq!(
        binding.signatures[1].params[0].ty,
        CLispType::ptr(CLispType::Int)
    );
}

#[test]
fn opaque_handle_typedefs_are_void_pointers() {
    let Some(result) = run(&[], &[], &["CUcontext", "CUresult", "CUdeviceptr"]) else {
        return;
    };
    assert_eq!(
        result.unwrap().aliases,
        vec![
            ("CUcontext".to_owned(), CLispType::ptr(CLispType::Void)),
            ("CUresult".to_owned(), CLispType::Int),
            ("CUdeviceptr".to_owned(), CLispType::Int64),
        ]
    );
}

#[test]
fn struct_layouts_with_field_names() {
    let Some(result) = run(&[], &["Point", "struct Pair", "struct Slot"], &[]) else {
        return;
    };
    assert_eq!(
        result.unwrap().forms(),
        vec![
            json!(["struct", "Point", ["x", "int"], ["y", "float64"]]),
            json!(["struct", "Pair", ["tag", "int8"], ["value", "int64"]]),
            json!([
                "struct",
                "Slot",
                ["owner", ["ptr", "void"]],
                ["pairs", ["ptr", "Pair"]],
                ["label", ["ptr", "int8"]]
            ]),
        ]
    );
}

#[test]
fn out_of_scope_constructs_are_rejected_by_name() {
    let Some(cc) = cc() else { return };
    let cases: [(&[&str], &[&str], &str); 5] = [
        (&["sum_all"], &[], "variadic"),
        (&["norm"], &[], "by value"),
        (&["checksum"], &[], "i16"),
        (&[], &["CUcallback"], "function pointer"),
        (&[], &["Vec3"], "array"),
    ];
    for (functions, typedefs, needle) in cases {
        let err = bind(&cc, &request(functions, &[], typedefs), &[])
            .unwrap_err()
            .to_string();
        let name = functions.first().or(typedefs.first()).unwrap();
        assert!(err.contains(needle) && err.contains(name), "{err}");
    }
}

#[test]
fn unknown_names_surface_the_frontend_diagnostic() {
    let Some(cc) = cc() else { return };
    let err = bind(&cc, &request(&["cuNothing"], &[], &[]), &[]).unwrap_err();
    let BindError::Frontend { scratch, .. } = &err else {
        panic!("{err}")
    };
    let msg = err.to_string();
    assert!(
        msg.contains("cuNothing") && msg.contains("undeclared"),
        "{msg}"
    );
    assert!(scratch.join("probe.c").exists());
    std::fs::remove_dir_all(scratch).unwrap();
}

#[test]
fn missing_frontend_names_the_flag() {
    let mut r = BindgenResolver::new(Some("/nonexistent/cc".into()), vec![]);
    let args = [json!([header().to_string_lossy()]), json!(["g"])];
    let Err(ResolveError::Host(msg)) = r.resolve_call("include", &args) else {
        panic!()
    };
    assert!(msg.contains("--cc") && msg.contains("CLISP_CC"), "{msg}");
}

#[test]
fn include_is_idempotent() {
    let Some(cc) = cc() else { return };
    let req = request(
        &["cuInit", "cuCtxCreate", "f"],
        &["struct Pair"],
        &["CUcontext"],
    );
    let a = bind(&cc, &req, &[]).unwrap().forms();
    let b = bind(&cc, &req, &[]).unwrap().forms();
    assert_eq!(a, b);
}

#[test]
fn include_splices_and_registers_aliases() {
    if cc().is_none() {
        return;
    }
    let h = header().to_string_lossy().into_owned();
    let program = json!([
        [
            "unquote-splicing",
            [
                "include",
                [h],
                ["cuModuleLoad", "cuModuleGetFunction"],
                [],
                ["CUmodule", "CUfunction"]
            ]
        ],
        [
            "define",
            [["load", "int"], ["path", ["ptr", "int8"]]],
            ["declare", "module", ["unquote", "CUmodule"]],
            ["declare", "kernel", ["unquote", "CUfunction"]],
            ["declare", "status", "int"],
            [
                "set",
                "status",
                ["call", "cuModuleLoad", ["ptr-to", "module"], "path"]
            ],
            [
                "set",
                "status",
                [
                    "call",
                    "cuModuleGetFunction",
                    ["ptr-to", "kernel"],
                    "module",
                    ["string", "vadd"]
                ]
            ],
            ["ret", "status"]
        ]
    ]);
    let mut resolver = LayeredResolver::new()
        .with(BindgenResolver::new(None, vec![]))
        .with(StaticResolver::new());
    let expanded = expand(&program, &mut resolver).unwrap();
    let forms = expanded.as_array().unwrap();
    assert_eq!(forms.len(), 3);
    assert_eq!(forms[0][0], "declare-fn");
    assert_eq!(forms[1][0], "declare-fn");
    assert_eq!(forms[2][2], json!(["declare", "module", ["ptr", "void"]]));

    let sexprs = clisp::sexpr::from_json_forms(&expanded).unwrap();
    let module = parse_module(&sexprs).unwrap();
    typecheck(&module).unwrap();
}

/// Every generated declaration, called with arguments of its own parameter
/// types, emits the same `declare` line the frontend produced.
#[test]
fn generated_declarations_round_trip_through_emit() {
    let Some(cc) = cc() else { return };
    let functions = [
        "cuInit",
        "cuDeviceGet",
        "cuCtxCreate",
        "cuModuleLoad",
        "cuModuleGetFunction",
        "f",
        "g",
        "halve",
    ];
    let req = request(&functions, &[], &[]);
    let binding = bind(&cc, &req, &[]).unwrap();
    assert_eq!(binding.signatures.len(), functions.len());

    let probe_ir = cc.c_to_ir(&write_probe(&req), &[]).unwrap();
    let probe_lines = probe_declare_lines(&probe_ir);

    for (sig, form) in binding.signatures.iter().zip(binding.forms()) {
        let mut body = String::new();
        let mut args = String::new();
        for (i, p) in sig.params.iter().enumerate() {
            body.push_str(&format!("(declare a{i} {})\n", p.ty));
            args.push_str(&format!(" a{i}"));
        }
        let decl = clisp::sexpr::print_sexpr(&clisp::sexpr::from_json(&form).unwrap());
        let src = format!(
            "{decl}\n(define ((caller void))\n{body}(call {}{args})\n(ret))",
            sig.name
        );
        let module = parse_module(&parse_sexprs(&src).unwrap()).unwrap();
        let ir = clisp::emit::emit(&typecheck(&module).unwrap()).text;
        let emitted = ir.lines().find(|l| l.starts_with("declare ")).unwrap();
        assert_eq!(emitted, probe_lines[&sig.name], "{}", sig.name);
    }
}

fn write_probe(req: &BindRequest) -> PathBuf {
    let dir = tempfile::tempdir().unwrap().keep();
    let path = dir.join("probe.c");
    std::fs::write(&path, clisp::bindgen::generate_probe(req)).unwrap();
    path
}

#[test]
fn aliases_resolve_only_after_include() {
    if cc().is_none() {
        return;
    }
    let mut r = BindgenResolver::new(None, vec![]);
    assert!(r.resolve_variable("CUcontext").is_err());
    let args: Vec<Value> = vec![
        json!([header().to_string_lossy()]),
        json!([]),
        json!([]),
        json!(["CUcontext"]),
    ];
    assert_eq!(r.resolve_call("include", &args).unwrap(), json!([]));
    assert_eq!(
        r.resolve_variable("CUcontext").unwrap(),
        json!(["ptr", "void"])
    );
}
