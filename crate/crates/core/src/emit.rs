//! Lowering of checked C-Lisp modules to textual LLVM IR.
//!
//! Every variable (parameters included) lives in an `alloca` slot created in
//! the entry block; reads load from the slot and `set` stores to it.
//! Comparisons yield `i1`, which is immediately widened to `i8`. Pointers
//! are opaque (`ptr`). No target triple is emitted.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::ast::{Expr, ExprKind, Stmt, StmtKind, VarRef};
use crate::frontend::{CLispType, TypedFunction, TypedModule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IRModuleText {
    pub text: String,
    /// Functions defined or declared by the module, in emission order.
    pub symbols: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShimError {
    #[error("no such function `{0}`")]
    NoSuchFunction(String),
    #[error("entry function must return int, `{name}` returns {ret}")]
    NotIntReturn { name: String, ret: CLispType },
    #[error("entry function `{0}` must not take parameters")]
    TakesParameters(String),
    #[error("module already has a symbol named `main`")]
    MainExists,
}

/// LLVM spelling of a type.
pub fn llvm_type(ty: &CLispType) -> String {
    match ty {
        CLispType::Void => "void".into(),
        CLispType::Int8 => "i8".into(),
        CLispType::Int => "i32".into(),
        CLispType::Int64 => "i64".into(),
        CLispType::Float32 => "float".into(),
        CLispType::Float64 => "double".into(),
        CLispType::Ptr(_) => "ptr".into(),
        CLispType::Struct(name) => format!("%{}", ident(name)),
    }
}

/// Renders a name as an LLVM identifier body, quoting when needed.
fn ident(name: &str) -> String {
    let plain = name.chars().enumerate().all(|(i, c)| {
        c.is_ascii_alphabetic()
            || matches!(c, '-' | '$' | '.' | '_')
            || (i > 0 && c.is_ascii_digit())
    });
    if plain && !name.is_empty() {
        name.to_owned()
    } else {
        let mut quoted = String::from("\"");
        for b in name.bytes() {
            if b == b'"' || b == b'\\' || !(0x20..0x7f).contains(&b) {
                let _ = write!(quoted, "\\{b:02X}");
            } else {
                quoted.push(b as char);
            }
        }
        quoted.push('"');
        quoted
    }
}

fn global(name: &str) -> String {
    format!("@{}", ident(name))
}

/// `declare` line for an external signature, as the emitter writes it.
pub fn declare_line(name: &str, params: &[CLispType], ret: &CLispType) -> String {
    let params: Vec<String> = params.iter().map(llvm_type).collect();
    format!(
        "declare {} {}({})",
        llvm_type(ret),
        global(name),
        params.join(", ")
    )
}

fn float_literal(v: f64) -> String {
    format!("0x{:016X}", v.to_bits())
}

/// Lowers a checked module.
pub fn emit(module: &TypedModule) -> IRModuleText {
    let mut strings: Vec<String> = Vec::new();
    let mut referenced: HashSet<String> = HashSet::new();
    let rets: HashMap<String, CLispType> = module
        .externs
        .iter()
        .map(|s| (s.name.clone(), s.ret.clone()))
        .chain(
            module
                .functions
                .iter()
                .map(|f| (f.def.name.clone(), f.def.ret.clone())),
        )
        .collect();
    let mut bodies = Vec::new();
    for f in &module.functions {
        bodies.push(FunctionEmitter::new(f, &rets, &mut strings, &mut referenced).emit());
    }

    let mut text = String::new();
    let mut symbols = Vec::new();
    for s in &module.structs {
        let fields: Vec<String> = s.fields.iter().map(|f| llvm_type(&f.ty)).collect();
        let _ = writeln!(
            text,
            "%{} = type {{ {} }}",
            ident(&s.name),
            fields.join(", ")
        );
    }
    if !module.structs.is_empty() {
        text.push('\n');
    }
    for (i, s) in strings.iter().enumerate() {
        let _ = writeln!(
            text,
            "@.str.{i} = private unnamed_addr constant [{} x i8] c\"{}\\00\"",
            s.len() + 1,
            escape_bytes(s)
        );
    }
    if !strings.is_empty() {
        text.push('\n');
    }
    let mut any_declare = false;
    for sig in &module.externs {
        if referenced.contains(&sig.name) {
            let params: Vec<CLispType> = sig.params.iter().map(|p| p.ty.clone()).collect();
            text.push_str(&declare_line(&sig.name, &params, &sig.ret));
            text.push('\n');
            symbols.push(sig.name.clone());
            any_declare = true;
        }
    }
    if any_declare {
        text.push('\n');
    }
    for (f, body) in module.functions.iter().zip(bodies) {
        symbols.push(f.def.name.clone());
        text.push_str(&body);
        text.push('\n');
    }
    IRModuleText { text, symbols }
}

/// Builds a `main` that calls `main_fn` and returns its result.
pub fn emit_entry_shim(main_fn: &str, module: &TypedModule) -> Result<String, ShimError> {
    if module.signature("main").is_some() {
        return Err(ShimError::MainExists);
    }
    let f = module
        .function(main_fn)
        .ok_or_else(|| ShimError::NoSuchFunction(main_fn.into()))?;
    if f.def.ret != CLispType::Int {
        return Err(ShimError::NotIntReturn {
            name: main_fn.into(),
            ret: f.def.ret.clone(),
        });
    }
    if !f.def.params.is_empty() {
        return Err(ShimError::TakesParameters(main_fn.into()));
    }
    Ok(format!(
        "define i32 @main() {{\nentry:\n  %result = call i32 {}()\n  ret i32 %result\n}}\n",
        global(main_fn)
    ))
}

/// [`emit`] followed by [`emit_entry_shim`] when an entry is given.
pub fn emit_program(module: &TypedModule, entry: Option<&str>) -> Result<IRModuleText, ShimError> {
    let shim = entry
        .map(|name| emit_entry_shim(name, module))
        .transpose()?;
    let mut ir = emit(module);
    if let Some(shim) = shim {
        ir.text.push_str(&shim);
        ir.symbols.push("main".into());
    }
    Ok(ir)
}

fn escape_bytes(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        if b == b'"' || b == b'\\' || !(0x20..0x7f).contains(&b) {
            let _ = write!(out, "\\{b:02X}");
        } else {
            out.push(b as char);
        }
    }
    out
}

struct FunctionEmitter<'a> {
    f: &'a TypedFunction,
    rets: &'a HashMap<String, CLispType>,
    strings: &'a mut Vec<String>,
    referenced: &'a mut HashSet<String>,
    used: HashSet<String>,
    slots: Vec<String>,
    lines: Vec<String>,
    next_temp: usize,
    terminated: bool,
}

impl<'a> FunctionEmitter<'a> {
    fn new(
        f: &'a TypedFunction,
        rets: &'a HashMap<String, CLispType>,
        strings: &'a mut Vec<String>,
        referenced: &'a mut HashSet<String>,
    ) -> Self {
        Self {
            f,
            rets,
            strings,
            referenced,
            used: HashSet::from(["entry".to_owned()]),
            slots: Vec::new(),
            lines: Vec::new(),
            next_temp: 0,
            terminated: false,
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_owned();
        let mut n = 0;
        while self.used.contains(&name) {
            n += 1;
            name = format!("{base}.{n}");
        }
        self.used.insert(name.clone());
        name
    }

    fn temp(&mut self) -> String {
        loop {
            let name = format!("t{}", self.next_temp);
            self.next_temp += 1;
            if self.used.insert(name.clone()) {
                return format!("%{name}");
            }
        }
    }

    fn label(&mut self, base: &str) -> String {
        self.fresh(base)
    }

    fn inst(&mut self, line: String) {
        if self.terminated {
            let dead = self.label("dead");
            self.lines.push(format!("{}:", ident(&dead)));
            self.terminated = false;
        }
        self.lines.push(format!("  {line}"));
    }

    fn terminate(&mut self, line: String) {
        self.inst(line);
        self.terminated = true;
    }

    fn start_block(&mut self, label: &str) {
        self.lines.push(format!("{}:", ident(label)));
        self.terminated = false;
    }

    fn branch_to(&mut self, label: &str) {
        if !self.terminated {
            self.terminate(format!("br label %{}", ident(label)));
        }
    }

    fn emit(mut self) -> String {
        let def = &self.f.def;
        let param_names: Vec<String> = def.params.iter().map(|p| self.fresh(&p.name)).collect();
        for local in &self.f.locals {
            let slot = self.fresh(&format!("{}.addr", local.name));
            self.slots.push(slot);
        }
        let header_params: Vec<String> = def
            .params
            .iter()
            .zip(&param_names)
            .map(|(p, n)| format!("{} %{}", llvm_type(&p.ty), ident(n)))
            .collect();
        let header = format!(
            "define {} {}({}) {{",
            llvm_type(&def.ret),
            global(&def.name),
            header_params.join(", ")
        );
        self.lines.push("entry:".into());
        for i in 0..self.f.locals.len() {
            let line = format!(
                "%{} = alloca {}",
                ident(&self.slots[i]),
                llvm_type(&self.f.locals[i].ty)
            );
            self.inst(line);
        }
        for (i, name) in param_names.iter().enumerate() {
            let ty = llvm_type(&def.params[i].ty);
            let line = format!(
                "store {ty} %{}, ptr %{}",
                ident(name),
                ident(&self.slots[i])
            );
            self.inst(line);
        }
        for stmt in &def.body {
            self.stmt(stmt);
        }
        if !self.terminated {
            if def.ret == CLispType::Void {
                self.terminate("ret void".into());
            } else {
                self.terminate("unreachable".into());
            }
        }
        let mut out = header;
        out.push('\n');
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }

    fn slot(&self, var: &VarRef) -> String {
        let slot = var.slot.unwrap_or_else(|| {
            panic!(
                "internal error in `{}`: unresolved variable `{}`",
                self.f.def.name, var.name
            )
        });
        format!("%{}", ident(&self.slots[slot]))
    }

    fn stmt(&mut self, stmt: &Stmt<CLispType>) {
        match &stmt.kind {
            StmtKind::Declare { .. } => {}
            StmtKind::Set { var, value } => {
                let v = self.expr(value);
                let slot = self.slot(var);
                self.inst(format!("store {} {v}, ptr {slot}", llvm_type(&value.ty)));
            }
            StmtKind::Store { ptr, value } => {
                let p = self.expr(ptr);
                let v = self.expr(value);
                self.inst(format!("store {} {v}, ptr {p}", llvm_type(&value.ty)));
            }
            StmtKind::Call { callee, args } => {
                let ret = self.callee_ret(callee);
                let call = self.call_text(callee, args, &ret);
                self.inst(call);
            }
            StmtKind::Ret(None) => self.terminate("ret void".into()),
            StmtKind::Ret(Some(value)) => {
                let v = self.expr(value);
                self.terminate(format!("ret {} {v}", llvm_type(&value.ty)));
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                let c = self.condition(cond);
                let then_label = self.label("then");
                let else_label = otherwise.as_ref().map(|_| self.label("else"));
                let end_label = self.label("endif");
                let false_target = else_label.clone().unwrap_or_else(|| end_label.clone());
                self.terminate(format!(
                    "br i1 {c}, label %{}, label %{}",
                    ident(&then_label),
                    ident(&false_target)
                ));
                self.start_block(&then_label);
                self.stmt(then);
                self.branch_to(&end_label);
                if let (Some(otherwise), Some(else_label)) = (otherwise, else_label) {
                    self.start_block(&else_label);
                    self.stmt(otherwise);
                    self.branch_to(&end_label);
                }
                self.start_block(&end_label);
            }
            StmtKind::While { cond, body } => {
                let cond_label = self.label("while.cond");
                let body_label = self.label("while.body");
                let end_label = self.label("while.end");
                self.branch_to(&cond_label);
                self.start_block(&cond_label);
                let c = self.condition(cond);
                self.terminate(format!(
                    "br i1 {c}, label %{}, label %{}",
                    ident(&body_label),
                    ident(&end_label)
                ));
                self.start_block(&body_label);
                for s in body {
                    self.stmt(s);
                }
                self.branch_to(&cond_label);
                self.start_block(&end_label);
            }
            StmtKind::Block(stmts) => {
                for s in stmts {
                    self.stmt(s);
                }
            }
        }
    }

    fn callee_ret(&self, callee: &str) -> CLispType {
        self.rets.get(callee).cloned().unwrap_or_else(|| {
            panic!(
                "internal error in `{}`: unknown callee `{callee}`",
                self.f.def.name
            )
        })
    }

    fn condition(&mut self, cond: &Expr<CLispType>) -> String {
        let v = self.expr(cond);
        let t = self.temp();
        self.inst(format!("{t} = icmp ne i8 {v}, 0"));
        t
    }

    fn call_text(&mut self, callee: &str, args: &[Expr<CLispType>], ret: &CLispType) -> String {
        self.referenced.insert(callee.to_owned());
        let args: Vec<String> = args
            .iter()
            .map(|a| format!("{} {}", llvm_type(&a.ty), self.expr(a)))
            .collect();
        format!(
            "call {} {}({})",
            llvm_type(ret),
            global(callee),
            args.join(", ")
        )
    }

    fn expr(&mut self, expr: &Expr<CLispType>) -> String {
        let ty = llvm_type(&expr.ty);
        match &expr.kind {
            ExprKind::Int(v) => v.to_string(),
            ExprKind::Float(v) => float_literal(*v),
            ExprKind::Str(s) => {
                let index = match self.strings.iter().position(|existing| existing == s) {
                    Some(i) => i,
                    None => {
                        self.strings.push(s.clone());
                        self.strings.len() - 1
                    }
                };
                format!("@.str.{index}")
            }
            ExprKind::Var(var) => {
                let slot = self.slot(var);
                let t = self.temp();
                self.inst(format!("{t} = load {ty}, ptr {slot}"));
                t
            }
            ExprKind::PtrTo(var) => self.slot(var),
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.expr(lhs);
                let b = self.expr(rhs);
                let t = self.temp();
                self.inst(format!("{t} = {} {ty} {a}, {b}", op.mnemonic()));
                t
            }
            ExprKind::Compare { op, lhs, rhs } => {
                let a = self.expr(lhs);
                let b = self.expr(rhs);
                let operand_ty = llvm_type(&lhs.ty);
                let bit = self.temp();
                self.inst(format!(
                    "{bit} = icmp {} {operand_ty} {a}, {b}",
                    op.mnemonic()
                ));
                let t = self.temp();
                self.inst(format!("{t} = zext i1 {bit} to i8"));
                t
            }
            ExprKind::Load(ptr) => {
                let p = self.expr(ptr);
                let t = self.temp();
                self.inst(format!("{t} = load {ty}, ptr {p}"));
                t
            }
            ExprKind::Call { callee, args } => {
                let call = self.call_text(callee, args, &expr.ty);
                let t = self.temp();
                self.inst(format!("{t} = {call}"));
                t
            }
            ExprKind::Cast { op, value, to } => {
                let v = self.expr(value);
                let t = self.temp();
                self.inst(format!(
                    "{t} = {} {} {v} to {}",
                    op.mnemonic(),
                    llvm_type(&value.ty),
                    llvm_type(to)
                ));
                t
            }
        }
    }
}
