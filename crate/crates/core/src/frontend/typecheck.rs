//! Type inference and checking.
//!
//! Nothing is converted implicitly. Integer literals are `int`, float
//! literals `float64` and string literals `(ptr int8)`; anything else needs
//! an explicit cast.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::ast::*;
use super::types::CLispType;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct TypeError {
    pub pos: Pos,
    pub message: String,
    pub expected: Option<CLispType>,
    pub actual: Option<CLispType>,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some(pos) => write!(f, "{pos}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// A variable with storage: a parameter or a `declare`d local.
#[derive(Debug, Clone, PartialEq)]
pub struct Local {
    pub name: String,
    pub ty: CLispType,
    pub is_param: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedFunction {
    pub def: FunctionDef<CLispType>,
    /// Parameters first, in order, then locals in declaration order.
    pub locals: Vec<Local>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedModule {
    pub structs: Vec<StructDef>,
    /// Deduplicated external signatures, excluding names defined here.
    pub externs: Vec<FunctionSig>,
    pub functions: Vec<TypedFunction>,
}

impl TypedModule {
    pub fn function(&self, name: &str) -> Option<&TypedFunction> {
        self.functions.iter().find(|f| f.def.name == name)
    }

    pub fn signature(&self, name: &str) -> Option<FunctionSig> {
        self.function(name)
            .map(|f| f.def.signature())
            .or_else(|| self.externs.iter().find(|s| s.name == name).cloned())
    }
}

/// Checks a parsed module, collecting every error found.
pub fn typecheck(module: &Module) -> Result<TypedModule, Vec<TypeError>> {
    let mut cx = ModuleChecker::default();
    cx.collect_structs(&module.structs);
    let externs = cx.collect_signatures(module);
    let functions: Vec<TypedFunction> = module
        .functions
        .iter()
        .filter_map(|f| cx.check_function(f))
        .collect();
    if cx.errors.is_empty() {
        Ok(TypedModule {
            structs: module.structs.clone(),
            externs,
            functions,
        })
    } else {
        Err(cx.errors)
    }
}

#[derive(Default)]
struct ModuleChecker {
    structs: HashMap<String, Vec<Param>>,
    sigs: HashMap<String, FunctionSig>,
    errors: Vec<TypeError>,
}

impl ModuleChecker {
    fn error(&mut self, pos: Pos, message: impl Into<String>) {
        self.errors.push(TypeError {
            pos,
            message: message.into(),
            expected: None,
            actual: None,
        });
    }

    fn mismatch(&mut self, pos: Pos, what: &str, expected: &CLispType, actual: &CLispType) {
        self.errors.push(TypeError {
            pos,
            message: format!("{what}: expected {expected}, found {actual}"),
            expected: Some(expected.clone()),
            actual: Some(actual.clone()),
        });
    }

    /// Checks that a type only names known structs. `void` is accepted
    /// only when `allow_void` is set, or as a pointee.
    fn check_type(&mut self, ty: &CLispType, pos: Pos, allow_void: bool, what: &str) -> bool {
        match ty {
            CLispType::Void if !allow_void => {
                self.error(pos, format!("{what} cannot have type void"));
                false
            }
            CLispType::Struct(name) if !self.structs.contains_key(name) => {
                self.error(pos, format!("unknown type `{name}` in {what}"));
                false
            }
            CLispType::Ptr(inner) => self.check_type(inner, pos, true, what),
            _ => true,
        }
    }

    fn collect_structs(&mut self, defs: &[StructDef]) {
        for def in defs {
            if self
                .structs
                .insert(def.name.clone(), def.fields.clone())
                .is_some()
            {
                self.error(
                    def.pos,
                    format!("struct `{}` is defined more than once", def.name),
                );
            }
        }
        for def in defs {
            let mut seen = HashSet::new();
            for field in &def.fields {
                if !seen.insert(&field.name) {
                    self.error(
                        def.pos,
                        format!("duplicate field `{}` in struct `{}`", field.name, def.name),
                    );
                }
                let what = format!("field `{}` of struct `{}`", field.name, def.name);
                self.check_type(&field.ty, def.pos, false, &what);
            }
            if self.contains_by_value(&def.name, &def.name, &mut HashSet::new()) {
                self.error(def.pos, format!("struct `{}` contains itself", def.name));
            }
        }
    }

    fn contains_by_value(&self, target: &str, name: &str, visiting: &mut HashSet<String>) -> bool {
        if !visiting.insert(name.to_owned()) {
            return false;
        }
        let Some(fields) = self.structs.get(name) else {
            return false;
        };
        fields.iter().any(|f| match &f.ty {
            CLispType::Struct(inner) => {
                inner == target || self.contains_by_value(target, inner, visiting)
            }
            _ => false,
        })
    }

    fn check_signature(&mut self, sig: &FunctionSig) {
        let mut seen = HashSet::new();
        for p in &sig.params {
            if !seen.insert(&p.name) {
                self.error(
                    sig.pos,
                    format!("duplicate parameter `{}` in `{}`", p.name, sig.name),
                );
            }
            let what = format!("parameter `{}` of `{}`", p.name, sig.name);
            self.check_type(&p.ty, sig.pos, false, &what);
        }
        let what = format!("return type of `{}`", sig.name);
        self.check_type(&sig.ret, sig.pos, true, &what);
    }

    fn collect_signatures(&mut self, module: &Module) -> Vec<FunctionSig> {
        let mut externs: Vec<FunctionSig> = Vec::new();
        for f in &module.functions {
            let sig = f.signature();
            self.check_signature(&sig);
            if self.sigs.insert(f.name.clone(), sig).is_some() {
                self.error(
                    f.pos,
                    format!("function `{}` is defined more than once", f.name),
                );
            }
        }
        for sig in &module.externs {
            self.check_signature(sig);
            match self.sigs.get(&sig.name) {
                Some(prev) if prev.same_shape(sig) => {}
                Some(prev) => {
                    let message = format!(
                        "conflicting declarations of `{}`: {} vs {}",
                        sig.name,
                        render_sig(prev),
                        render_sig(sig)
                    );
                    self.error(sig.pos, message);
                }
                None => {
                    self.sigs.insert(sig.name.clone(), sig.clone());
                    externs.push(sig.clone());
                }
            }
        }
        externs
    }

    fn check_function(&mut self, def: &FunctionDef<()>) -> Option<TypedFunction> {
        let errors_before = self.errors.len();
        let mut fx = FunctionChecker {
            module: self,
            ret: def.ret.clone(),
            scopes: vec![HashMap::new()],
            locals: Vec::new(),
        };
        for p in &def.params {
            let slot = fx.locals.len();
            fx.locals.push(Local {
                name: p.name.clone(),
                ty: p.ty.clone(),
                is_param: true,
            });
            fx.scopes[0].insert(p.name.clone(), slot);
        }
        let body = fx.check_block(&def.body);
        let locals = fx.locals;
        if def.ret != CLispType::Void && !always_returns(&def.body) {
            self.error(
                def.pos,
                format!(
                    "function `{}` returning {} can finish without `ret`",
                    def.name, def.ret
                ),
            );
        }
        if self.errors.len() != errors_before {
            return None;
        }
        let def = FunctionDef {
            name: def.name.clone(),
            ret: def.ret.clone(),
            params: def.params.clone(),
            body: body?,
            pos: def.pos,
        };
        Some(TypedFunction { def, locals })
    }
}

fn render_sig(sig: &FunctionSig) -> String {
    let params: Vec<String> = sig.params.iter().map(|p| p.ty.to_string()).collect();
    format!("({}) -> {}", params.join(" "), sig.ret)
}

fn always_returns<A>(stmts: &[Stmt<A>]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Ret(_) => true,
        StmtKind::If {
            then,
            otherwise: Some(otherwise),
            ..
        } => {
            always_returns(std::slice::from_ref(then.as_ref()))
                && always_returns(std::slice::from_ref(otherwise.as_ref()))
        }
        StmtKind::Block(inner) => always_returns(inner),
        _ => false,
    })
}

struct FunctionChecker<'m> {
    module: &'m mut ModuleChecker,
    ret: CLispType,
    scopes: Vec<HashMap<String, usize>>,
    locals: Vec<Local>,
}

type Typed<T> = Option<T>;

impl FunctionChecker<'_> {
    fn lookup(&mut self, var: &VarRef, pos: Pos) -> Typed<(VarRef, CLispType)> {
        let slot = self
            .scopes
            .iter()
            .rev()
            .find_map(|s| s.get(&var.name).copied());
        match slot {
            Some(slot) => Some((
                VarRef {
                    name: var.name.clone(),
                    slot: Some(slot),
                },
                self.locals[slot].ty.clone(),
            )),
            None => {
                self.module
                    .error(pos, format!("undeclared variable `{}`", var.name));
                None
            }
        }
    }

    fn check_block(&mut self, stmts: &[Stmt<()>]) -> Typed<Vec<Stmt<CLispType>>> {
        self.scopes.push(HashMap::new());
        // Check every statement even after a failure so all errors surface.
        let checked: Vec<_> = stmts.iter().map(|s| self.check_stmt(s)).collect();
        self.scopes.pop();
        checked.into_iter().collect()
    }

    fn check_stmt(&mut self, stmt: &Stmt<()>) -> Typed<Stmt<CLispType>> {
        let pos = stmt.pos;
        let kind = match &stmt.kind {
            StmtKind::Declare { var, ty } => {
                if self.scopes.iter().any(|s| s.contains_key(&var.name)) {
                    self.module.error(
                        pos,
                        format!("`{}` is already declared in this scope", var.name),
                    );
                    return None;
                }
                let what = format!("variable `{}`", var.name);
                if !self.module.check_type(ty, pos, false, &what) {
                    return None;
                }
                let slot = self.locals.len();
                self.locals.push(Local {
                    name: var.name.clone(),
                    ty: ty.clone(),
                    is_param: false,
                });
                self.scopes
                    .last_mut()
                    .expect("scope")
                    .insert(var.name.clone(), slot);
                StmtKind::Declare {
                    var: VarRef {
                        name: var.name.clone(),
                        slot: Some(slot),
                    },
                    ty: ty.clone(),
                }
            }
            StmtKind::Set { var, value } => {
                let target = self.lookup(var, pos);
                let value = self.check_expr(value);
                let ((var, var_ty), value) = (target?, value?);
                if value.ty != var_ty {
                    self.module.mismatch(
                        value.pos.or(pos),
                        &format!("assignment to `{}`", var.name),
                        &var_ty,
                        &value.ty,
                    );
                    return None;
                }
                StmtKind::Set { var, value }
            }
            StmtKind::Store { ptr, value } => {
                let ptr = self.check_expr(ptr);
                let value = self.check_expr(value);
                let (ptr, value) = (ptr?, value?);
                let CLispType::Ptr(pointee) = &ptr.ty else {
                    self.module.error(
                        ptr.pos.or(pos),
                        format!("store target must be a pointer, found {}", ptr.ty),
                    );
                    return None;
                };
                if **pointee == CLispType::Void {
                    self.module
                        .error(ptr.pos.or(pos), "cannot store through (ptr void)");
                    return None;
                }
                if value.ty != **pointee {
                    self.module
                        .mismatch(value.pos.or(pos), "stored value", pointee, &value.ty);
                    return None;
                }
                StmtKind::Store { ptr, value }
            }
            StmtKind::Call { callee, args } => {
                let (args, _) = self.check_call(callee, args, pos)?;
                StmtKind::Call {
                    callee: callee.clone(),
                    args,
                }
            }
            StmtKind::Ret(value) => {
                let ret = self.ret.clone();
                match value {
                    None if ret == CLispType::Void => StmtKind::Ret(None),
                    None => {
                        self.module
                            .error(pos, format!("bare `ret` in a function returning {ret}"));
                        return None;
                    }
                    Some(value) => {
                        let value = self.check_expr(value)?;
                        if ret == CLispType::Void {
                            self.module
                                .error(pos, "`ret` with a value in a void function");
                            return None;
                        }
                        if value.ty != ret {
                            self.module.mismatch(
                                value.pos.or(pos),
                                "returned value",
                                &ret,
                                &value.ty,
                            );
                            return None;
                        }
                        StmtKind::Ret(Some(value))
                    }
                }
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                let cond = self.check_condition(cond, pos);
                let then = self.check_nested(then);
                let otherwise = otherwise
                    .as_ref()
                    .map(|s| self.check_nested(s).map(Box::new));
                let otherwise = match otherwise {
                    Some(checked) => Some(checked?),
                    None => None,
                };
                StmtKind::If {
                    cond: cond?,
                    then: Box::new(then?),
                    otherwise,
                }
            }
            StmtKind::While { cond, body } => {
                let cond = self.check_condition(cond, pos);
                let body = self.check_block(body);
                StmtKind::While {
                    cond: cond?,
                    body: body?,
                }
            }
            StmtKind::Block(stmts) => StmtKind::Block(self.check_block(stmts)?),
        };
        Some(Stmt { kind, pos })
    }

    /// A branch of an `if` gets its own scope.
    fn check_nested(&mut self, stmt: &Stmt<()>) -> Typed<Stmt<CLispType>> {
        self.scopes.push(HashMap::new());
        let checked = self.check_stmt(stmt);
        self.scopes.pop();
        checked
    }

    fn check_condition(&mut self, cond: &Expr<()>, pos: Pos) -> Typed<Expr<CLispType>> {
        let cond = self.check_expr(cond)?;
        if cond.ty != CLispType::Int8 {
            self.module
                .mismatch(cond.pos.or(pos), "condition", &CLispType::Int8, &cond.ty);
            return None;
        }
        Some(cond)
    }

    fn check_call(
        &mut self,
        callee: &str,
        args: &[Expr<()>],
        pos: Pos,
    ) -> Typed<(Vec<Expr<CLispType>>, CLispType)> {
        let args: Vec<_> = args.iter().map(|a| self.check_expr(a)).collect();
        let Some(sig) = self.module.sigs.get(callee).cloned() else {
            self.module
                .error(pos, format!("call to undeclared function `{callee}`"));
            return None;
        };
        if args.len() != sig.params.len() {
            self.module.error(
                pos,
                format!(
                    "`{callee}` takes {} arguments, {} given",
                    sig.params.len(),
                    args.len()
                ),
            );
            return None;
        }
        let args: Vec<_> = args.into_iter().collect::<Option<_>>()?;
        let mut ok = true;
        for (arg, param) in args.iter().zip(&sig.params) {
            if arg.ty != param.ty {
                let what = format!("argument `{}` of `{callee}`", param.name);
                self.module
                    .mismatch(arg.pos.or(pos), &what, &param.ty, &arg.ty);
                ok = false;
            }
        }
        ok.then_some((args, sig.ret))
    }

    fn check_expr(&mut self, expr: &Expr<()>) -> Typed<Expr<CLispType>> {
        let pos = expr.pos;
        let (kind, ty) = match &expr.kind {
            ExprKind::Int(v) => {
                if i32::try_from(*v).is_err() {
                    self.module
                        .error(pos, format!("integer literal {v} does not fit in int"));
                    return None;
                }
                (ExprKind::Int(*v), CLispType::Int)
            }
            ExprKind::Float(v) => (ExprKind::Float(*v), CLispType::Float64),
            ExprKind::Str(s) => (ExprKind::Str(s.clone()), CLispType::ptr(CLispType::Int8)),
            ExprKind::Var(var) => {
                let (var, ty) = self.lookup(var, pos)?;
                (ExprKind::Var(var), ty)
            }
            ExprKind::PtrTo(var) => {
                let (var, ty) = self.lookup(var, pos)?;
                (ExprKind::PtrTo(var), CLispType::ptr(ty))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let lhs = self.check_expr(lhs);
                let rhs = self.check_expr(rhs);
                let (lhs, rhs) = (lhs?, rhs?);
                let family_ok = if op.is_float() {
                    lhs.ty.is_float()
                } else {
                    lhs.ty.is_integer()
                };
                if !family_ok {
                    let family = if op.is_float() {
                        "a float type"
                    } else {
                        "an integer type"
                    };
                    self.module.error(
                        lhs.pos.or(pos),
                        format!(
                            "`{}` needs operands of {family}, found {}",
                            op.mnemonic(),
                            lhs.ty
                        ),
                    );
                    return None;
                }
                if rhs.ty != lhs.ty {
                    let what = format!("right operand of `{}`", op.mnemonic());
                    self.module
                        .mismatch(rhs.pos.or(pos), &what, &lhs.ty, &rhs.ty);
                    return None;
                }
                let ty = lhs.ty.clone();
                (
                    ExprKind::Binary {
                        op: *op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    },
                    ty,
                )
            }
            ExprKind::Compare { op, lhs, rhs } => {
                let lhs = self.check_expr(lhs);
                let rhs = self.check_expr(rhs);
                let (lhs, rhs) = (lhs?, rhs?);
                let pointer_ok = matches!(op, CmpOp::Eq | CmpOp::Ne) && lhs.ty.is_pointer();
                if !lhs.ty.is_integer() && !pointer_ok {
                    self.module.error(
                        lhs.pos.or(pos),
                        format!(
                            "`{}` cannot compare values of type {}",
                            op.mnemonic(),
                            lhs.ty
                        ),
                    );
                    return None;
                }
                if rhs.ty != lhs.ty {
                    let what = format!("operands of `{}`", op.mnemonic());
                    self.module
                        .mismatch(rhs.pos.or(pos), &what, &lhs.ty, &rhs.ty);
                    return None;
                }
                (
                    ExprKind::Compare {
                        op: *op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    },
                    CLispType::Int8,
                )
            }
            ExprKind::Load(ptr) => {
                let ptr = self.check_expr(ptr)?;
                let ty = match &ptr.ty {
                    CLispType::Ptr(inner) if **inner != CLispType::Void => (**inner).clone(),
                    CLispType::Ptr(_) => {
                        self.module
                            .error(ptr.pos.or(pos), "cannot load through (ptr void)");
                        return None;
                    }
                    other => {
                        self.module.error(
                            ptr.pos.or(pos),
                            format!("`load` needs a pointer, found {other}"),
                        );
                        return None;
                    }
                };
                (ExprKind::Load(Box::new(ptr)), ty)
            }
            ExprKind::Call { callee, args } => {
                let (args, ret) = self.check_call(callee, args, pos)?;
                if ret == CLispType::Void {
                    self.module
                        .error(pos, format!("`{callee}` returns void and has no value"));
                    return None;
                }
                (
                    ExprKind::Call {
                        callee: callee.clone(),
                        args,
                    },
                    ret,
                )
            }
            ExprKind::Cast { op, value, to } => {
                let value = self.check_expr(value)?;
                if !self.module.check_type(to, pos, false, "cast target") {
                    return None;
                }
                self.check_cast(*op, &value.ty, to, pos)?;
                (
                    ExprKind::Cast {
                        op: *op,
                        value: Box::new(value),
                        to: to.clone(),
                    },
                    to.clone(),
                )
            }
        };
        Some(Expr { kind, ty, pos })
    }

    fn check_cast(&mut self, op: CastOp, from: &CLispType, to: &CLispType, pos: Pos) -> Typed<()> {
        let name = op.mnemonic();
        let ok = match op {
            CastOp::Sext | CastOp::Trunc => match (from.int_bits(), to.int_bits()) {
                (Some(a), Some(b)) => {
                    if op == CastOp::Sext && a >= b {
                        self.module.error(
                            pos,
                            format!("`sext` must widen, but {from} is not narrower than {to}"),
                        );
                        return None;
                    }
                    if op == CastOp::Trunc && a <= b {
                        self.module.error(
                            pos,
                            format!("`trunc` must narrow, but {from} is not wider than {to}"),
                        );
                        return None;
                    }
                    true
                }
                _ => false,
            },
            CastOp::SiToFp => from.is_integer() && to.is_float(),
            CastOp::FpToSi => from.is_float() && to.is_integer(),
            CastOp::FpExt => *from == CLispType::Float32 && *to == CLispType::Float64,
            CastOp::FpTrunc => *from == CLispType::Float64 && *to == CLispType::Float32,
        };
        if !ok {
            self.module
                .error(pos, format!("`{name}` cannot convert {from} to {to}"));
            return None;
        }
        Some(())
    }
}
