use std::fmt;

use thiserror::Error;

use super::ast::*;
use super::types::CLispType;
use crate::sexpr::{SExpr, SExprKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some(pos) => write!(f, "{pos}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

type Result<T> = std::result::Result<T, SyntaxError>;

fn err<T>(at: &SExpr, message: impl Into<String>) -> Result<T> {
    Err(SyntaxError {
        pos: at.pos,
        message: message.into(),
    })
}

/// Builds a module from fully expanded top-level forms.
///
/// Top-level forms are `(define ((name ret) (param type)...) stmt...)`,
/// `(declare-fn name ((param type)...) ret)` and
/// `(struct Name (field type)...)`.
pub fn parse_module(forms: &[SExpr]) -> Result<Module> {
    let mut module = Module::default();
    for form in forms {
        reject_unquote(form)?;
        let Some(items) = form.as_list() else {
            return err(form, format!("expected a top-level form, found `{form}`"));
        };
        match form.head() {
            Some("define") => module.functions.push(parse_define(form, items)?),
            Some("declare-fn") => module.externs.push(parse_declare_fn(form, items)?),
            Some("struct") => module.structs.push(parse_struct(form, items)?),
            Some(other) => return err(form, format!("unknown top-level form `{other}`")),
            None => return err(form, "top-level form must start with a symbol"),
        }
    }
    Ok(module)
}

fn reject_unquote(form: &SExpr) -> Result<()> {
    if let Some(items) = form.as_list() {
        if let Some(head @ ("unquote" | "unquote-splicing")) = form.head() {
            return err(
                form,
                format!("unexpanded macro expression `{head}`; run the expander first"),
            );
        }
        for item in items {
            reject_unquote(item)?;
        }
    }
    Ok(())
}

fn name_of<'a>(expr: &'a SExpr, what: &str) -> Result<&'a str> {
    expr.as_symbol()
        .map_or_else(|| err(expr, format!("expected {what}, found `{expr}`")), Ok)
}

fn type_of(expr: &SExpr) -> Result<CLispType> {
    CLispType::from_sexpr(expr).map_or_else(|| err(expr, format!("`{expr}` is not a type")), Ok)
}

fn arity(form: &SExpr, items: &[SExpr], expected: usize, shape: &str) -> Result<()> {
    if items.len() != expected {
        return err(form, format!("`{}` expects the form {shape}", items[0]));
    }
    Ok(())
}

fn parse_param(expr: &SExpr, what: &str) -> Result<Param> {
    match expr.as_list() {
        Some([name, ty]) => Ok(Param {
            name: name_of(name, what)?.to_owned(),
            ty: type_of(ty)?,
        }),
        _ => err(expr, format!("expected ({what} type), found `{expr}`")),
    }
}

fn parse_define(form: &SExpr, items: &[SExpr]) -> Result<FunctionDef<()>> {
    let Some(header) = items.get(1).and_then(SExpr::as_list) else {
        return err(
            form,
            "`define` expects ((name ret) (param type)...) followed by statements",
        );
    };
    let Some((name_ret, params)) = header.split_first() else {
        return err(&items[1], "function header is empty");
    };
    let (name, ret) = match name_ret.as_list() {
        Some([name, ret]) => (name_of(name, "a function name")?, type_of(ret)?),
        _ => return err(name_ret, "expected (name return-type)"),
    };
    let params = params
        .iter()
        .map(|p| parse_param(p, "parameter"))
        .collect::<Result<Vec<_>>>()?;
    let body = items[2..]
        .iter()
        .map(parse_stmt)
        .collect::<Result<Vec<_>>>()?;
    Ok(FunctionDef {
        name: name.to_owned(),
        ret,
        params,
        body,
        pos: form.pos,
    })
}

fn parse_declare_fn(form: &SExpr, items: &[SExpr]) -> Result<FunctionSig> {
    arity(form, items, 4, "(declare-fn name ((param type)...) ret)")?;
    let name = name_of(&items[1], "a function name")?;
    let Some(params) = items[2].as_list() else {
        return err(&items[2], "expected a parameter list");
    };
    let params = params
        .iter()
        .map(|p| parse_param(p, "parameter"))
        .collect::<Result<Vec<_>>>()?;
    Ok(FunctionSig {
        name: name.to_owned(),
        params,
        ret: type_of(&items[3])?,
        variadic: false,
        pos: form.pos,
    })
}

fn parse_struct(form: &SExpr, items: &[SExpr]) -> Result<StructDef> {
    if items.len() < 2 {
        return err(form, "`struct` expects (struct Name (field type)...)");
    }
    let name = name_of(&items[1], "a struct name")?;
    if CLispType::primitive(name).is_some() || name == "ptr" {
        return err(&items[1], format!("`{name}` cannot name a struct"));
    }
    let fields = items[2..]
        .iter()
        .map(|f| parse_param(f, "field"))
        .collect::<Result<Vec<_>>>()?;
    Ok(StructDef {
        name: name.to_owned(),
        fields,
        pos: form.pos,
    })
}

fn parse_stmt(form: &SExpr) -> Result<Stmt<()>> {
    let Some(items) = form.as_list() else {
        return err(form, format!("expected a statement, found `{form}`"));
    };
    let Some(head) = form.head() else {
        return err(form, "statement must start with an opcode");
    };
    let kind = match head {
        "declare" => {
            arity(form, items, 3, "(declare name type)")?;
            StmtKind::Declare {
                var: VarRef::new(name_of(&items[1], "a variable name")?),
                ty: type_of(&items[2])?,
            }
        }
        "set" => {
            arity(form, items, 3, "(set name expr)")?;
            StmtKind::Set {
                var: VarRef::new(name_of(&items[1], "a variable name")?),
                value: parse_expr(&items[2])?,
            }
        }
        "store" => {
            arity(form, items, 3, "(store pointer value)")?;
            StmtKind::Store {
                ptr: parse_expr(&items[1])?,
                value: parse_expr(&items[2])?,
            }
        }
        "call" => {
            let (callee, args) = parse_call(form, items)?;
            StmtKind::Call { callee, args }
        }
        "ret" => match items {
            [_] => StmtKind::Ret(None),
            [_, value] => StmtKind::Ret(Some(parse_expr(value)?)),
            _ => return err(form, "`ret` expects (ret) or (ret expr)"),
        },
        "if" => match items {
            [_, cond, then] => StmtKind::If {
                cond: parse_expr(cond)?,
                then: Box::new(parse_stmt(then)?),
                otherwise: None,
            },
            [_, cond, then, otherwise] => StmtKind::If {
                cond: parse_expr(cond)?,
                then: Box::new(parse_stmt(then)?),
                otherwise: Some(Box::new(parse_stmt(otherwise)?)),
            },
            _ => return err(form, "`if` expects (if cond then-stmt [else-stmt])"),
        },
        "while" => {
            if items.len() < 2 {
                return err(form, "`while` expects (while cond stmt...)");
            }
            StmtKind::While {
                cond: parse_expr(&items[1])?,
                body: items[2..].iter().map(parse_stmt).collect::<Result<_>>()?,
            }
        }
        "block" => StmtKind::Block(items[1..].iter().map(parse_stmt).collect::<Result<_>>()?),
        other => return err(form, format!("unknown statement `{other}`")),
    };
    Ok(Stmt {
        kind,
        pos: form.pos,
    })
}

fn parse_call(form: &SExpr, items: &[SExpr]) -> Result<(String, Vec<Expr<()>>)> {
    let Some(callee) = items.get(1) else {
        return err(form, "`call` expects (call function args...)");
    };
    let callee = name_of(callee, "a function name")?.to_owned();
    let args = items[2..]
        .iter()
        .map(parse_expr)
        .collect::<Result<Vec<_>>>()?;
    Ok((callee, args))
}

fn parse_expr(form: &SExpr) -> Result<Expr<()>> {
    let kind = match &form.kind {
        SExprKind::Integer(v) => ExprKind::Int(*v),
        SExprKind::Float(v) => ExprKind::Float(*v),
        SExprKind::String(s) => ExprKind::Str(s.clone()),
        SExprKind::Symbol(name) => ExprKind::Var(VarRef::new(name.clone())),
        SExprKind::List(items) => {
            let Some(head) = form.head() else {
                return err(form, "expression must start with an opcode");
            };
            if let Some(op) = BinOp::from_mnemonic(head) {
                arity(form, items, 3, &format!("({head} lhs rhs)"))?;
                ExprKind::Binary {
                    op,
                    lhs: Box::new(parse_expr(&items[1])?),
                    rhs: Box::new(parse_expr(&items[2])?),
                }
            } else if let Some(op) = CmpOp::from_mnemonic(head) {
                arity(form, items, 3, &format!("({head} lhs rhs)"))?;
                ExprKind::Compare {
                    op,
                    lhs: Box::new(parse_expr(&items[1])?),
                    rhs: Box::new(parse_expr(&items[2])?),
                }
            } else if let Some(op) = CastOp::from_mnemonic(head) {
                arity(form, items, 3, &format!("({head} expr type)"))?;
                ExprKind::Cast {
                    op,
                    value: Box::new(parse_expr(&items[1])?),
                    to: type_of(&items[2])?,
                }
            } else {
                match head {
                    "load" => {
                        arity(form, items, 2, "(load pointer)")?;
                        ExprKind::Load(Box::new(parse_expr(&items[1])?))
                    }
                    "call" => {
                        let (callee, args) = parse_call(form, items)?;
                        ExprKind::Call { callee, args }
                    }
                    "ptr-to" => {
                        arity(form, items, 2, "(ptr-to name)")?;
                        ExprKind::PtrTo(VarRef::new(name_of(&items[1], "a variable name")?))
                    }
                    other => return err(form, format!("unknown expression `{other}`")),
                }
            }
        }
    };
    Ok(Expr {
        kind,
        ty: (),
        pos: form.pos,
    })
}
