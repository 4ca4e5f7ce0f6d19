//! C-Lisp syntax trees.
//!
//! Expressions and statements are generic over an annotation: `()` straight
//! out of the parser, [`CLispType`] once type checking has succeeded.

use super::types::CLispType;
use crate::sexpr::SourcePosition;

pub type Pos = Option<SourcePosition>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    SDiv,
    FAdd,
    FSub,
    FMul,
    FDiv,
}

impl BinOp {
    pub const ALL: [BinOp; 8] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::SDiv,
        BinOp::FAdd,
        BinOp::FSub,
        BinOp::FMul,
        BinOp::FDiv,
    ];

    /// Both the C-Lisp opcode and the LLVM instruction name.
    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::SDiv => "sdiv",
            BinOp::FAdd => "fadd",
            BinOp::FSub => "fsub",
            BinOp::FMul => "fmul",
            BinOp::FDiv => "fdiv",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, BinOp::FAdd | BinOp::FSub | BinOp::FMul | BinOp::FDiv)
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Slt,
    Sgt,
    Sle,
    Sge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Slt,
        CmpOp::Sgt,
        CmpOp::Sle,
        CmpOp::Sge,
    ];

    /// The C-Lisp opcode, which is also the `icmp` predicate.
    pub fn mnemonic(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Slt => "slt",
            CmpOp::Sgt => "sgt",
            CmpOp::Sle => "sle",
            CmpOp::Sge => "sge",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CastOp {
    Sext,
    Trunc,
    SiToFp,
    FpToSi,
    FpExt,
    FpTrunc,
}

impl CastOp {
    pub const ALL: [CastOp; 6] = [
        CastOp::Sext,
        CastOp::Trunc,
        CastOp::SiToFp,
        CastOp::FpToSi,
        CastOp::FpExt,
        CastOp::FpTrunc,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            CastOp::Sext => "sext",
            CastOp::Trunc => "trunc",
            CastOp::SiToFp => "sitofp",
            CastOp::FpToSi => "fptosi",
            CastOp::FpExt => "fpext",
            CastOp::FpTrunc => "fptrunc",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }
}

/// A variable occurrence. `slot` is filled in by the type checker with the
/// index of the binding in [`super::TypedFunction::locals`].
#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub slot: Option<usize>,
}

impl VarRef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            slot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind<A> {
    Int(i64),
    Float(f64),
    Str(String),
    Var(VarRef),
    Binary {
        op: BinOp,
        lhs: Box<Expr<A>>,
        rhs: Box<Expr<A>>,
    },
    Compare {
        op: CmpOp,
        lhs: Box<Expr<A>>,
        rhs: Box<Expr<A>>,
    },
    Load(Box<Expr<A>>),
    Call {
        callee: String,
        args: Vec<Expr<A>>,
    },
    Cast {
        op: CastOp,
        value: Box<Expr<A>>,
        to: CLispType,
    },
    PtrTo(VarRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr<A> {
    pub kind: ExprKind<A>,
    pub ty: A,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind<A> {
    Declare {
        var: VarRef,
        ty: CLispType,
    },
    Set {
        var: VarRef,
        value: Expr<A>,
    },
    Store {
        ptr: Expr<A>,
        value: Expr<A>,
    },
    Call {
        callee: String,
        args: Vec<Expr<A>>,
    },
    Ret(Option<Expr<A>>),
    If {
        cond: Expr<A>,
        then: Box<Stmt<A>>,
        otherwise: Option<Box<Stmt<A>>>,
    },
    While {
        cond: Expr<A>,
        body: Vec<Stmt<A>>,
    },
    Block(Vec<Stmt<A>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt<A> {
    pub kind: StmtKind<A>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: CLispType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<Param>,
    pub pos: Pos,
}

/// Signature of an external function.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSig {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: CLispType,
    pub variadic: bool,
    pub pos: Pos,
}

impl FunctionSig {
    pub fn new(name: impl Into<String>, params: Vec<Param>, ret: CLispType) -> Self {
        Self {
            name: name.into(),
            params,
            ret,
            variadic: false,
            pos: None,
        }
    }

    /// Same name, parameter types and return type. Parameter names and
    /// positions are ignored.
    pub fn same_shape(&self, other: &FunctionSig) -> bool {
        self.name == other.name
            && self.ret == other.ret
            && self.variadic == other.variadic
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.ty == b.ty)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef<A> {
    pub name: String,
    pub ret: CLispType,
    pub params: Vec<Param>,
    pub body: Vec<Stmt<A>>,
    pub pos: Pos,
}

impl<A> FunctionDef<A> {
    pub fn signature(&self) -> FunctionSig {
        FunctionSig {
            name: self.name.clone(),
            params: self.params.clone(),
            ret: self.ret.clone(),
            variadic: false,
            pos: self.pos,
        }
    }
}

/// A parsed, unchecked module.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Module {
    pub structs: Vec<StructDef>,
    pub externs: Vec<FunctionSig>,
    pub functions: Vec<FunctionDef<()>>,
}
