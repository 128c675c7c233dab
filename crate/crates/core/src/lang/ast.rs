//! Syntax tree of the module language.
//!
//! Every node carries a [`Span`]. Spans take part in `PartialEq`, so two
//! parses of differently laid-out text only compare equal after
//! [`normalize`](super::normalize).

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: u32,
    pub end: u32,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, col: u32) -> Self {
        Span {
            start: start as u32,
            end: end as u32,
            line,
            col,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    Int,
    Str,
    Bool,
    Bag,
    Void,
    Class(String),
}

impl TypeTag {
    pub fn from_name(name: &str) -> TypeTag {
        match name {
            "Int" => TypeTag::Int,
            "Str" => TypeTag::Str,
            "Bool" => TypeTag::Bool,
            "Bag" => TypeTag::Bag,
            "Void" => TypeTag::Void,
            other => TypeTag::Class(other.to_string()),
        }
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self, TypeTag::Int | TypeTag::Str | TypeTag::Bool)
    }

    pub fn class_name(&self) -> Option<&str> {
        match self {
            TypeTag::Class(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Int => f.write_str("Int"),
            TypeTag::Str => f.write_str("Str"),
            TypeTag::Bool => f.write_str("Bool"),
            TypeTag::Bag => f.write_str("Bag"),
            TypeTag::Void => f.write_str("Void"),
            TypeTag::Class(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Internal,
}

/// Method identity: name, parameter tags and return tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<TypeTag>,
    pub ret: TypeTag,
}

impl Signature {
    /// The part of the signature that must be unique within a class.
    pub fn overload_key(&self) -> (&str, &[TypeTag]) {
        (&self.name, &self.params)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")->{}", self.ret)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub library: String,
    pub version: String,
    pub globals: Vec<GlobalDecl>,
    pub classes: Vec<ClassDecl>,
}

impl SourceUnit {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassDecl> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }
}

/// Library-level constant, referenced as `Library::NAME`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: TypeTag,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub visibility: Visibility,
    pub superclass: Option<String>,
    pub fields: Vec<FieldDecl>,
    pub constructors: Vec<ConstructorDecl>,
    pub methods: Vec<MethodDecl>,
    pub span: Span,
}

impl ClassDecl {
    pub fn method(&self, sig: &Signature) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.signature() == *sig)
    }

    pub fn method_by_key(&self, name: &str, params: &[TypeTag]) -> Option<&MethodDecl> {
        self.methods
            .iter()
            .find(|m| m.name == name && m.param_types().eq(params.iter()))
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub ty: TypeTag,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructorDecl {
    pub visibility: Visibility,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: Span,
}

impl ConstructorDecl {
    pub fn param_types(&self) -> impl Iterator<Item = &TypeTag> {
        self.params.iter().map(|p| &p.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub visibility: Visibility,
    pub name: String,
    pub params: Vec<Param>,
    pub ret: TypeTag,
    pub body: Block,
    pub span: Span,
}

impl MethodDecl {
    pub fn signature(&self) -> Signature {
        Signature {
            name: self.name.clone(),
            params: self.params.iter().map(|p| p.ty.clone()).collect(),
            ret: self.ret.clone(),
        }
    }

    pub fn param_types(&self) -> impl Iterator<Item = &TypeTag> {
        self.params.iter().map(|p| &p.ty)
    }
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Let { name: String, init: Expr },
    Assign { target: LValue, value: Expr },
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    /// Loop that runs at most `bound` iterations.
    While { cond: Expr, bound: u32, body: Block },
    Return(Option<Expr>),
    Expr(Expr),
    Require(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Field { object: Expr, field: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: Span::default(),
        }
    }

    pub fn int(v: i64) -> Self {
        Expr::new(ExprKind::Int(v))
    }

    pub fn str(v: &str) -> Self {
        Expr::new(ExprKind::Str(v.to_string()))
    }

    pub fn var(name: &str) -> Self {
        Expr::new(ExprKind::Var(name.to_string()))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self.kind,
            ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Null
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    Var(String),
    This,
    Global { library: String, name: String },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnOp, operand: Box<Expr> },
    Field { object: Box<Expr>, field: String },
    Call { receiver: Box<Expr>, method: String, args: Vec<Expr> },
    New { class: String, args: Vec<Expr> },
    BagLit(Vec<Expr>),
    BagInsert { bag: Box<Expr>, item: Box<Expr> },
    Fold { bag: Box<Expr>, init: Box<Expr>, acc: String, item: String, body: Box<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Concat => "++",
        }
    }

    /// Binding strength; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub | BinOp::Concat => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

/// Pre-order visit of every expression in a block, including nested blocks.
pub fn walk_block_exprs<'a>(block: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    for stmt in block {
        walk_stmt_exprs(stmt, f);
    }
}

pub fn walk_stmt_exprs<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    match &stmt.kind {
        StmtKind::Let { init, .. } => walk_expr(init, f),
        StmtKind::Assign { target, value } => {
            if let LValue::Field { object, .. } = target {
                walk_expr(object, f);
            }
            walk_expr(value, f);
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            walk_expr(cond, f);
            walk_block_exprs(then_block, f);
            if let Some(e) = else_block {
                walk_block_exprs(e, f);
            }
        }
        StmtKind::While { cond, body, .. } => {
            walk_expr(cond, f);
            walk_block_exprs(body, f);
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) | StmtKind::Require(e) => walk_expr(e, f),
        StmtKind::Return(None) => {}
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match &expr.kind {
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Unary { operand, .. } => walk_expr(operand, f),
        ExprKind::Field { object, .. } => walk_expr(object, f),
        ExprKind::Call { receiver, args, .. } => {
            walk_expr(receiver, f);
            args.iter().for_each(|a| walk_expr(a, f));
        }
        ExprKind::New { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::BagLit(items) => items.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::BagInsert { bag, item } => {
            walk_expr(bag, f);
            walk_expr(item, f);
        }
        ExprKind::Fold {
            bag, init, body, ..
        } => {
            walk_expr(bag, f);
            walk_expr(init, f);
            walk_expr(body, f);
        }
        _ => {}
    }
}
