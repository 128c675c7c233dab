//! Layout normalization: drops source spans, keeping every semantic token.

use super::ast::*;

pub trait Normalize {
    fn normalize(&self) -> Self;
}

impl Normalize for Expr {
    fn normalize(&self) -> Self {
        let kind = match &self.kind {
            ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
                op: *op,
                lhs: Box::new(lhs.normalize()),
                rhs: Box::new(rhs.normalize()),
            },
            ExprKind::Unary { op, operand } => ExprKind::Unary {
                op: *op,
                operand: Box::new(operand.normalize()),
            },
            ExprKind::Field { object, field } => ExprKind::Field {
                object: Box::new(object.normalize()),
                field: field.clone(),
            },
            ExprKind::Call {
                receiver,
                method,
                args,
            } => ExprKind::Call {
                receiver: Box::new(receiver.normalize()),
                method: method.clone(),
                args: args.iter().map(Normalize::normalize).collect(),
            },
            ExprKind::New { class, args } => ExprKind::New {
                class: class.clone(),
                args: args.iter().map(Normalize::normalize).collect(),
            },
            ExprKind::BagLit(items) => {
                ExprKind::BagLit(items.iter().map(Normalize::normalize).collect())
            }
            ExprKind::BagInsert { bag, item } => ExprKind::BagInsert {
                bag: Box::new(bag.normalize()),
                item: Box::new(item.normalize()),
            },
            ExprKind::Fold {
                bag,
                init,
                acc,
                item,
                body,
            } => ExprKind::Fold {
                bag: Box::new(bag.normalize()),
                init: Box::new(init.normalize()),
                acc: acc.clone(),
                item: item.clone(),
                body: Box::new(body.normalize()),
            },
            other => other.clone(),
        };
        Expr {
            kind,
            span: Span::default(),
        }
    }
}

impl Normalize for Stmt {
    fn normalize(&self) -> Self {
        let kind = match &self.kind {
            StmtKind::Let { name, init } => StmtKind::Let {
                name: name.clone(),
                init: init.normalize(),
            },
            StmtKind::Assign { target, value } => StmtKind::Assign {
                target: match target {
                    LValue::Var(v) => LValue::Var(v.clone()),
                    LValue::Field { object, field } => LValue::Field {
                        object: object.normalize(),
                        field: field.clone(),
                    },
                },
                value: value.normalize(),
            },
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => StmtKind::If {
                cond: cond.normalize(),
                then_block: then_block.normalize(),
                else_block: else_block.as_ref().map(|b| b.normalize()),
            },
            StmtKind::While { cond, bound, body } => StmtKind::While {
                cond: cond.normalize(),
                bound: *bound,
                body: body.normalize(),
            },
            StmtKind::Return(e) => StmtKind::Return(e.as_ref().map(Normalize::normalize)),
            StmtKind::Expr(e) => StmtKind::Expr(e.normalize()),
            StmtKind::Require(e) => StmtKind::Require(e.normalize()),
        };
        Stmt {
            kind,
            span: Span::default(),
        }
    }
}

impl Normalize for Block {
    fn normalize(&self) -> Self {
        self.iter().map(Normalize::normalize).collect()
    }
}

impl Normalize for MethodDecl {
    fn normalize(&self) -> Self {
        MethodDecl {
            visibility: self.visibility,
            name: self.name.clone(),
            params: self.params.clone(),
            ret: self.ret.clone(),
            body: self.body.normalize(),
            span: Span::default(),
        }
    }
}

impl Normalize for ConstructorDecl {
    fn normalize(&self) -> Self {
        ConstructorDecl {
            visibility: self.visibility,
            params: self.params.clone(),
            body: self.body.normalize(),
            span: Span::default(),
        }
    }
}

impl Normalize for ClassDecl {
    fn normalize(&self) -> Self {
        ClassDecl {
            name: self.name.clone(),
            visibility: self.visibility,
            superclass: self.superclass.clone(),
            fields: self
                .fields
                .iter()
                .map(|f| FieldDecl {
                    span: Span::default(),
                    ..f.clone()
                })
                .collect(),
            constructors: self.constructors.iter().map(Normalize::normalize).collect(),
            methods: self.methods.iter().map(Normalize::normalize).collect(),
            span: Span::default(),
        }
    }
}

impl Normalize for SourceUnit {
    fn normalize(&self) -> Self {
        SourceUnit {
            library: self.library.clone(),
            version: self.version.clone(),
            globals: self
                .globals
                .iter()
                .map(|g| GlobalDecl {
                    name: g.name.clone(),
                    ty: g.ty.clone(),
                    value: g.value.normalize(),
                    span: Span::default(),
                })
                .collect(),
            classes: self.classes.iter().map(Normalize::normalize).collect(),
        }
    }
}

/// Free-function form of [`Normalize::normalize`].
pub fn normalize<T: Normalize>(ast: &T) -> T {
    ast.normalize()
}
