//! Random well-formed programs for property tests.
//!
//! Output is syntactically valid and passes validation but is not
//! guaranteed to be well typed, so runs exercise error paths too.

use rand::seq::SliceRandom;
use rand::Rng;

use super::ast::*;

pub const GEN_LIBRARY: &str = "Gen";

struct Ctx<'r, R: Rng> {
    rng: &'r mut R,
    classes: usize,
    methods: usize,
    vars: Vec<String>,
    fresh: usize,
}

/// Generates a single-library program. Class `C0` is public and has a
/// public `m0(Int) -> Int` that can serve as an entry point.
pub fn arbitrary_unit<R: Rng>(rng: &mut R) -> SourceUnit {
    let classes = rng.gen_range(1..=3);
    let methods = rng.gen_range(1..=3);
    let mut cx = Ctx {
        rng,
        classes,
        methods,
        vars: Vec::new(),
        fresh: 0,
    };
    let globals = (0..2)
        .map(|i| GlobalDecl {
            name: format!("G{i}"),
            ty: TypeTag::Int,
            value: Expr::int(cx.rng.gen_range(-50..50)),
            span: Span::default(),
        })
        .collect();
    let classes = (0..classes).map(|i| cx.class(i)).collect();
    SourceUnit {
        library: GEN_LIBRARY.into(),
        version: "1.0".into(),
        globals,
        classes,
    }
}

fn field_types() -> [(&'static str, TypeTag); 3] {
    [("f0", TypeTag::Int), ("f1", TypeTag::Str), ("f2", TypeTag::Bag)]
}

impl<'r, R: Rng> Ctx<'r, R> {
    fn class(&mut self, i: usize) -> ClassDecl {
        let superclass = (i > 0 && self.rng.gen_bool(0.4)).then(|| format!("C{}", self.rng.gen_range(0..i)));
        let fields = if superclass.is_some() {
            vec![FieldDecl {
                name: format!("g{i}"),
                ty: TypeTag::Int,
                span: Span::default(),
            }]
        } else {
            field_types()
                .into_iter()
                .map(|(n, ty)| FieldDecl {
                    name: n.into(),
                    ty,
                    span: Span::default(),
                })
                .collect()
        };
        self.vars = vec!["p0".into()];
        let mut ctor_body = Vec::new();
        if superclass.is_none() {
            ctor_body.push(Stmt::new(StmtKind::Assign {
                target: LValue::Field {
                    object: Expr::new(ExprKind::This),
                    field: "f0".into(),
                },
                value: Expr::var("p0"),
            }));
        }
        ctor_body.extend(self.block(1, false));
        let constructors = vec![ConstructorDecl {
            visibility: Visibility::Public,
            params: vec![Param {
                name: "p0".into(),
                ty: TypeTag::Int,
            }],
            body: ctor_body,
            span: Span::default(),
        }];
        let methods = (0..self.methods)
            .map(|m| {
                self.vars = vec!["p0".into()];
                let mut body = self.block(2, true);
                body.push(Stmt::new(StmtKind::Return(Some(self.int_expr(2)))));
                MethodDecl {
                    visibility: Visibility::Public,
                    name: format!("m{m}"),
                    params: vec![Param {
                        name: "p0".into(),
                        ty: TypeTag::Int,
                    }],
                    ret: TypeTag::Int,
                    body,
                    span: Span::default(),
                }
            })
            .collect();
        ClassDecl {
            name: format!("C{i}"),
            visibility: if i == 0 { Visibility::Public } else { Visibility::Internal },
            superclass,
            fields,
            constructors,
            methods,
            span: Span::default(),
        }
    }

    fn block(&mut self, depth: u32, in_method: bool) -> Block {
        let mark = self.vars.len();
        let n = self.rng.gen_range(0..=3);
        let out = (0..n).map(|_| self.stmt(depth, in_method)).collect();
        self.vars.truncate(mark);
        out
    }

    fn stmt(&mut self, depth: u32, in_method: bool) -> Stmt {
        let choice = if depth == 0 {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..7)
        };
        let kind = match choice {
            0 => {
                let name = format!("v{}", self.fresh);
                self.fresh += 1;
                let init = self.int_expr(2);
                self.vars.push(name.clone());
                StmtKind::Let { name, init }
            }
            1 => {
                let target = if self.rng.gen_bool(0.5) {
                    LValue::Var(self.vars.choose(self.rng).cloned().unwrap_or_else(|| "p0".into()))
                } else {
                    LValue::Field {
                        object: Expr::new(ExprKind::This),
                        field: "f0".into(),
                    }
                };
                StmtKind::Assign {
                    target,
                    value: self.int_expr(2),
                }
            }
            2 => StmtKind::Expr(self.call_expr(1)),
            3 => StmtKind::If {
                cond: self.bool_expr(2),
                then_block: self.block(depth - 1, in_method),
                else_block: self.rng.gen_bool(0.5).then(|| self.block(depth - 1, in_method)),
            },
            4 => StmtKind::While {
                cond: self.bool_expr(1),
                bound: self.rng.gen_range(0..6),
                body: self.block(depth - 1, in_method),
            },
            5 => StmtKind::Require(self.bool_expr(1)),
            _ if in_method => StmtKind::Return(Some(self.int_expr(1))),
            _ => StmtKind::Return(None),
        };
        Stmt::new(kind)
    }

    fn leaf(&mut self) -> Expr {
        match self.rng.gen_range(0..5) {
            0 => Expr::int(self.rng.gen_range(-20..100)),
            1 => Expr::new(ExprKind::Global {
                library: GEN_LIBRARY.into(),
                name: format!("G{}", self.rng.gen_range(0..2)),
            }),
            2 => field(Expr::new(ExprKind::This), "f0"),
            _ => match self.vars.choose(self.rng) {
                Some(v) => Expr::var(v),
                None => Expr::int(self.rng.gen_range(0..10)),
            },
        }
    }

    fn int_expr(&mut self, depth: u32) -> Expr {
        if depth == 0 {
            return self.leaf();
        }
        match self.rng.gen_range(0..9) {
            0..=2 => self.leaf(),
            3 => {
                let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem]
                    .choose(self.rng)
                    .unwrap();
                Expr::binary(op, self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
            4 => Expr::new(ExprKind::Unary {
                op: UnOp::Neg,
                operand: Box::new(self.int_expr(depth - 1)),
            }),
            5 => self.call_expr(depth - 1),
            6 => {
                let acc = format!("a{}", self.fresh);
                let item = format!("x{}", self.fresh);
                self.fresh += 1;
                let bag = if self.rng.gen_bool(0.5) {
                    field(Expr::new(ExprKind::This), "f2")
                } else {
                    Expr::new(ExprKind::BagLit(vec![self.leaf(), self.leaf()]))
                };
                self.vars.push(acc.clone());
                self.vars.push(item.clone());
                let body = Expr::binary(BinOp::Add, Expr::var(&acc), self.int_expr(depth - 1));
                self.vars.truncate(self.vars.len() - 2);
                Expr::new(ExprKind::Fold {
                    bag: Box::new(bag),
                    init: Box::new(self.leaf()),
                    acc,
                    item,
                    body: Box::new(body),
                })
            }
            7 => {
                // Deliberately ill-typed now and then.
                field(Expr::new(ExprKind::This), if self.rng.gen_bool(0.5) { "f1" } else { "f0" })
            }
            _ if self.rng.gen_bool(0.2) => {
                // String concatenation and a bag in integer position.
                let s = Expr::binary(BinOp::Concat, Expr::str("k"), self.leaf());
                let bag = Expr::new(ExprKind::BagInsert {
                    bag: Box::new(Expr::new(ExprKind::BagLit(Vec::new()))),
                    item: Box::new(self.leaf()),
                });
                Expr::binary(BinOp::Concat, s, bag)
            }
            _ => self.leaf(),
        }
    }

    fn bool_expr(&mut self, depth: u32) -> Expr {
        match self.rng.gen_range(0..6) {
            0 if depth > 0 => {
                let op = if self.rng.gen_bool(0.5) { BinOp::And } else { BinOp::Or };
                Expr::binary(op, self.bool_expr(depth - 1), self.bool_expr(depth - 1))
            }
            1 if depth > 0 => Expr::new(ExprKind::Unary {
                op: UnOp::Not,
                operand: Box::new(self.bool_expr(depth - 1)),
            }),
            2 => Expr::new(ExprKind::Bool(self.rng.gen_bool(0.5))),
            _ => {
                let op = *[BinOp::Lt, BinOp::Gt, BinOp::Le, BinOp::Ge, BinOp::Eq, BinOp::Ne]
                    .choose(self.rng)
                    .unwrap();
                Expr::binary(op, self.int_expr(depth.min(1)), self.int_expr(depth.min(1)))
            }
        }
    }

    fn call_expr(&mut self, depth: u32) -> Expr {
        let receiver = if self.rng.gen_bool(0.7) {
            Expr::new(ExprKind::This)
        } else {
            Expr::new(ExprKind::New {
                class: format!("C{}", self.rng.gen_range(0..self.classes)),
                args: vec![self.leaf()],
            })
        };
        Expr::new(ExprKind::Call {
            receiver: Box::new(receiver),
            method: format!("m{}", self.rng.gen_range(0..self.methods)),
            args: vec![self.int_expr(depth)],
        })
    }
}

fn field(object: Expr, name: &str) -> Expr {
    Expr::new(ExprKind::Field {
        object: Box::new(object),
        field: name.into(),
    })
}
