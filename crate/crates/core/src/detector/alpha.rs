//! Span-free, alpha-renamed method bodies for structural comparison.
//! Parameters become `p0, p1, ...` and local bindings `l0, l1, ...` in
//! binding order, so renaming a local is not a difference.

use crate::lang::ast::*;
use crate::lang::normalize;

struct Renamer {
    scopes: Vec<(String, String)>,
    next: usize,
}

impl Renamer {
    fn bind(&mut self, name: &str) -> String {
        let fresh = format!("l{}", self.next);
        self.next += 1;
        self.scopes.push((name.to_string(), fresh.clone()));
        fresh
    }

    fn lookup(&self, name: &str) -> String {
        self.scopes
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f.clone())
            .unwrap_or_else(|| name.to_string())
    }

    fn block(&mut self, b: &mut Block) {
        let mark = self.scopes.len();
        for s in b.iter_mut() {
            self.stmt(s);
        }
        self.scopes.truncate(mark);
    }

    fn stmt(&mut self, s: &mut Stmt) {
        match &mut s.kind {
            StmtKind::Let { name, init } => {
                self.expr(init);
                *name = self.bind(name);
            }
            StmtKind::Assign { target, value } => {
                match target {
                    LValue::Var(v) => *v = self.lookup(v),
                    LValue::Field { object, .. } => self.expr(object),
                }
                self.expr(value);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond);
                self.block(then_block);
                if let Some(b) = else_block {
                    self.block(b);
                }
            }
            StmtKind::While { cond, body, .. } => {
                self.expr(cond);
                self.block(body);
            }
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) | StmtKind::Require(e) => self.expr(e),
            StmtKind::Return(None) => {}
        }
    }

    fn expr(&mut self, e: &mut Expr) {
        match &mut e.kind {
            ExprKind::Var(v) => *v = self.lookup(v),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            ExprKind::Unary { operand, .. } => self.expr(operand),
            ExprKind::Field { object, .. } => self.expr(object),
            ExprKind::Call { receiver, args, .. } => {
                self.expr(receiver);
                args.iter_mut().for_each(|a| self.expr(a));
            }
            ExprKind::New { args, .. } | ExprKind::BagLit(args) => args.iter_mut().for_each(|a| self.expr(a)),
            ExprKind::BagInsert { bag, item } => {
                self.expr(bag);
                self.expr(item);
            }
            ExprKind::Fold {
                bag,
                init,
                acc,
                item,
                body,
            } => {
                self.expr(bag);
                self.expr(init);
                let mark = self.scopes.len();
                *acc = self.bind(acc);
                *item = self.bind(item);
                self.expr(body);
                self.scopes.truncate(mark);
            }
            _ => {}
        }
    }
}

/// Normalized, alpha-renamed copy of a callable's parameters and body.
pub fn canonical_body(params: &[Param], body: &[Stmt]) -> (Vec<Param>, Block) {
    let mut r = Renamer {
        scopes: Vec::new(),
        next: 0,
    };
    let params: Vec<Param> = params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let fresh = format!("p{i}");
            r.scopes.push((p.name.clone(), fresh.clone()));
            Param {
                name: fresh,
                ty: p.ty.clone(),
            }
        })
        .collect();
    let mut body = normalize(&body.to_vec());
    r.block(&mut body);
    (params, body)
}
