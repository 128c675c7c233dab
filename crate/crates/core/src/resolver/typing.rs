//! Best-effort static types, used for call-site resolution. `None` means
//! the type is unknown and callers must over-approximate.

use std::collections::BTreeMap;

use super::link::{ClassId, ResolvedProgram};
use crate::lang::ast::*;

pub type TypeEnv = BTreeMap<String, TypeTag>;

pub fn infer(
    program: &ResolvedProgram,
    this_class: Option<ClassId>,
    env: &TypeEnv,
    expr: &Expr,
) -> Option<TypeTag> {
    match &expr.kind {
        ExprKind::Int(_) => Some(TypeTag::Int),
        ExprKind::Str(_) => Some(TypeTag::Str),
        ExprKind::Bool(_) => Some(TypeTag::Bool),
        ExprKind::Null => None,
        ExprKind::Var(v) => env.get(v).cloned(),
        ExprKind::This => this_class.map(|c| TypeTag::Class(program.class_name(c).to_string())),
        ExprKind::Global { library, name } => program.global(library, name).map(|g| g.ty.clone()),
        ExprKind::Binary { op, .. } => Some(match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => TypeTag::Int,
            BinOp::Concat => TypeTag::Str,
            _ => TypeTag::Bool,
        }),
        ExprKind::Unary { op, .. } => Some(match op {
            UnOp::Not => TypeTag::Bool,
            UnOp::Neg => TypeTag::Int,
        }),
        ExprKind::Field { object, field } => {
            let class = static_class(program, this_class, env, object)?;
            program.field_type(class, field)
        }
        ExprKind::Call {
            receiver,
            method,
            args,
        } => {
            let class = static_class(program, this_class, env, receiver)?;
            let cands = program.dispatch_candidates(class, method, args.len());
            let first = cands.first()?;
            let ret = program.method_decl(*first).ret.clone();
            cands
                .iter()
                .all(|h| program.method_decl(*h).ret == ret)
                .then_some(ret)
        }
        ExprKind::New { class, .. } => Some(TypeTag::Class(class.clone())),
        ExprKind::BagLit(_) | ExprKind::BagInsert { .. } => Some(TypeTag::Bag),
        ExprKind::Fold { init, .. } => infer(program, this_class, env, init),
    }
}

pub fn static_class(
    program: &ResolvedProgram,
    this_class: Option<ClassId>,
    env: &TypeEnv,
    expr: &Expr,
) -> Option<ClassId> {
    match infer(program, this_class, env, expr)? {
        TypeTag::Class(name) => program.class_id(&name),
        _ => None,
    }
}

/// Visits every expression of a body in evaluation order together with the
/// typing environment in effect at that point.
pub fn walk_typed<'a>(
    program: &ResolvedProgram,
    this_class: Option<ClassId>,
    params: &[Param],
    body: &'a [Stmt],
    visit: &mut dyn FnMut(&'a Expr, &TypeEnv),
) {
    let mut env: TypeEnv = params
        .iter()
        .map(|p| (p.name.clone(), p.ty.clone()))
        .collect();
    walk_block(program, this_class, &mut env, body, visit);
}

fn walk_block<'a>(
    program: &ResolvedProgram,
    this_class: Option<ClassId>,
    env: &mut TypeEnv,
    body: &'a [Stmt],
    visit: &mut dyn FnMut(&'a Expr, &TypeEnv),
) {
    let saved = env.clone();
    for stmt in body {
        let ex = |e: &'a Expr, env: &TypeEnv, visit: &mut dyn FnMut(&'a Expr, &TypeEnv)| {
            walk_expr_env(program, this_class, env, e, visit)
        };
        match &stmt.kind {
            StmtKind::Let { name, init } => {
                ex(init, env, visit);
                match infer(program, this_class, env, init) {
                    Some(t) => {
                        env.insert(name.clone(), t);
                    }
                    None => {
                        env.remove(name);
                    }
                }
            }
            StmtKind::Assign { target, value } => {
                if let LValue::Field { object, .. } = target {
                    ex(object, env, visit);
                }
                ex(value, env, visit);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                ex(cond, env, visit);
                walk_block(program, this_class, env, then_block, visit);
                if let Some(b) = else_block {
                    walk_block(program, this_class, env, b, visit);
                }
            }
            StmtKind::While { cond, body, .. } => {
                ex(cond, env, visit);
                walk_block(program, this_class, env, body, visit);
            }
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) | StmtKind::Require(e) => {
                ex(e, env, visit)
            }
            StmtKind::Return(None) => {}
        }
    }
    *env = saved;
}

fn walk_expr_env<'a>(
    program: &ResolvedProgram,
    this_class: Option<ClassId>,
    env: &TypeEnv,
    expr: &'a Expr,
    visit: &mut dyn FnMut(&'a Expr, &TypeEnv),
) {
    visit(expr, env);
    let rec = |e: &'a Expr, visit: &mut dyn FnMut(&'a Expr, &TypeEnv)| {
        walk_expr_env(program, this_class, env, e, visit)
    };
    match &expr.kind {
        ExprKind::Binary { lhs, rhs, .. } => {
            rec(lhs, visit);
            rec(rhs, visit);
        }
        ExprKind::Unary { operand, .. } => rec(operand, visit),
        ExprKind::Field { object, .. } => rec(object, visit),
        ExprKind::Call { receiver, args, .. } => {
            rec(receiver, visit);
            for a in args {
                rec(a, visit);
            }
        }
        ExprKind::New { args, .. } | ExprKind::BagLit(args) => {
            for a in args {
                rec(a, visit);
            }
        }
        ExprKind::BagInsert { bag, item } => {
            rec(bag, visit);
            rec(item, visit);
        }
        ExprKind::Fold {
            bag,
            init,
            acc,
            item,
            body,
        } => {
            rec(bag, visit);
            rec(init, visit);
            let mut inner = env.clone();
            match infer(program, this_class, env, init) {
                Some(t) => {
                    inner.insert(acc.clone(), t);
                }
                None => {
                    inner.remove(acc);
                }
            }
            inner.remove(item);
            walk_expr_env(program, this_class, &inner, body, visit);
        }
        _ => {}
    }
}
