//! Mutation operators over library source units.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lang::ast::*;
use crate::lang::pretty::expr as expr_text;
use crate::lang::{parse, pretty};

use super::CorpusError;

/// Value returned by postcondition-weakened methods.
pub const DEGRADED: i64 = -999_999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationOperator {
    ConstantChange,
    BranchAdd,
    BranchDelete,
    PreconditionStrengthen,
    PostconditionWeaken,
    BagOrderShuffle,
    LocalRename,
    StatementReorder,
    ExtractMethod,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 9] = [
        MutationOperator::ConstantChange,
        MutationOperator::BranchAdd,
        MutationOperator::BranchDelete,
        MutationOperator::PreconditionStrengthen,
        MutationOperator::PostconditionWeaken,
        MutationOperator::BagOrderShuffle,
        MutationOperator::LocalRename,
        MutationOperator::StatementReorder,
        MutationOperator::ExtractMethod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationOperator::ConstantChange => "constant-change",
            MutationOperator::BranchAdd => "branch-add",
            MutationOperator::BranchDelete => "branch-delete",
            MutationOperator::PreconditionStrengthen => "precondition-strengthen",
            MutationOperator::PostconditionWeaken => "postcondition-weaken",
            MutationOperator::BagOrderShuffle => "bag-order-shuffle",
            MutationOperator::LocalRename => "local-rename",
            MutationOperator::StatementReorder => "statement-reorder",
            MutationOperator::ExtractMethod => "extract-method",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name)
    }

    /// Changes observable behaviour. Bag reordering counts as changing even
    /// though it is labeled benign by default.
    pub fn is_semantic_changing(self) -> bool {
        !matches!(
            self,
            MutationOperator::LocalRename | MutationOperator::StatementReorder | MutationOperator::ExtractMethod
        )
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationTrace {
    pub operator: MutationOperator,
    pub library: String,
    pub class: String,
    pub method: Signature,
    pub from_version: String,
    pub to_version: String,
    pub detail: String,
}

/// Applies `op` to one method of `unit`, producing the next version.
pub fn apply_mutation<R: Rng + ?Sized>(
    unit: &SourceUnit,
    op: MutationOperator,
    rng: &mut R,
) -> Result<(SourceUnit, MutationTrace), CorpusError> {
    let mut sites: Vec<(usize, usize)> = unit
        .classes
        .iter()
        .enumerate()
        .flat_map(|(c, k)| (0..k.methods.len()).map(move |m| (c, m)))
        .collect();
    sites.shuffle(rng);
    for (ci, mi) in sites {
        let class = &unit.classes[ci];
        let Some(edit) = mutate_method(op, class, &class.methods[mi], rng) else {
            continue;
        };
        let mut out = unit.clone();
        out.version = bump(&unit.version);
        let k = &mut out.classes[ci];
        let sig = k.methods[mi].signature();
        k.methods[mi] = edit.method;
        k.methods.extend(edit.helper);
        // Reparse so inserted nodes carry real spans.
        let out = parse(&pretty(&out)).map_err(|e| CorpusError::Validation(format!("mutated unit: {e}")))?;
        let trace = MutationTrace {
            operator: op,
            library: unit.library.clone(),
            class: class.name.clone(),
            method: sig,
            from_version: unit.version.clone(),
            to_version: out.version.clone(),
            detail: edit.detail,
        };
        return Ok((out, trace));
    }
    Err(CorpusError::NotApplicable(op.name().to_string()))
}

/// Next major version: "1.0" becomes "2.0".
pub fn bump(version: &str) -> String {
    let mut parts = version.split('.');
    match parts.next().and_then(|p| p.parse::<u64>().ok()) {
        Some(major) => {
            let rest: Vec<&str> = parts.map(|_| "0").collect();
            std::iter::once((major + 1).to_string())
                .chain(rest.iter().map(|s| s.to_string()))
                .collect::<Vec<_>>()
                .join(".")
        }
        None => format!("{version}.1"),
    }
}

struct Edit {
    method: MethodDecl,
    helper: Option<MethodDecl>,
    detail: String,
}

fn mutate_method<R: Rng + ?Sized>(
    op: MutationOperator,
    class: &ClassDecl,
    m: &MethodDecl,
    rng: &mut R,
) -> Option<Edit> {
    let mut out = m.clone();
    let simple = |out: MethodDecl, detail: String| {
        Some(Edit {
            method: out,
            helper: None,
            detail,
        })
    };
    match op {
        MutationOperator::ConstantChange => {
            let mut n = 0;
            for_each_int(&mut out.body, &mut |_, in_cmp| n += usize::from(!in_cmp));
            if n == 0 {
                return None;
            }
            let pick = rng.gen_range(0..n);
            let mut seen = 0;
            let mut detail = String::new();
            for_each_int(&mut out.body, &mut |v, in_cmp| {
                if in_cmp {
                    return;
                }
                if seen == pick {
                    detail = format!("{} -> {}", *v, *v + 1);
                    *v += 1;
                }
                seen += 1;
            });
            simple(out, detail)
        }
        MutationOperator::BranchAdd => {
            let p = int_param(m)?;
            if m.ret != TypeTag::Int {
                return None;
            }
            let t = rng.gen_range(0..=400);
            let cond = Expr::binary(BinOp::Gt, Expr::var(&p), Expr::int(t));
            out.body.insert(
                0,
                Stmt::new(StmtKind::If {
                    cond,
                    then_block: vec![Stmt::new(StmtKind::Return(Some(Expr::var(&p))))],
                    else_block: None,
                }),
            );
            simple(out, format!("if ({p} > {t}) {{ return {p}; }}"))
        }
        MutationOperator::BranchDelete => {
            let ifs: Vec<usize> = (0..out.body.len())
                .filter(|i| matches!(out.body[*i].kind, StmtKind::If { .. }) && !returns_inside(&out.body[*i..=*i]))
                .collect();
            let i = *ifs.choose(rng)?;
            let removed = out.body.remove(i);
            simple(out, format!("removed `{}`", crate::lang::pretty::stmt_text(&removed)))
        }
        MutationOperator::PreconditionStrengthen => {
            let p = int_param(m)?;
            let k = rng.gen_range(100..=400);
            out.body.insert(
                0,
                Stmt::new(StmtKind::Require(Expr::binary(BinOp::Lt, Expr::var(&p), Expr::int(k)))),
            );
            simple(out, format!("require({p} < {k})"))
        }
        MutationOperator::PostconditionWeaken => {
            if m.ret != TypeTag::Int {
                return None;
            }
            let last = out.body.iter_mut().rev().find(|s| matches!(s.kind, StmtKind::Return(Some(_))))?;
            let StmtKind::Return(Some(e)) = &mut last.kind else {
                unreachable!()
            };
            if e.kind == ExprKind::Int(DEGRADED) {
                return None;
            }
            let detail = format!("return {} -> return {DEGRADED}", expr_text(e));
            *e = Expr::int(DEGRADED);
            simple(out, detail)
        }
        MutationOperator::BagOrderShuffle => {
            let mut done = None;
            for_each_expr(&mut out.body, &mut |e| {
                if done.is_some() {
                    return;
                }
                if let ExprKind::BagLit(items) = &mut e.kind {
                    let texts: Vec<String> = items.iter().map(expr_text).collect();
                    if texts.iter().collect::<BTreeSet<_>>().len() >= 2 {
                        items.rotate_left(1);
                        done = Some(format!("bag[{}] -> bag[{}]", texts.join(", "), {
                            let mut t = texts.clone();
                            t.rotate_left(1);
                            t.join(", ")
                        }));
                    }
                }
            });
            simple(out, done?)
        }
        MutationOperator::LocalRename => {
            let params: BTreeSet<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
            let mut binders = BTreeSet::new();
            let mut lets = Vec::new();
            collect_names(&m.body, &mut lets, &mut binders);
            let names: Vec<String> = lets
                .into_iter()
                .filter(|n| !params.contains(n.as_str()) && !binders.contains(n))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let old = names.choose(rng)?.clone();
            let mut idents = BTreeSet::new();
            collect_idents(&m.body, &mut idents);
            let fresh = (1..)
                .map(|i| format!("{old}{i}"))
                .find(|n| !idents.contains(n) && !params.contains(n.as_str()))
                .expect("unbounded");
            rename(&mut out.body, &old, &fresh);
            simple(out, format!("{old} -> {fresh}"))
        }
        MutationOperator::StatementReorder => {
            let pairs: Vec<usize> = (0..out.body.len().saturating_sub(1))
                .filter(|i| independent(&out.body[*i], &out.body[*i + 1]))
                .collect();
            let i = *pairs.choose(rng)?;
            out.body.swap(i, i + 1);
            simple(out, format!("swapped statements {} and {}", i + 1, i + 2))
        }
        MutationOperator::ExtractMethod => extract(class, m),
    }
}

fn int_param(m: &MethodDecl) -> Option<String> {
    m.params.iter().find(|p| p.ty == TypeTag::Int).map(|p| p.name.clone())
}

fn returns_inside(block: &[Stmt]) -> bool {
    block.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If {
            then_block,
            else_block,
            ..
        } => returns_inside(then_block) || else_block.as_deref().is_some_and(returns_inside),
        StmtKind::While { body, .. } => returns_inside(body),
        _ => false,
    })
}

fn for_each_int(block: &mut [Stmt], f: &mut dyn FnMut(&mut i64, bool)) {
    fn go(e: &mut Expr, in_cmp: bool, f: &mut dyn FnMut(&mut i64, bool)) {
        match &mut e.kind {
            ExprKind::Int(v) => f(v, in_cmp),
            ExprKind::Binary { op, lhs, rhs } => {
                let c = in_cmp || op.is_comparison();
                go(lhs, c, f);
                go(rhs, c, f);
            }
            _ => each_child(e, &mut |c| go(c, in_cmp, f)),
        }
    }
    each_block_expr(block, &mut |e| go(e, false, f));
}

/// Pre-order over every expression.
fn for_each_expr(block: &mut [Stmt], f: &mut dyn FnMut(&mut Expr)) {
    fn go(e: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
        f(e);
        each_child(e, &mut |c| go(c, f));
    }
    each_block_expr(block, &mut |e| go(e, f));
}

fn each_child(e: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    match &mut e.kind {
        ExprKind::Binary { lhs, rhs, .. } => {
            f(lhs);
            f(rhs);
        }
        ExprKind::Unary { operand, .. } => f(operand),
        ExprKind::Field { object, .. } => f(object),
        ExprKind::Call { receiver, args, .. } => {
            f(receiver);
            args.iter_mut().for_each(f);
        }
        ExprKind::New { args, .. } | ExprKind::BagLit(args) => args.iter_mut().for_each(f),
        ExprKind::BagInsert { bag, item } => {
            f(bag);
            f(item);
        }
        ExprKind::Fold { bag, init, body, .. } => {
            f(bag);
            f(init);
            f(body);
        }
        _ => {}
    }
}

/// Top-level expressions of every statement, nested blocks included.
fn each_block_expr(block: &mut [Stmt], f: &mut dyn FnMut(&mut Expr)) {
    for s in block {
        match &mut s.kind {
            StmtKind::Let { init, .. } => f(init),
            StmtKind::Assign { target, value } => {
                if let LValue::Field { object, .. } = target {
                    f(object);
                }
                f(value);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                f(cond);
                each_block_expr(then_block, f);
                if let Some(b) = else_block {
                    each_block_expr(b, f);
                }
            }
            StmtKind::While { cond, body, .. } => {
                f(cond);
                each_block_expr(body, f);
            }
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) | StmtKind::Require(e) => f(e),
            StmtKind::Return(None) => {}
        }
    }
}

fn collect_names(block: &[Stmt], lets: &mut Vec<String>, binders: &mut BTreeSet<String>) {
    for s in block {
        match &s.kind {
            StmtKind::Let { name, .. } => lets.push(name.clone()),
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                collect_names(then_block, lets, binders);
                if let Some(b) = else_block {
                    collect_names(b, lets, binders);
                }
            }
            StmtKind::While { body, .. } => collect_names(body, lets, binders),
            _ => {}
        }
        walk_stmt_exprs(s, &mut |e| {
            if let ExprKind::Fold { acc, item, .. } = &e.kind {
                binders.insert(acc.clone());
                binders.insert(item.clone());
            }
        });
    }
}

fn collect_idents(block: &[Stmt], out: &mut BTreeSet<String>) {
    let mut lets = Vec::new();
    let mut binders = BTreeSet::new();
    collect_names(block, &mut lets, &mut binders);
    out.extend(lets);
    out.extend(binders);
    walk_block_exprs(block, &mut |e| {
        if let ExprKind::Var(v) = &e.kind {
            out.insert(v.clone());
        }
    });
}

fn rename(block: &mut [Stmt], old: &str, new: &str) {
    for s in block.iter_mut() {
        match &mut s.kind {
            StmtKind::Let { name, .. } if name == old => *name = new.to_string(),
            StmtKind::Assign {
                target: LValue::Var(name),
                ..
            } if name == old => *name = new.to_string(),
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                rename(then_block, old, new);
                if let Some(b) = else_block {
                    rename(b, old, new);
                }
            }
            StmtKind::While { body, .. } => rename(body, old, new),
            _ => {}
        }
    }
    for_each_expr(block, &mut |e| {
        if let ExprKind::Var(v) = &mut e.kind {
            if v == old {
                *v = new.to_string();
            }
        }
    });
}

/// Variables read by a statement list, nested blocks included.
fn reads(block: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut binders = BTreeSet::new();
    walk_block_exprs(block, &mut |e| match &e.kind {
        ExprKind::Var(v) => {
            out.insert(v.clone());
        }
        ExprKind::Fold { acc, item, .. } => {
            binders.insert(acc.clone());
            binders.insert(item.clone());
        }
        _ => {}
    });
    out.retain(|v| !binders.contains(v));
    out
}

fn assigned(block: &[Stmt], out: &mut BTreeSet<String>) {
    for s in block {
        match &s.kind {
            StmtKind::Assign {
                target: LValue::Var(v),
                ..
            } => {
                out.insert(v.clone());
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                assigned(then_block, out);
                if let Some(b) = else_block {
                    assigned(b, out);
                }
            }
            StmtKind::While { body, .. } => assigned(body, out),
            _ => {}
        }
    }
}

fn impure(e: &Expr) -> bool {
    let mut found = false;
    walk_expr(e, &mut |x| {
        found |= matches!(x.kind, ExprKind::Call { .. } | ExprKind::New { .. });
    });
    found
}

/// Two adjacent `let`s that neither read each other nor have effects.
fn independent(a: &Stmt, b: &Stmt) -> bool {
    let (
        StmtKind::Let { name: na, init: ia },
        StmtKind::Let { name: nb, init: ib },
    ) = (&a.kind, &b.kind)
    else {
        return false;
    };
    na != nb
        && !impure(ia)
        && !impure(ib)
        && !reads(std::slice::from_ref(b)).contains(na)
        && !reads(std::slice::from_ref(a)).contains(nb)
}

/// Local type inference sufficient for helper signatures.
fn infer(e: &Expr, env: &BTreeMap<String, TypeTag>, class: &ClassDecl) -> Option<TypeTag> {
    match &e.kind {
        ExprKind::Int(_) => Some(TypeTag::Int),
        ExprKind::Str(_) => Some(TypeTag::Str),
        ExprKind::Bool(_) => Some(TypeTag::Bool),
        ExprKind::Var(v) => env.get(v).cloned(),
        ExprKind::Field { object, field } if object.kind == ExprKind::This => {
            class.field(field).map(|f| f.ty.clone())
        }
        ExprKind::Binary { op, .. } if op.is_comparison() || matches!(op, BinOp::And | BinOp::Or) => {
            Some(TypeTag::Bool)
        }
        ExprKind::Binary { op: BinOp::Concat, .. } => Some(TypeTag::Str),
        ExprKind::Binary { .. } => Some(TypeTag::Int),
        ExprKind::Unary { op: UnOp::Not, .. } => Some(TypeTag::Bool),
        ExprKind::Unary { op: UnOp::Neg, .. } => Some(TypeTag::Int),
        ExprKind::BagLit(_) | ExprKind::BagInsert { .. } => Some(TypeTag::Bag),
        ExprKind::New { class, .. } => Some(TypeTag::Class(class.clone())),
        ExprKind::Fold { init, .. } => infer(init, env, class),
        _ => None,
    }
}

/// Moves the longest extractable run of top-level statements into a new
/// internal method returning the single value the rest of the body uses.
fn extract(class: &ClassDecl, m: &MethodDecl) -> Option<Edit> {
    let body = &m.body;
    let n = body.len();
    let mut env: Vec<BTreeMap<String, TypeTag>> = Vec::with_capacity(n + 1);
    let mut cur: BTreeMap<String, TypeTag> = m.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
    env.push(cur.clone());
    for s in body {
        if let StmtKind::Let { name, init } = &s.kind {
            match infer(init, &cur, class) {
                Some(t) => {
                    cur.insert(name.clone(), t);
                }
                None => {
                    cur.remove(name);
                }
            }
        }
        env.push(cur.clone());
    }
    for len in (2..n).rev() {
        for i in 0..=n - len {
            let window = &body[i..i + len];
            let rest = &body[i + len..];
            if rest.is_empty() || returns_inside(window) {
                continue;
            }
            let defined: BTreeSet<String> = window
                .iter()
                .filter_map(|s| match &s.kind {
                    StmtKind::Let { name, .. } => Some(name.clone()),
                    _ => None,
                })
                .collect();
            let mut written = BTreeSet::new();
            assigned(window, &mut written);
            if !written.is_subset(&defined) {
                continue;
            }
            let mut after = reads(rest);
            assigned(rest, &mut after);
            let outputs: Vec<&String> = defined.iter().filter(|d| after.contains(*d)).collect();
            let [out] = outputs.as_slice() else { continue };
            let inputs: Vec<String> = reads(window).into_iter().filter(|v| !defined.contains(v)).collect();
            let types: Option<Vec<TypeTag>> = inputs.iter().map(|v| env[i].get(v).cloned()).collect();
            let Some(types) = types else { continue };
            let Some(out_ty) = env[i + len].get(*out).cloned() else {
                continue;
            };
            let taken: BTreeSet<&str> = class.methods.iter().map(|x| x.name.as_str()).collect();
            let name = (1..)
                .map(|k| format!("{}Part{k}", m.name))
                .find(|c| !taken.contains(c.as_str()))
                .expect("unbounded");
            let mut hbody = window.to_vec();
            hbody.push(Stmt::new(StmtKind::Return(Some(Expr::var(out)))));
            let helper = MethodDecl {
                visibility: Visibility::Internal,
                name: name.clone(),
                params: inputs
                    .iter()
                    .zip(types)
                    .map(|(v, ty)| Param { name: v.clone(), ty })
                    .collect(),
                ret: out_ty,
                body: hbody,
                span: Span::default(),
            };
            let call = Expr::new(ExprKind::Call {
                receiver: Box::new(Expr::new(ExprKind::This)),
                method: name.clone(),
                args: inputs.iter().map(|v| Expr::var(v)).collect(),
            });
            let mut method = m.clone();
            method.body.splice(
                i..i + len,
                [Stmt::new(StmtKind::Let {
                    name: (*out).clone(),
                    init: call,
                })],
            );
            return Some(Edit {
                method,
                helper: Some(helper),
                detail: format!("extracted statements {}..{} into {name}", i + 1, i + len),
            });
        }
    }
    None
}
