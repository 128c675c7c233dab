//! Canonical formatting. `parse(pretty(u))` reproduces `u` up to spans.

use std::fmt::Write;

use super::ast::*;

pub fn pretty(unit: &SourceUnit) -> String {
    let mut out = String::new();
    let version = if unit.version.starts_with(|c: char| c.is_ascii_digit()) {
        format!("v{}", unit.version)
    } else {
        unit.version.clone()
    };
    let _ = writeln!(out, "library {} {} {{", unit.library, version);
    for g in &unit.globals {
        let _ = writeln!(out, "  const {}: {} = {};", g.name, g.ty, expr(&g.value));
    }
    for (i, class) in unit.classes.iter().enumerate() {
        if i > 0 || !unit.globals.is_empty() {
            out.push('\n');
        }
        class_decl(&mut out, class);
    }
    out.push_str("}\n");
    out
}

fn vis(v: Visibility) -> &'static str {
    match v {
        Visibility::Public => "public",
        Visibility::Internal => "internal",
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| format!("{}: {}", p.name, p.ty))
        .collect::<Vec<_>>()
        .join(", ")
}

fn class_decl(out: &mut String, class: &ClassDecl) {
    let prefix = match class.visibility {
        Visibility::Public => "",
        Visibility::Internal => "internal ",
    };
    let _ = write!(out, "  {prefix}class {}", class.name);
    if let Some(s) = &class.superclass {
        let _ = write!(out, " extends {s}");
    }
    out.push_str(" {\n");
    for f in &class.fields {
        let _ = writeln!(out, "    field {}: {};", f.name, f.ty);
    }
    for c in &class.constructors {
        let _ = write!(out, "    {} new({}) ", vis(c.visibility), params(&c.params));
        block(out, &c.body, 4);
        out.push('\n');
    }
    for m in &class.methods {
        out.push_str(&method_text(m, 4));
        out.push('\n');
    }
    out.push_str("  }\n");
}

/// Formats one method declaration at the given indent (no trailing newline).
pub fn method_text(m: &MethodDecl, indent: usize) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{}{} method {}({})",
        " ".repeat(indent),
        vis(m.visibility),
        m.name,
        params(&m.params)
    );
    if m.ret != TypeTag::Void {
        let _ = write!(out, " -> {}", m.ret);
    }
    out.push(' ');
    block(&mut out, &m.body, indent);
    out
}

fn block(out: &mut String, stmts: &[Stmt], indent: usize) {
    if stmts.is_empty() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    for s in stmts {
        stmt(out, s, indent + 2);
    }
    out.push_str(&" ".repeat(indent));
    out.push('}');
}

pub fn stmt_text(s: &Stmt) -> String {
    let mut out = String::new();
    stmt(&mut out, s, 0);
    out.trim_end().to_string()
}

fn stmt(out: &mut String, s: &Stmt, indent: usize) {
    let pad = " ".repeat(indent);
    match &s.kind {
        StmtKind::Let { name, init } => {
            let _ = writeln!(out, "{pad}let {name} = {};", expr(init));
        }
        StmtKind::Assign { target, value } => {
            let t = match target {
                LValue::Var(v) => v.clone(),
                LValue::Field { object, field } => format!("{}.{field}", postfix_operand(object)),
            };
            let _ = writeln!(out, "{pad}{t} = {};", expr(value));
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = write!(out, "{pad}if ({}) ", expr(cond));
            block(out, then_block, indent);
            if let Some(e) = else_block {
                out.push_str(" else ");
                block(out, e, indent);
            }
            out.push('\n');
        }
        StmtKind::While { cond, bound, body } => {
            let _ = write!(out, "{pad}while ({}) bound {bound} ", expr(cond));
            block(out, body, indent);
            out.push('\n');
        }
        StmtKind::Return(None) => {
            let _ = writeln!(out, "{pad}return;");
        }
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "{pad}return {};", expr(e));
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{pad}{};", expr(e));
        }
        StmtKind::Require(e) => {
            let _ = writeln!(out, "{pad}require({});", expr(e));
        }
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn list(items: &[Expr]) -> String {
    items.iter().map(expr).collect::<Vec<_>>().join(", ")
}

/// Operand of `.field` / `.method()`: atoms print bare, everything else is
/// parenthesized.
fn postfix_operand(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) if *v < 0 => format!("({})", expr(e)),
        ExprKind::Binary { .. } | ExprKind::Unary { .. } => format!("({})", expr(e)),
        _ => expr(e),
    }
}

fn unary_operand(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Binary { .. } | ExprKind::Int(_) => format!("({})", expr(e)),
        _ => expr(e),
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Str(s) => quote(s),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Null => "null".into(),
        ExprKind::Var(v) => v.clone(),
        ExprKind::This => "this".into(),
        ExprKind::Global { library, name } => format!("{library}::{name}"),
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let l = match &lhs.kind {
                ExprKind::Binary { op: lo, .. } if lo.precedence() < p => format!("({})", expr(lhs)),
                _ => expr(lhs),
            };
            let r = match &rhs.kind {
                ExprKind::Binary { op: ro, .. } if ro.precedence() <= p => format!("({})", expr(rhs)),
                _ => expr(rhs),
            };
            format!("{l} {} {r}", op.symbol())
        }
        ExprKind::Unary { op, operand } => {
            let sym = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            format!("{sym}{}", unary_operand(operand))
        }
        ExprKind::Field { object, field } => format!("{}.{field}", postfix_operand(object)),
        ExprKind::Call {
            receiver,
            method,
            args,
        } => format!("{}.{method}({})", postfix_operand(receiver), list(args)),
        ExprKind::New { class, args } => format!("new {class}({})", list(args)),
        ExprKind::BagLit(items) => format!("bag[{}]", list(items)),
        ExprKind::BagInsert { bag, item } => format!("insert({}, {})", expr(bag), expr(item)),
        ExprKind::Fold {
            bag,
            init,
            acc,
            item,
            body,
        } => format!(
            "fold({}, {}, |{acc}, {item}| {})",
            expr(bag),
            expr(init),
            expr(body)
        ),
    }
}
