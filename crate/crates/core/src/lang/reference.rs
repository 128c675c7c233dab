//! A deliberately naive second evaluator used as a test oracle for
//! [`Machine`](super::interp::Machine). It shares only the AST and value
//! types: classes, methods and globals are found by linear scans over the
//! loaded units, objects live in a hash map and scopes are nested maps.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::interp::{ErrorKind, ExecutionOutcome, HeapRecord, Input, ReadSet, RuntimeError, Status, MAX_CALL_DEPTH};
use super::value::{language_eq, Bag, ObjRef, Value};
use crate::resolver::{ApiRef, ResolvedProgram};

enum Stop {
    Err(ErrorKind, String),
    Steps,
}

type R<T> = Result<T, Stop>;

fn fail<T>(kind: ErrorKind, detail: impl Into<String>) -> R<T> {
    Err(Stop::Err(kind, detail.into()))
}

struct Obj {
    class: String,
    library: String,
    version: String,
    fields: BTreeMap<String, Value>,
}

struct Eval<'p> {
    program: &'p ResolvedProgram,
    objects: HashMap<usize, Obj>,
    next_id: usize,
    steps: u64,
    limit: u64,
    active_calls: usize,
    receiver: Option<usize>,
    reads: ReadSet,
}

struct Scope<'a> {
    this: Option<ObjRef>,
    levels: Vec<HashMap<&'a str, Value>>,
}

impl<'a> Scope<'a> {
    fn get(&self, name: &str) -> Option<&Value> {
        self.levels.iter().rev().find_map(|l| l.get(name))
    }
    fn set(&mut self, name: &str, v: Value) -> bool {
        for l in self.levels.iter_mut().rev() {
            if let Some(slot) = l.get_mut(name) {
                *slot = v;
                return true;
            }
        }
        false
    }
}

impl<'p> Eval<'p> {
    fn class(&self, name: &str) -> Option<(&'p SourceUnit, &'p ClassDecl)> {
        let origin = self.program.classpath.class_index.get(name)?;
        let unit = self
            .program
            .units
            .iter()
            .find(|u| u.library == origin.library && u.version == origin.version)?;
        let decl = unit.unit.classes.iter().find(|c| c.name == name)?;
        Some((&unit.unit, decl))
    }

    fn chain(&self, name: &str) -> Vec<&'p ClassDecl> {
        let mut out: Vec<&ClassDecl> = Vec::new();
        let mut cur = self.class(name).map(|(_, c)| c);
        while let Some(c) = cur {
            if out.iter().any(|x| x.name == c.name) {
                break;
            }
            out.push(c);
            cur = c.superclass.as_deref().and_then(|s| self.class(s)).map(|(_, c)| c);
        }
        out
    }

    fn fits(&self, ty: &TypeTag, v: &Value) -> bool {
        match (ty, v) {
            (TypeTag::Int, Value::Int(_)) => true,
            (TypeTag::Str, Value::Str(_)) => true,
            (TypeTag::Bool, Value::Bool(_)) => true,
            (TypeTag::Bag, Value::Bag(_)) => true,
            (TypeTag::Class(_), Value::Null) => true,
            (TypeTag::Class(want), Value::Obj(o)) => {
                self.class(want).is_some() && self.chain(&o.class).iter().any(|c| &c.name == want)
            }
            _ => false,
        }
    }

    fn fits_all(&self, params: &[Param], args: &[Value]) -> bool {
        params.len() == args.len() && params.iter().zip(args).all(|(p, a)| self.fits(&p.ty, a))
    }

    fn build(&mut self, input: &Input) -> R<Value> {
        match input {
            Input::Value(v) => Ok(v.clone()),
            Input::New { class, args } => {
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.build(a)?);
                }
                self.new_obj(class, vals)
            }
        }
    }

    fn new_obj(&mut self, class: &str, args: Vec<Value>) -> R<Value> {
        let Some((unit, decl)) = self.class(class) else {
            return fail(ErrorKind::NoSuchMethod, class);
        };
        let Some(ctor) = decl.constructors.iter().find(|k| self.fits_all(&k.params, &args)) else {
            return fail(ErrorKind::NoSuchMethod, class);
        };
        let mut fields = BTreeMap::new();
        for c in self.chain(class).into_iter().rev() {
            for f in &c.fields {
                fields.insert(f.name.clone(), Value::default_for(&f.ty));
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.objects.insert(
            id,
            Obj {
                class: class.to_string(),
                library: unit.library.clone(),
                version: unit.version.clone(),
                fields,
            },
        );
        let me = ObjRef {
            id,
            class: class.to_string(),
            library: unit.library.clone(),
            version: unit.version.clone(),
        };
        self.run_body(Some(me.clone()), &ctor.params, &ctor.body, args)?;
        Ok(Value::Obj(me))
    }

    fn run_body(&mut self, this: Option<ObjRef>, params: &'p [Param], body: &'p [Stmt], args: Vec<Value>) -> R<Value> {
        if self.active_calls >= MAX_CALL_DEPTH {
            return Err(Stop::Steps);
        }
        let mut top = HashMap::new();
        for (p, a) in params.iter().zip(args) {
            top.insert(p.name.as_str(), a);
        }
        let mut scope = Scope {
            this,
            levels: vec![top],
        };
        self.active_calls += 1;
        let r = self.block(&mut scope, body);
        self.active_calls -= 1;
        Ok(r?.unwrap_or(Value::Null))
    }

    fn call(&mut self, recv: Value, name: &str, args: Vec<Value>) -> R<Value> {
        let o = match recv {
            Value::Obj(o) => o,
            Value::Null => return fail(ErrorKind::NullDereference, name),
            _ => return fail(ErrorKind::TypeError, name),
        };
        let mut seen: Vec<(String, Vec<TypeTag>)> = Vec::new();
        for c in self.chain(&o.class) {
            for m in &c.methods {
                let key = (m.name.clone(), m.params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>());
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                if m.name == name && self.fits_all(&m.params, &args) {
                    return self.run_body(Some(o), &m.params, &m.body, args);
                }
            }
        }
        fail(ErrorKind::NoSuchMethod, name)
    }

    fn block(&mut self, scope: &mut Scope<'p>, body: &'p [Stmt]) -> R<Option<Value>> {
        scope.levels.push(HashMap::new());
        let mut result = Ok(None);
        for s in body {
            match self.stmt(scope, s) {
                Ok(None) => continue,
                other => {
                    result = other;
                    break;
                }
            }
        }
        scope.levels.pop();
        result
    }

    fn stmt(&mut self, scope: &mut Scope<'p>, s: &'p Stmt) -> R<Option<Value>> {
        if self.steps == self.limit {
            return Err(Stop::Steps);
        }
        self.steps += 1;
        match &s.kind {
            StmtKind::Let { name, init } => {
                let v = self.expr(scope, init)?;
                scope.levels.last_mut().expect("scope").insert(name.as_str(), v);
            }
            StmtKind::Assign {
                target: LValue::Var(name),
                value,
            } => {
                let v = self.expr(scope, value)?;
                if !scope.set(name, v) {
                    return fail(ErrorKind::TypeError, name.clone());
                }
            }
            StmtKind::Assign {
                target: LValue::Field { object, field },
                value,
            } => {
                let o = self.expr(scope, object)?;
                let id = self.obj_id(o)?;
                let v = self.expr(scope, value)?;
                let obj = self.objects.get_mut(&id).expect("live object");
                match obj.fields.get_mut(field) {
                    Some(slot) => *slot = v,
                    None => return fail(ErrorKind::TypeError, field.clone()),
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.truth(scope, cond)? {
                    return self.block(scope, then_block);
                }
                if let Some(b) = else_block {
                    return self.block(scope, b);
                }
            }
            StmtKind::While { cond, bound, body } => {
                let mut n = 0;
                loop {
                    if n >= *bound || !self.truth(scope, cond)? {
                        break;
                    }
                    n += 1;
                    if let Some(v) = self.block(scope, body)? {
                        return Ok(Some(v));
                    }
                }
            }
            StmtKind::Return(None) => return Ok(Some(Value::Null)),
            StmtKind::Return(Some(e)) => return Ok(Some(self.expr(scope, e)?)),
            StmtKind::Expr(e) => {
                self.expr(scope, e)?;
            }
            StmtKind::Require(e) => {
                if !self.truth(scope, e)? {
                    return fail(ErrorKind::RequireFailed, "");
                }
            }
        }
        Ok(None)
    }

    fn obj_id(&self, v: Value) -> R<usize> {
        match v {
            Value::Obj(o) => Ok(o.id),
            Value::Null => fail(ErrorKind::NullDereference, ""),
            _ => fail(ErrorKind::TypeError, ""),
        }
    }

    fn truth(&mut self, scope: &mut Scope<'p>, e: &'p Expr) -> R<bool> {
        match self.expr(scope, e)? {
            Value::Bool(b) => Ok(b),
            _ => fail(ErrorKind::TypeError, "condition"),
        }
    }

    fn expr(&mut self, scope: &mut Scope<'p>, e: &'p Expr) -> R<Value> {
        match &e.kind {
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::Var(n) => match scope.get(n) {
                Some(v) => Ok(v.clone()),
                None => fail(ErrorKind::TypeError, n.clone()),
            },
            ExprKind::This => match &scope.this {
                Some(o) => Ok(Value::Obj(o.clone())),
                None => fail(ErrorKind::TypeError, "this"),
            },
            ExprKind::Global { library, name } => {
                let g = self
                    .program
                    .units
                    .iter()
                    .filter(|u| &u.library == library)
                    .flat_map(|u| u.unit.globals.iter())
                    .find(|g| &g.name == name);
                let Some(g) = g else {
                    return fail(ErrorKind::TypeError, name.clone());
                };
                let v = match &g.value.kind {
                    ExprKind::Int(i) => Value::Int(*i),
                    ExprKind::Str(s) => Value::Str(s.clone()),
                    ExprKind::Bool(b) => Value::Bool(*b),
                    _ => Value::Null,
                };
                self.reads.globals.insert(format!("{library}::{name}"), v.clone());
                Ok(v)
            }
            ExprKind::Unary { op: UnOp::Not, operand } => Ok(Value::Bool(!self.truth(scope, operand)?)),
            ExprKind::Unary { op: UnOp::Neg, operand } => match self.expr(scope, operand)? {
                Value::Int(i) => Ok(Value::Int(0i64.wrapping_sub(i))),
                _ => fail(ErrorKind::TypeError, "neg"),
            },
            ExprKind::Binary { op: BinOp::And, lhs, rhs } => {
                Ok(Value::Bool(self.truth(scope, lhs)? && self.truth(scope, rhs)?))
            }
            ExprKind::Binary { op: BinOp::Or, lhs, rhs } => {
                Ok(Value::Bool(self.truth(scope, lhs)? || self.truth(scope, rhs)?))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.expr(scope, lhs)?;
                let b = self.expr(scope, rhs)?;
                binary(*op, a, b)
            }
            ExprKind::Field { object, field } => {
                let o = self.expr(scope, object)?;
                let id = self.obj_id(o)?;
                if self.receiver == Some(id) {
                    self.reads.receiver_fields.insert(field.clone());
                }
                match self.objects[&id].fields.get(field) {
                    Some(v) => Ok(v.clone()),
                    None => fail(ErrorKind::TypeError, field.clone()),
                }
            }
            ExprKind::Call { receiver, method, args } => {
                let r = self.expr(scope, receiver)?;
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.expr(scope, a)?);
                }
                self.call(r, method, vals)
            }
            ExprKind::New { class, args } => {
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.expr(scope, a)?);
                }
                self.new_obj(class, vals)
            }
            ExprKind::BagLit(items) => {
                let mut vals = Vec::new();
                for a in items {
                    vals.push(self.expr(scope, a)?);
                }
                Ok(Value::Bag(Bag { items: vals }))
            }
            ExprKind::BagInsert { bag, item } => {
                let b = self.expr(scope, bag)?;
                let x = self.expr(scope, item)?;
                match b {
                    Value::Bag(b) => {
                        let mut items = b.items;
                        items.push(x);
                        Ok(Value::Bag(Bag { items }))
                    }
                    _ => fail(ErrorKind::TypeError, "insert"),
                }
            }
            ExprKind::Fold {
                bag,
                init,
                acc,
                item,
                body,
            } => {
                let b = self.expr(scope, bag)?;
                let mut a = self.expr(scope, init)?;
                let Value::Bag(b) = b else {
                    return fail(ErrorKind::TypeError, "fold");
                };
                for x in b.items {
                    let mut level = HashMap::new();
                    level.insert(acc.as_str(), a);
                    // `|x, x|` binds the item, matching push order.
                    level.insert(item.as_str(), x);
                    scope.levels.push(level);
                    let r = self.expr(scope, body);
                    scope.levels.pop();
                    a = r?;
                }
                Ok(a)
            }
        }
    }

    fn entry(&mut self, entry: &ApiRef, recv: Value, args: Vec<Value>) -> R<Value> {
        let o = match recv {
            Value::Obj(o) => o,
            Value::Null => return fail(ErrorKind::NullDereference, "receiver"),
            _ => return fail(ErrorKind::TypeError, "receiver"),
        };
        for c in self.chain(&o.class) {
            if let Some(m) = c.methods.iter().find(|m| m.signature() == entry.signature) {
                if !self.fits_all(&m.params, &args) {
                    break;
                }
                return self.run_body(Some(o), &m.params, &m.body, args);
            }
        }
        fail(ErrorKind::NoSuchMethod, entry.signature.to_string())
    }
}

fn text(v: &Value) -> Option<String> {
    match v {
        Value::Int(i) => Some(format!("{i}")),
        Value::Str(s) => Some(s.clone()),
        Value::Bool(b) => Some(format!("{b}")),
        _ => None,
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> R<Value> {
    use BinOp::*;
    match op {
        Eq => return Ok(Value::Bool(language_eq(&a, &b))),
        Ne => return Ok(Value::Bool(!language_eq(&a, &b))),
        Concat => {
            return match (text(&a), text(&b)) {
                (Some(x), Some(y)) => Ok(Value::Str(format!("{x}{y}"))),
                _ => fail(ErrorKind::TypeError, "++"),
            }
        }
        _ => {}
    }
    let (Value::Int(x), Value::Int(y)) = (a, b) else {
        return fail(ErrorKind::TypeError, op.symbol());
    };
    Ok(match op {
        Lt => Value::Bool(x < y),
        Gt => Value::Bool(x > y),
        Le => Value::Bool(x <= y),
        Ge => Value::Bool(x >= y),
        Add => Value::Int(x.wrapping_add(y)),
        Sub => Value::Int(x.wrapping_sub(y)),
        Mul => Value::Int(x.wrapping_mul(y)),
        Div | Rem if y == 0 => return fail(ErrorKind::DivisionByZero, op.symbol()),
        Div => Value::Int(x.wrapping_div(y)),
        Rem => Value::Int(x.wrapping_rem(y)),
        _ => unreachable!(),
    })
}

/// Reference counterpart of [`evaluate_entry`](super::interp::evaluate_entry).
/// Error locations are not tracked.
pub fn reference_evaluate(
    program: &ResolvedProgram,
    entry: &ApiRef,
    receiver: &Input,
    args: &[Input],
    step_limit: u64,
) -> ExecutionOutcome {
    let mut ev = Eval {
        program,
        objects: HashMap::new(),
        next_id: 0,
        steps: 0,
        limit: step_limit,
        active_calls: 0,
        receiver: None,
        reads: ReadSet::default(),
    };
    let mut built = ev.build(receiver).map(|r| (r, Vec::new()));
    for a in args {
        built = built.and_then(|(r, mut v)| {
            v.push(ev.build(a)?);
            Ok((r, v))
        });
    }
    if built.is_err() {
        ev.reads = ReadSet::default();
    }
    let result = built.and_then(|(r, a)| {
        ev.receiver = r.as_obj().map(|o| o.id);
        ev.reads = ReadSet::default();
        ev.entry(entry, r, a)
    });
    let (status, return_value, error) = match result {
        Ok(v) => (Status::Returned, Some(v), None),
        Err(Stop::Steps) => (Status::StepLimitExceeded, None, None),
        Err(Stop::Err(kind, detail)) => (
            Status::Raised,
            None,
            Some(RuntimeError {
                kind,
                location: None,
                detail,
            }),
        ),
    };
    let mut ids: Vec<_> = ev.objects.keys().copied().collect();
    ids.sort_unstable();
    let heap_snapshot = ids
        .into_iter()
        .map(|id| {
            let o = ev.objects.remove(&id).expect("listed id");
            (
                id,
                HeapRecord {
                    class: o.class,
                    library: o.library,
                    version: o.version,
                    fields: o.fields,
                },
            )
        })
        .collect();
    ExecutionOutcome {
        status,
        return_value,
        error,
        heap_snapshot,
        step_count: ev.steps,
        reads: ev.reads,
    }
}
