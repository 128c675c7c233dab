//! Deterministic tree-walking interpreter over a linked program.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::value::{language_eq, Bag, ObjRef, Value};
use crate::resolver::{ApiRef, Callable, ClassId, CtorHandle, MethodHandle, ResolvedProgram};

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;
/// Calls nested deeper than this end the run as step-limit-exceeded.
pub const MAX_CALL_DEPTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    RequireFailed,
    DivisionByZero,
    NullDereference,
    NoSuchMethod,
    /// Operand of the wrong kind, unbound variable or unknown field.
    TypeError,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::RequireFailed => "require-failed",
            ErrorKind::DivisionByZero => "division-by-zero",
            ErrorKind::NullDereference => "null-dereference",
            ErrorKind::NoSuchMethod => "no-such-method",
            ErrorKind::TypeError => "type-error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub library: String,
    pub class: String,
    pub member: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}::{} {}:{}",
            self.library, self.class, self.member, self.line, self.col
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub location: Option<Location>,
    pub detail: String,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(l) = &self.location {
            write!(f, " at {l}")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Returned,
    Raised,
    StepLimitExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeapRecord {
    pub class: String,
    pub library: String,
    pub version: String,
    pub fields: BTreeMap<String, Value>,
}

/// State the entry method read without defining it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadSet {
    pub receiver_fields: BTreeSet<String>,
    pub globals: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: Status,
    pub return_value: Option<Value>,
    pub error: Option<RuntimeError>,
    pub heap_snapshot: BTreeMap<usize, HeapRecord>,
    pub step_count: u64,
    pub reads: ReadSet,
}

impl ExecutionOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outcome serializes")
    }
}

/// Why evaluation stopped early.
#[derive(Debug, Clone, PartialEq)]
pub enum Halt {
    Error(RuntimeError),
    StepLimit,
}

impl fmt::Display for Halt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Halt::Error(e) => write!(f, "{e}"),
            Halt::StepLimit => f.write_str("step limit exceeded"),
        }
    }
}

/// Argument description that can be materialized in any interpreter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Input {
    Value(Value),
    New { class: String, args: Vec<Input> },
}

/// Location of a branch predicate inside a callable body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredSite {
    pub callable: Callable,
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredStat {
    pub hit_true: bool,
    pub hit_false: bool,
    /// Smallest raw distance to making the predicate true.
    pub best_true: f64,
    pub best_false: f64,
}

/// Coverage record used by search fitness.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub entered: HashSet<Callable>,
    pub preds: HashMap<PredSite, PredStat>,
}

/// Evaluated predicate with raw branch distances (0 on the taken side).
#[derive(Debug, Clone, Copy)]
struct Pred {
    value: bool,
    to_true: f64,
    to_false: f64,
}

impl Pred {
    fn of(b: bool) -> Pred {
        Pred {
            value: b,
            to_true: if b { 0.0 } else { 1.0 },
            to_false: if b { 1.0 } else { 0.0 },
        }
    }
}

enum Flow {
    Next,
    Return(Value),
}

struct Frame {
    this: Option<ObjRef>,
    callable: Callable,
    vars: Vec<(String, Value)>,
}

/// One isolated interpreter instance with its own heap.
pub struct Machine<'p> {
    program: &'p ResolvedProgram,
    heap: Vec<HeapRecord>,
    steps: u64,
    step_limit: u64,
    depth: usize,
    receiver: Option<usize>,
    reads: ReadSet,
    trace: Option<Trace>,
}

type Exec<T> = Result<T, Halt>;

impl<'p> Machine<'p> {
    pub fn new(program: &'p ResolvedProgram, step_limit: u64) -> Self {
        Machine {
            program,
            heap: Vec::new(),
            steps: 0,
            step_limit,
            depth: 0,
            receiver: None,
            reads: ReadSet::default(),
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Trace::default());
        self
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.trace.as_ref()
    }

    /// Starts recording coverage from this point on, discarding any earlier
    /// record.
    pub fn start_trace(&mut self) {
        self.trace = Some(Trace::default());
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    pub fn program(&self) -> &'p ResolvedProgram {
        self.program
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn heap_snapshot(&self) -> BTreeMap<usize, HeapRecord> {
        self.heap.iter().cloned().enumerate().collect()
    }

    pub fn field(&self, obj: &ObjRef, name: &str) -> Option<&Value> {
        self.heap.get(obj.id)?.fields.get(name)
    }

    fn err(&self, kind: ErrorKind, fr: Option<&Frame>, span: Span, detail: impl Into<String>) -> Halt {
        let location = fr.map(|fr| {
            let class = fr.callable.class();
            let member = match fr.callable {
                Callable::Method(h) => self.program.method_decl(h).name.clone(),
                Callable::Ctor(_) => "new".to_string(),
            };
            Location {
                library: self.program.class_unit(class).library.clone(),
                class: self.program.class_name(class).to_string(),
                member,
                line: span.line,
                col: span.col,
            }
        });
        Halt::Error(RuntimeError {
            kind,
            location,
            detail: detail.into(),
        })
    }

    pub fn accepts(&self, tag: &TypeTag, v: &Value) -> bool {
        match (tag, v) {
            (TypeTag::Int, Value::Int(_))
            | (TypeTag::Str, Value::Str(_))
            | (TypeTag::Bool, Value::Bool(_))
            | (TypeTag::Bag, Value::Bag(_))
            | (TypeTag::Class(_), Value::Null) => true,
            (TypeTag::Class(c), Value::Obj(o)) => {
                match (self.program.class_id(&o.class), self.program.class_id(c)) {
                    (Some(sub), Some(sup)) => self.program.is_subclass(sub, sup),
                    _ => false,
                }
            }
            _ => false,
        }
    }

    /// Builds input descriptions bottom-up.
    pub fn materialize(&mut self, input: &Input) -> Exec<Value> {
        match input {
            Input::Value(v) => Ok(v.clone()),
            Input::New { class, args } => {
                let args = args
                    .iter()
                    .map(|a| self.materialize(a))
                    .collect::<Exec<Vec<_>>>()?;
                self.construct(class, args)
            }
        }
    }

    pub fn construct(&mut self, class: &str, args: Vec<Value>) -> Exec<Value> {
        self.new_object(None, Span::default(), class, args)
    }

    /// Calls `name` on `receiver` with dynamic dispatch.
    pub fn call(&mut self, receiver: Value, name: &str, args: Vec<Value>) -> Exec<Value> {
        self.dispatch(None, Span::default(), receiver, name, args)
    }

    /// Runs an entry method, recording the state it reads.
    pub fn evaluate_entry(&mut self, entry: &ApiRef, receiver: &Value, args: &[Value]) -> ExecutionOutcome {
        self.reads = ReadSet::default();
        self.receiver = receiver.as_obj().map(|o| o.id);
        let result = self.invoke_signature(entry, receiver, args);
        self.receiver = None;
        let (status, return_value, error) = match result {
            Ok(v) => (Status::Returned, Some(v), None),
            Err(Halt::Error(e)) => (Status::Raised, None, Some(e)),
            Err(Halt::StepLimit) => (Status::StepLimitExceeded, None, None),
        };
        ExecutionOutcome {
            status,
            return_value,
            error,
            heap_snapshot: self.heap_snapshot(),
            step_count: self.steps,
            reads: std::mem::take(&mut self.reads),
        }
    }

    fn invoke_signature(&mut self, entry: &ApiRef, receiver: &Value, args: &[Value]) -> Exec<Value> {
        let obj = match receiver {
            Value::Obj(o) => o.clone(),
            Value::Null => {
                return Err(self.err(ErrorKind::NullDereference, None, Span::default(), "null receiver"))
            }
            v => {
                return Err(self.err(
                    ErrorKind::TypeError,
                    None,
                    Span::default(),
                    format!("receiver is {}", v.type_name()),
                ))
            }
        };
        let target = self
            .program
            .class_id(&obj.class)
            .and_then(|c| self.program.lookup_signature(c, &entry.signature))
            .filter(|h| {
                let m = self.program.method_decl(*h);
                m.params.len() == args.len() && m.param_types().zip(args).all(|(t, v)| self.accepts(t, v))
            });
        let Some(h) = target else {
            return Err(self.err(
                ErrorKind::NoSuchMethod,
                None,
                Span::default(),
                format!("{} on {}", entry.signature, obj.class),
            ));
        };
        self.invoke(Callable::Method(h), Some(obj), args.to_vec())
    }

    fn invoke(&mut self, callable: Callable, this: Option<ObjRef>, args: Vec<Value>) -> Exec<Value> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::StepLimit);
        }
        if let Some(t) = &mut self.trace {
            t.entered.insert(callable);
        }
        let program = self.program;
        let (params, body) = program.callable_body(callable);
        let mut fr = Frame {
            this,
            callable,
            vars: params.iter().map(|p| p.name.clone()).zip(args).collect(),
        };
        self.depth += 1;
        let flow = self.exec_block(&mut fr, body);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Value::Null),
        }
    }

    fn exec_block(&mut self, fr: &mut Frame, block: &[Stmt]) -> Exec<Flow> {
        let mark = fr.vars.len();
        let mut out = Ok(Flow::Next);
        for s in block {
            match self.exec(fr, s) {
                Ok(Flow::Next) => {}
                other => {
                    out = other;
                    break;
                }
            }
        }
        fr.vars.truncate(mark);
        out
    }

    fn tick(&mut self) -> Exec<()> {
        if self.steps >= self.step_limit {
            return Err(Halt::StepLimit);
        }
        self.steps += 1;
        Ok(())
    }

    fn exec(&mut self, fr: &mut Frame, s: &Stmt) -> Exec<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::Let { name, init } => {
                let v = self.eval(fr, init)?;
                fr.vars.push((name.clone(), v));
            }
            StmtKind::Assign { target, value } => match target {
                LValue::Var(name) => {
                    let v = self.eval(fr, value)?;
                    match fr.vars.iter_mut().rev().find(|(n, _)| n == name) {
                        Some(slot) => slot.1 = v,
                        None => {
                            return Err(self.err(
                                ErrorKind::TypeError,
                                Some(fr),
                                s.span,
                                format!("unbound variable `{name}`"),
                            ))
                        }
                    }
                }
                LValue::Field { object, field } => {
                    let o = self.eval(fr, object)?;
                    let obj = self.expect_obj(fr, object.span, o)?;
                    let v = self.eval(fr, value)?;
                    match self.heap[obj.id].fields.get_mut(field) {
                        Some(slot) => *slot = v,
                        None => {
                            return Err(self.err(
                                ErrorKind::TypeError,
                                Some(fr),
                                s.span,
                                format!("no field `{field}` on {}", obj.class),
                            ))
                        }
                    }
                }
            },
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.cond(fr, cond)? {
                    return self.exec_block(fr, then_block);
                } else if let Some(b) = else_block {
                    return self.exec_block(fr, b);
                }
            }
            StmtKind::While { cond, bound, body } => {
                let mut iterations = 0u32;
                while iterations < *bound && self.cond(fr, cond)? {
                    iterations += 1;
                    if let Flow::Return(v) = self.exec_block(fr, body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(fr, e)?,
                    None => Value::Null,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Expr(e) => {
                self.eval(fr, e)?;
            }
            StmtKind::Require(e) => {
                if !self.cond(fr, e)? {
                    return Err(self.err(
                        ErrorKind::RequireFailed,
                        Some(fr),
                        s.span,
                        super::pretty::expr(e),
                    ));
                }
            }
        }
        Ok(Flow::Next)
    }

    fn cond(&mut self, fr: &mut Frame, e: &Expr) -> Exec<bool> {
        let p = self.pred(fr, e)?;
        if let Some(t) = &mut self.trace {
            let site = PredSite {
                callable: fr.callable,
                offset: e.span.start,
            };
            let st = t.preds.entry(site).or_insert(PredStat {
                hit_true: false,
                hit_false: false,
                best_true: f64::INFINITY,
                best_false: f64::INFINITY,
            });
            st.hit_true |= p.value;
            st.hit_false |= !p.value;
            st.best_true = st.best_true.min(p.to_true);
            st.best_false = st.best_false.min(p.to_false);
        }
        Ok(p.value)
    }

    /// Evaluates a Bool-valued expression along with branch distances.
    fn pred(&mut self, fr: &mut Frame, e: &Expr) -> Exec<Pred> {
        match &e.kind {
            ExprKind::Unary { op: UnOp::Not, operand } => {
                let p = self.pred(fr, operand)?;
                Ok(Pred {
                    value: !p.value,
                    to_true: p.to_false,
                    to_false: p.to_true,
                })
            }
            ExprKind::Binary {
                op: BinOp::And,
                lhs,
                rhs,
            } => {
                let l = self.pred(fr, lhs)?;
                if !l.value {
                    return Ok(Pred {
                        value: false,
                        to_true: l.to_true + 1.0,
                        to_false: 0.0,
                    });
                }
                let r = self.pred(fr, rhs)?;
                Ok(Pred {
                    value: r.value,
                    to_true: r.to_true,
                    to_false: l.to_false.min(r.to_false),
                })
            }
            ExprKind::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
            } => {
                let l = self.pred(fr, lhs)?;
                if l.value {
                    return Ok(Pred {
                        value: true,
                        to_true: 0.0,
                        to_false: l.to_false + 1.0,
                    });
                }
                let r = self.pred(fr, rhs)?;
                Ok(Pred {
                    value: r.value,
                    to_true: l.to_true.min(r.to_true),
                    to_false: r.to_false,
                })
            }
            ExprKind::Binary { op, lhs, rhs } if op.is_comparison() => {
                let l = self.eval(fr, lhs)?;
                let r = self.eval(fr, rhs)?;
                compare(*op, &l, &r).ok_or_else(|| {
                    self.err(
                        ErrorKind::TypeError,
                        Some(fr),
                        e.span,
                        format!("cannot compare {} {} {}", l.type_name(), op.symbol(), r.type_name()),
                    )
                })
            }
            _ => match self.eval(fr, e)? {
                Value::Bool(b) => Ok(Pred::of(b)),
                v => Err(self.err(
                    ErrorKind::TypeError,
                    Some(fr),
                    e.span,
                    format!("expected Bool, found {}", v.type_name()),
                )),
            },
        }
    }

    fn expect_obj(&self, fr: &Frame, span: Span, v: Value) -> Exec<ObjRef> {
        match v {
            Value::Obj(o) => Ok(o),
            Value::Null => Err(self.err(ErrorKind::NullDereference, Some(fr), span, "null")),
            v => Err(self.err(
                ErrorKind::TypeError,
                Some(fr),
                span,
                format!("expected object, found {}", v.type_name()),
            )),
        }
    }

    fn eval(&mut self, fr: &mut Frame, e: &Expr) -> Exec<Value> {
        Ok(match &e.kind {
            ExprKind::Int(v) => Value::Int(*v),
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Null => Value::Null,
            ExprKind::Var(name) => match fr.vars.iter().rev().find(|(n, _)| n == name) {
                Some((_, v)) => v.clone(),
                None => {
                    return Err(self.err(
                        ErrorKind::TypeError,
                        Some(fr),
                        e.span,
                        format!("unbound variable `{name}`"),
                    ))
                }
            },
            ExprKind::This => match &fr.this {
                Some(o) => Value::Obj(o.clone()),
                None => return Err(self.err(ErrorKind::TypeError, Some(fr), e.span, "no receiver")),
            },
            ExprKind::Global { library, name } => {
                let Some(g) = self.program.global(library, name) else {
                    return Err(self.err(
                        ErrorKind::TypeError,
                        Some(fr),
                        e.span,
                        format!("unknown constant `{library}::{name}`"),
                    ));
                };
                let v = literal_value(&g.value);
                self.reads.globals.insert(format!("{library}::{name}"), v.clone());
                v
            }
            ExprKind::Binary { op, lhs, rhs } => match op {
                BinOp::And | BinOp::Or | BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
                    Value::Bool(self.pred(fr, e)?.value)
                }
                _ => {
                    let l = self.eval(fr, lhs)?;
                    let r = self.eval(fr, rhs)?;
                    match arith(*op, &l, &r) {
                        Ok(v) => v,
                        Err(kind) => {
                            return Err(self.err(
                                kind,
                                Some(fr),
                                e.span,
                                format!("{} {} {}", l.type_name(), op.symbol(), r.type_name()),
                            ))
                        }
                    }
                }
            },
            ExprKind::Unary { op, operand } => match op {
                UnOp::Not => Value::Bool(self.pred(fr, e)?.value),
                UnOp::Neg => match self.eval(fr, operand)? {
                    Value::Int(i) => Value::Int(i.wrapping_neg()),
                    v => {
                        return Err(self.err(
                            ErrorKind::TypeError,
                            Some(fr),
                            e.span,
                            format!("cannot negate {}", v.type_name()),
                        ))
                    }
                },
            },
            ExprKind::Field { object, field } => {
                let o = self.eval(fr, object)?;
                let obj = self.expect_obj(fr, object.span, o)?;
                if self.receiver == Some(obj.id) {
                    self.reads.receiver_fields.insert(field.clone());
                }
                match self.heap[obj.id].fields.get(field) {
                    Some(v) => v.clone(),
                    None => {
                        return Err(self.err(
                            ErrorKind::TypeError,
                            Some(fr),
                            e.span,
                            format!("no field `{field}` on {}", obj.class),
                        ))
                    }
                }
            }
            ExprKind::Call {
                receiver,
                method,
                args,
            } => {
                let recv = self.eval(fr, receiver)?;
                let args = self.eval_list(fr, args)?;
                return self.dispatch(Some(fr), e.span, recv, method, args);
            }
            ExprKind::New { class, args } => {
                let args = self.eval_list(fr, args)?;
                return self.new_object(Some(fr), e.span, class, args);
            }
            ExprKind::BagLit(items) => Value::Bag(Bag {
                items: self.eval_list(fr, items)?,
            }),
            ExprKind::BagInsert { bag, item } => {
                let b = self.eval(fr, bag)?;
                let item = self.eval(fr, item)?;
                match b {
                    Value::Bag(mut b) => {
                        b.items.push(item);
                        Value::Bag(b)
                    }
                    v => {
                        return Err(self.err(
                            ErrorKind::TypeError,
                            Some(fr),
                            e.span,
                            format!("insert into {}", v.type_name()),
                        ))
                    }
                }
            }
            ExprKind::Fold {
                bag,
                init,
                acc,
                item,
                body,
            } => {
                let b = self.eval(fr, bag)?;
                let mut a = self.eval(fr, init)?;
                let Value::Bag(b) = b else {
                    return Err(self.err(
                        ErrorKind::TypeError,
                        Some(fr),
                        e.span,
                        format!("fold over {}", b.type_name()),
                    ));
                };
                for x in b.items {
                    let mark = fr.vars.len();
                    fr.vars.push((acc.clone(), a));
                    fr.vars.push((item.clone(), x));
                    let r = self.eval(fr, body);
                    fr.vars.truncate(mark);
                    a = r?;
                }
                a
            }
        })
    }

    fn eval_list(&mut self, fr: &mut Frame, items: &[Expr]) -> Exec<Vec<Value>> {
        items.iter().map(|a| self.eval(fr, a)).collect()
    }

    fn dispatch(
        &mut self,
        fr: Option<&Frame>,
        span: Span,
        recv: Value,
        name: &str,
        args: Vec<Value>,
    ) -> Exec<Value> {
        let obj = match recv {
            Value::Obj(o) => o,
            Value::Null => {
                return Err(self.err(
                    ErrorKind::NullDereference,
                    fr,
                    span,
                    format!("call `{name}` on null"),
                ))
            }
            v => {
                return Err(self.err(
                    ErrorKind::TypeError,
                    fr,
                    span,
                    format!("call `{name}` on {}", v.type_name()),
                ))
            }
        };
        let class = self.program.class_id(&obj.class).expect("heap class is loaded");
        let target = self
            .program
            .dispatch_candidates(class, name, args.len())
            .iter()
            .copied()
            .find(|h| {
                self.program
                    .method_decl(*h)
                    .param_types()
                    .zip(&args)
                    .all(|(t, v)| self.accepts(t, v))
            });
        match target {
            Some(h) => self.invoke(Callable::Method(h), Some(obj), args),
            None => Err(self.err(
                ErrorKind::NoSuchMethod,
                fr,
                span,
                format!("{}.{name}/{}", obj.class, args.len()),
            )),
        }
    }

    fn select_ctor(&self, class: ClassId, args: &[Value]) -> Option<CtorHandle> {
        self.program.ctors(class).find(|h| {
            let k = self.program.ctor_decl(*h);
            k.params.len() == args.len() && k.param_types().zip(args).all(|(t, v)| self.accepts(t, v))
        })
    }

    fn new_object(&mut self, fr: Option<&Frame>, span: Span, class: &str, args: Vec<Value>) -> Exec<Value> {
        let Some(id) = self.program.class_id(class) else {
            return Err(self.err(ErrorKind::NoSuchMethod, fr, span, format!("unknown class `{class}`")));
        };
        let Some(ctor) = self.select_ctor(id, &args) else {
            return Err(self.err(
                ErrorKind::NoSuchMethod,
                fr,
                span,
                format!("no constructor {class}/{}", args.len()),
            ));
        };
        let unit = self.program.class_unit(id);
        let fields = self
            .program
            .all_fields(id)
            .into_iter()
            .map(|f| (f.name.clone(), Value::default_for(&f.ty)))
            .collect();
        let obj = ObjRef {
            id: self.heap.len(),
            class: class.to_string(),
            library: unit.library.clone(),
            version: unit.version.clone(),
        };
        self.heap.push(HeapRecord {
            class: class.to_string(),
            library: unit.library.clone(),
            version: unit.version.clone(),
            fields,
        });
        self.invoke(Callable::Ctor(ctor), Some(obj.clone()), args)?;
        Ok(Value::Obj(obj))
    }
}

pub(crate) fn literal_value(e: &Expr) -> Value {
    match &e.kind {
        ExprKind::Int(v) => Value::Int(*v),
        ExprKind::Str(s) => Value::Str(s.clone()),
        ExprKind::Bool(b) => Value::Bool(*b),
        _ => Value::Null,
    }
}

/// Levenshtein distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Comparison with branch distances; `None` on ill-typed ordering.
fn compare(op: BinOp, l: &Value, r: &Value) -> Option<Pred> {
    const K: f64 = 1.0;
    match op {
        BinOp::Eq | BinOp::Ne => {
            let eq = language_eq(l, r);
            let gap = match (l, r) {
                (Value::Int(a), Value::Int(b)) => ((*a as i128) - (*b as i128)).unsigned_abs() as f64,
                (Value::Str(a), Value::Str(b)) => edit_distance(a, b) as f64,
                _ => {
                    if eq {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            let (to_eq, to_ne) = if eq { (0.0, K) } else { (gap, 0.0) };
            Some(if op == BinOp::Eq {
                Pred {
                    value: eq,
                    to_true: to_eq,
                    to_false: to_ne,
                }
            } else {
                Pred {
                    value: !eq,
                    to_true: to_ne,
                    to_false: to_eq,
                }
            })
        }
        _ => {
            let (Value::Int(a), Value::Int(b)) = (l, r) else {
                return None;
            };
            let (a, b) = (*a as f64, *b as f64);
            let pos = |x: f64| x.max(0.0);
            Some(match op {
                BinOp::Lt => Pred {
                    value: a < b,
                    to_true: pos(a - b + K),
                    to_false: pos(b - a),
                },
                BinOp::Gt => Pred {
                    value: a > b,
                    to_true: pos(b - a + K),
                    to_false: pos(a - b),
                },
                BinOp::Le => Pred {
                    value: a <= b,
                    to_true: pos(a - b),
                    to_false: pos(b - a + K),
                },
                BinOp::Ge => Pred {
                    value: a >= b,
                    to_true: pos(b - a),
                    to_false: pos(a - b + K),
                },
                _ => unreachable!("comparison operator"),
            })
        }
    }
}

/// Arithmetic and concatenation. Integers wrap.
pub(crate) fn arith(op: BinOp, l: &Value, r: &Value) -> Result<Value, ErrorKind> {
    if op == BinOp::Concat {
        return match (concat_text(l), concat_text(r)) {
            (Some(a), Some(b)) => Ok(Value::Str(a + &b)),
            _ => Err(ErrorKind::TypeError),
        };
    }
    let (Value::Int(a), Value::Int(b)) = (l, r) else {
        return Err(ErrorKind::TypeError);
    };
    Ok(Value::Int(match op {
        BinOp::Add => a.wrapping_add(*b),
        BinOp::Sub => a.wrapping_sub(*b),
        BinOp::Mul => a.wrapping_mul(*b),
        BinOp::Div if *b == 0 => return Err(ErrorKind::DivisionByZero),
        BinOp::Div => a.wrapping_div(*b),
        BinOp::Rem if *b == 0 => return Err(ErrorKind::DivisionByZero),
        BinOp::Rem => a.wrapping_rem(*b),
        _ => return Err(ErrorKind::TypeError),
    }))
}

pub(crate) fn concat_text(v: &Value) -> Option<String> {
    match v {
        Value::Int(i) => Some(i.to_string()),
        Value::Str(s) => Some(s.clone()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Materializes `receiver` and `args` in a fresh machine and runs `entry`.
/// A failure while building the inputs is reported as a raised outcome.
pub fn evaluate_entry(
    program: &ResolvedProgram,
    entry: &ApiRef,
    receiver: &Input,
    args: &[Input],
    step_limit: u64,
) -> ExecutionOutcome {
    let mut m = Machine::new(program, step_limit);
    let built = m.materialize(receiver).and_then(|r| {
        let a = args.iter().map(|a| m.materialize(a)).collect::<Exec<Vec<_>>>()?;
        Ok((r, a))
    });
    match built {
        Ok((r, a)) => m.evaluate_entry(entry, &r, &a),
        Err(h) => ExecutionOutcome {
            status: match h {
                Halt::StepLimit => Status::StepLimitExceeded,
                Halt::Error(_) => Status::Raised,
            },
            return_value: None,
            error: match h {
                Halt::Error(e) => Some(e),
                Halt::StepLimit => None,
            },
            heap_snapshot: m.heap_snapshot(),
            step_count: m.steps(),
            reads: ReadSet::default(),
        },
    }
}

/// Entry method handle lookup shared by callers that start from an `ApiRef`.
pub fn entry_handle(program: &ResolvedProgram, entry: &ApiRef) -> Option<MethodHandle> {
    program.find_api(entry)
}
