//! Statement-sequence test cases and their execution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::ast::TypeTag;
use crate::lang::interp::{Halt, ReadSet, Trace};
use crate::lang::{snapshot_state, ExecutionOutcome, Machine, StateSnapshot, Status, Value};
use crate::resolver::{ApiRef, ResolvedProgram};

/// Where a constructed instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Random,
    Pool,
}

/// One statement; statement `i` defines variable `v{i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Statement {
    Literal {
        value: Value,
    },
    Null {
        class: String,
    },
    Construct {
        class: String,
        args: Vec<usize>,
        origin: Origin,
    },
    Call {
        receiver: usize,
        method: String,
        args: Vec<usize>,
        ret: TypeTag,
    },
}

impl Statement {
    /// Static type of the variable this statement defines.
    pub fn ty(&self) -> TypeTag {
        match self {
            Statement::Literal { value } => match value {
                Value::Int(_) => TypeTag::Int,
                Value::Str(_) => TypeTag::Str,
                Value::Bool(_) => TypeTag::Bool,
                Value::Bag(_) => TypeTag::Bag,
                Value::Null | Value::Obj(_) => TypeTag::Void,
            },
            Statement::Null { class } | Statement::Construct { class, .. } => TypeTag::Class(class.clone()),
            Statement::Call { ret, .. } => ret.clone(),
        }
    }

    pub fn uses(&self) -> Vec<usize> {
        match self {
            Statement::Literal { .. } | Statement::Null { .. } => Vec::new(),
            Statement::Construct { args, .. } => args.clone(),
            Statement::Call { receiver, args, .. } => std::iter::once(*receiver).chain(args.iter().copied()).collect(),
        }
    }

    pub(crate) fn uses_mut(&mut self) -> Vec<&mut usize> {
        match self {
            Statement::Literal { .. } | Statement::Null { .. } => Vec::new(),
            Statement::Construct { args, .. } => args.iter_mut().collect(),
            Statement::Call { receiver, args, .. } => std::iter::once(receiver).chain(args.iter_mut()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCall {
    pub api: ApiRef,
    pub receiver: usize,
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub statements: Vec<Statement>,
    pub entry: EntryCall,
    pub rng_seed: u64,
}

impl TestCase {
    /// Every variable is defined before it is used.
    pub fn is_well_formed(&self) -> bool {
        self.statements
            .iter()
            .enumerate()
            .all(|(i, s)| s.uses().iter().all(|u| *u < i))
            && std::iter::once(self.entry.receiver)
                .chain(self.entry.args.iter().copied())
                .all(|u| u < self.statements.len())
    }

    /// Share of constructed objects that came from the instance pool.
    pub fn pool_ratio(&self) -> f64 {
        let (pool, all) = self.statements.iter().fold((0, 0), |(p, a), s| match s {
            Statement::Construct { origin, .. } => (p + usize::from(*origin == Origin::Pool), a + 1),
            _ => (p, a),
        });
        if all == 0 {
            0.0
        } else {
            pool as f64 / all as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("test case serializes")
    }

    /// Runs the statements and then the entry call in a fresh machine.
    /// Coverage is recorded for the entry call only.
    pub fn execute(&self, program: &ResolvedProgram, step_limit: u64, trace: bool) -> TestRun {
        let mut m = Machine::new(program, step_limit);
        let mut vars: Vec<Value> = Vec::with_capacity(self.statements.len());
        for s in &self.statements {
            let v = match s {
                Statement::Literal { value } => Ok(value.clone()),
                Statement::Null { .. } => Ok(Value::Null),
                Statement::Construct { class, args, .. } => {
                    m.construct(class, args.iter().map(|a| vars[*a].clone()).collect())
                }
                Statement::Call {
                    receiver, method, args, ..
                } => m.call(
                    vars[*receiver].clone(),
                    method,
                    args.iter().map(|a| vars[*a].clone()).collect(),
                ),
            };
            match v {
                Ok(v) => vars.push(v),
                Err(h) => return TestRun::setup_failed(&m, h),
            }
        }
        let receiver = vars[self.entry.receiver].clone();
        let args: Vec<Value> = self.entry.args.iter().map(|a| vars[*a].clone()).collect();
        if trace {
            m.start_trace();
        }
        let outcome = m.evaluate_entry(&self.entry.api, &receiver, &args);
        let snapshot = snapshot_state(&outcome, &receiver, &args);
        TestRun {
            entered: true,
            outcome,
            snapshot,
            trace: m.take_trace(),
        }
    }
}

/// Result of executing one test case.
#[derive(Debug, Clone)]
pub struct TestRun {
    /// Whether set-up completed and the entry method was invoked.
    pub entered: bool,
    pub outcome: ExecutionOutcome,
    pub snapshot: StateSnapshot,
    pub trace: Option<Trace>,
}

impl TestRun {
    fn setup_failed(m: &Machine<'_>, h: Halt) -> TestRun {
        let (status, error) = match h {
            Halt::Error(e) => (Status::Raised, Some(e)),
            Halt::StepLimit => (Status::StepLimitExceeded, None),
        };
        TestRun {
            entered: false,
            outcome: ExecutionOutcome {
                status,
                return_value: None,
                error,
                heap_snapshot: m.heap_snapshot(),
                step_count: m.steps(),
                reads: ReadSet::default(),
            },
            snapshot: StateSnapshot::default(),
            trace: None,
        }
    }
}

/// Replayable listing with one statement per line.
impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[usize]| xs.iter().map(|x| format!("v{x}")).collect::<Vec<_>>().join(", ");
        writeln!(f, "// seed {}", self.rng_seed)?;
        for (i, s) in self.statements.iter().enumerate() {
            match s {
                Statement::Literal { value } => writeln!(f, "v{i} = {value};")?,
                Statement::Null { class } => writeln!(f, "v{i}: {class} = null;")?,
                Statement::Construct { class, args, origin } => {
                    let tag = if *origin == Origin::Pool { "  // pool" } else { "" };
                    writeln!(f, "v{i} = new {class}({});{tag}", list(args))?
                }
                Statement::Call {
                    receiver, method, args, ..
                } => writeln!(f, "v{i} = v{receiver}.{method}({});", list(args))?,
            }
        }
        write!(
            f,
            "v{}.{}({});  // entry {}",
            self.entry.receiver,
            self.entry.api.signature.name,
            list(&self.entry.args),
            self.entry.api
        )
    }
}
