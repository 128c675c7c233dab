//! Post-run state captured for differential comparison.
//!
//! Heap identities are dropped: two runs agree when their reachable
//! object graphs have the same shape and contents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::interp::{ExecutionOutcome, HeapRecord};
use super::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "t", content = "v")]
pub enum SnapValue {
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    Bag(Vec<SnapValue>),
    Obj {
        class: String,
        fields: BTreeMap<String, SnapValue>,
    },
    /// Points at the ancestor `n` levels up the current path.
    BackRef(usize),
}

impl SnapValue {
    /// Same value with every bag sorted, for order-insensitive comparison.
    pub fn canonical(&self) -> SnapValue {
        match self {
            SnapValue::Bag(items) => {
                let mut items: Vec<_> = items.iter().map(SnapValue::canonical).collect();
                items.sort();
                SnapValue::Bag(items)
            }
            SnapValue::Obj { class, fields } => SnapValue::Obj {
                class: class.clone(),
                fields: fields.iter().map(|(k, v)| (k.clone(), v.canonical())).collect(),
            },
            v => v.clone(),
        }
    }
}

impl std::fmt::Display for SnapValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SnapValue::Int(i) => write!(f, "{i}"),
            SnapValue::Str(s) => write!(f, "{s:?}"),
            SnapValue::Bool(b) => write!(f, "{b}"),
            SnapValue::Null => f.write_str("null"),
            SnapValue::Bag(items) => {
                f.write_str("bag[")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            SnapValue::Obj { class, fields } => {
                write!(f, "{class}{{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
            SnapValue::BackRef(n) => write!(f, "^{n}"),
        }
    }
}

/// Three-part snapshot: object arguments, external state read, return value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub params: BTreeMap<String, SnapValue>,
    /// `this.<field>` for receiver fields and `Lib::NAME` for constants.
    pub externals: BTreeMap<String, SnapValue>,
    pub ret: Option<SnapValue>,
}

impl StateSnapshot {
    pub fn canonical(&self) -> StateSnapshot {
        let c = |m: &BTreeMap<String, SnapValue>| m.iter().map(|(k, v)| (k.clone(), v.canonical())).collect();
        StateSnapshot {
            params: c(&self.params),
            externals: c(&self.externals),
            ret: self.ret.as_ref().map(SnapValue::canonical),
        }
    }

    /// Names of the entries that differ between two snapshots.
    pub fn differences(&self, other: &StateSnapshot) -> Vec<String> {
        let mut out = Vec::new();
        let mut diff_map = |prefix: &str, a: &BTreeMap<String, SnapValue>, b: &BTreeMap<String, SnapValue>| {
            let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
            for k in keys {
                if a.get(k) != b.get(k) {
                    out.push(format!("{prefix}{k}"));
                }
            }
        };
        diff_map("param:", &self.params, &other.params);
        diff_map("", &self.externals, &other.externals);
        if self.ret != other.ret {
            out.push("return".to_string());
        }
        out
    }
}

/// Converts a runtime value into its identity-free form.
pub fn snap_value(heap: &BTreeMap<usize, HeapRecord>, v: &Value) -> SnapValue {
    fn go(heap: &BTreeMap<usize, HeapRecord>, v: &Value, path: &mut Vec<usize>) -> SnapValue {
        match v {
            Value::Int(i) => SnapValue::Int(*i),
            Value::Str(s) => SnapValue::Str(s.clone()),
            Value::Bool(b) => SnapValue::Bool(*b),
            Value::Null => SnapValue::Null,
            Value::Bag(b) => SnapValue::Bag(b.items.iter().map(|x| go(heap, x, path)).collect()),
            Value::Obj(o) => {
                if let Some(pos) = path.iter().rposition(|id| *id == o.id) {
                    return SnapValue::BackRef(path.len() - pos);
                }
                let Some(rec) = heap.get(&o.id) else {
                    return SnapValue::Obj {
                        class: o.class.clone(),
                        fields: BTreeMap::new(),
                    };
                };
                path.push(o.id);
                let fields = rec.fields.iter().map(|(k, x)| (k.clone(), go(heap, x, path))).collect();
                path.pop();
                SnapValue::Obj {
                    class: rec.class.clone(),
                    fields,
                }
            }
        }
    }
    go(heap, v, &mut Vec::new())
}

/// Captures the state relevant to an entry run: object-typed arguments,
/// receiver fields and constants the run read, and the return value.
pub fn snapshot_state(outcome: &ExecutionOutcome, receiver: &Value, args: &[Value]) -> StateSnapshot {
    let heap = &outcome.heap_snapshot;
    let params = args
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, Value::Obj(_)))
        .map(|(i, a)| (format!("arg{i}"), snap_value(heap, a)))
        .collect();
    let mut externals = BTreeMap::new();
    if let Some(rec) = receiver.as_obj().and_then(|o| heap.get(&o.id)) {
        for f in &outcome.reads.receiver_fields {
            if let Some(v) = rec.fields.get(f) {
                externals.insert(format!("this.{f}"), snap_value(heap, v));
            }
        }
    }
    for (k, v) in &outcome.reads.globals {
        externals.insert(k.clone(), snap_value(heap, v));
    }
    StateSnapshot {
        params,
        externals,
        ret: outcome.return_value.as_ref().map(|v| snap_value(heap, v)),
    }
}
