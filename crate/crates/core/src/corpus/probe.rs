//! Differential probing of two library versions with the reference
//! evaluator, independent of the detection pipeline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lang::ast::{Signature, SourceUnit};
use crate::lang::reference::reference_evaluate;
use crate::lang::snapshot::snap_value;
use crate::lang::{ExecutionOutcome, Input, SnapValue, Status, Value};
use crate::resolver::ResolvedProgram;
use crate::testgen::INT_RANGE;

use super::CorpusError;

const PROBE_STEPS: u64 = 20_000;

/// An input on which the two versions disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub ctor_args: Vec<i64>,
    pub args: Vec<i64>,
    pub base: String,
    pub mutated: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub samples: usize,
    pub differing: usize,
    pub witness: Option<Witness>,
}

impl ProbeResult {
    pub fn density(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.differing as f64 / self.samples as f64
        }
    }
}

fn observe(o: &ExecutionOutcome, canonical_bags: bool) -> (Status, Option<String>, Option<SnapValue>) {
    let ret = o.return_value.as_ref().map(|v| {
        let s = snap_value(&o.heap_snapshot, v);
        if canonical_bags {
            s.canonical()
        } else {
            s
        }
    });
    (o.status, o.error.as_ref().map(|e| e.kind.to_string()), ret)
}

fn show(o: &(Status, Option<String>, Option<SnapValue>)) -> String {
    match o {
        (_, _, Some(v)) => v.to_string(),
        (_, Some(k), None) => format!("raised {k}"),
        (s, None, None) => format!("{s:?}"),
    }
}

/// Runs `class.sig` of both units on `samples` random Int inputs with the
/// constructor arguments fixed to `ctor_args`.
pub fn probe<R: Rng + ?Sized>(
    base: &SourceUnit,
    mutated: &SourceUnit,
    class: &str,
    sig: &Signature,
    ctor_args: &[i64],
    samples: usize,
    canonical_bags: bool,
    rng: &mut R,
) -> Result<ProbeResult, CorpusError> {
    let load = |u: &SourceUnit| -> Result<_, CorpusError> {
        let p = ResolvedProgram::standalone(vec![u.clone()]).map_err(|e| CorpusError::Validation(e.to_string()))?;
        if let Some(d) = p.check().first() {
            return Err(CorpusError::Validation(format!("{}@{}: {d:?}", u.library, u.version)));
        }
        let id = p
            .class_id(class)
            .ok_or_else(|| CorpusError::Validation(format!("no class {class}")))?;
        let h = p
            .lookup_signature(id, sig)
            .ok_or_else(|| CorpusError::Validation(format!("no method {class}::{sig}")))?;
        let api = p.api_ref(h);
        Ok((p, api))
    };
    let (pa, ea) = load(base)?;
    let (pb, eb) = load(mutated)?;
    let receiver = Input::New {
        class: class.to_string(),
        args: ctor_args.iter().map(|v| Input::Value(Value::Int(*v))).collect(),
    };
    let mut result = ProbeResult {
        samples,
        differing: 0,
        witness: None,
    };
    for _ in 0..samples {
        let args: Vec<i64> = (0..sig.params.len()).map(|_| rng.gen_range(INT_RANGE)).collect();
        let inputs: Vec<Input> = args.iter().map(|v| Input::Value(Value::Int(*v))).collect();
        let a = observe(&reference_evaluate(&pa, &ea, &receiver, &inputs, PROBE_STEPS), canonical_bags);
        let b = observe(&reference_evaluate(&pb, &eb, &receiver, &inputs, PROBE_STEPS), canonical_bags);
        if a != b {
            result.differing += 1;
            result.witness.get_or_insert(Witness {
                ctor_args: ctor_args.to_vec(),
                args,
                base: show(&a),
                mutated: show(&b),
            });
        }
    }
    Ok(result)
}
