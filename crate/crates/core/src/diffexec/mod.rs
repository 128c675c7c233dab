//! Two-configuration replay of covering tests and SC verdicts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::{ConflictingApiPair, Configs};
use crate::lang::{ExecutionOutcome, SnapValue, StateSnapshot, Status};
use crate::testgen::TestCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Actual,
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: RunKind,
    pub outcome: ExecutionOutcome,
    pub snapshot: StateSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomePair {
    pub test: TestCase,
    pub actual: RunRecord,
    pub original: RunRecord,
}

/// Replays `test` under the loaded and the shadowed configuration.
pub fn run_both(test: &TestCase, configs: &Configs, step_limit: u64) -> OutcomePair {
    let run = |kind, program| {
        let r = test.execute(program, step_limit, false);
        RunRecord {
            kind,
            outcome: r.outcome,
            snapshot: r.snapshot,
        }
    };
    OutcomePair {
        test: test.clone(),
        actual: run(RunKind::Actual, &configs.actual),
        original: run(RunKind::Original, &configs.original),
    }
}

/// Snapshot part: (a) object arguments, (b) external state, (c) return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Section {
    #[serde(rename = "a")]
    Params,
    #[serde(rename = "b")]
    Externals,
    #[serde(rename = "c")]
    Return,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Params => "a",
            Section::Externals => "b",
            Section::Return => "c",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateDiff {
    pub section: Section,
    pub path: String,
    pub left: Option<SnapValue>,
    pub right: Option<SnapValue>,
}

impl fmt::Display for StateDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Option<SnapValue>| v.as_ref().map_or("<absent>".to_string(), |v| v.to_string());
        write!(f, "({}) {}: {} vs {}", self.section, self.path, show(&self.left), show(&self.right))
    }
}

/// Deep comparison of two snapshots. Bags are compared in insertion order
/// unless `canonicalize_bags` is set.
pub fn compare_states(a: &StateSnapshot, b: &StateSnapshot, canonicalize_bags: bool) -> Vec<StateDiff> {
    let mut out = Vec::new();
    let mut maps = |section, x: &BTreeMap<String, SnapValue>, y: &BTreeMap<String, SnapValue>| {
        let keys: BTreeSet<&String> = x.keys().chain(y.keys()).collect();
        for k in keys {
            diff_value(section, k.clone(), x.get(k), y.get(k), canonicalize_bags, &mut out);
        }
    };
    maps(Section::Params, &a.params, &b.params);
    maps(Section::Externals, &a.externals, &b.externals);
    diff_value(
        Section::Return,
        "return".to_string(),
        a.ret.as_ref(),
        b.ret.as_ref(),
        canonicalize_bags,
        &mut out,
    );
    out
}

fn diff_value(
    section: Section,
    path: String,
    a: Option<&SnapValue>,
    b: Option<&SnapValue>,
    canon: bool,
    out: &mut Vec<StateDiff>,
) {
    let whole = |out: &mut Vec<StateDiff>, path: String| {
        out.push(StateDiff {
            section,
            path,
            left: a.cloned(),
            right: b.cloned(),
        })
    };
    match (a, b) {
        (
            Some(SnapValue::Obj { class: ca, fields: fa }),
            Some(SnapValue::Obj { class: cb, fields: fb }),
        ) if ca == cb => {
            let keys: BTreeSet<&String> = fa.keys().chain(fb.keys()).collect();
            for k in keys {
                diff_value(section, format!("{path}.{k}"), fa.get(k), fb.get(k), canon, out);
            }
        }
        (Some(x @ SnapValue::Bag(_)), Some(y @ SnapValue::Bag(_))) => {
            let differ = if canon { x.canonical() != y.canonical() } else { x != y };
            if differ {
                whole(out, path);
            }
        }
        (Some(x), Some(y)) if x == y => {}
        (None, None) => {}
        _ => {
            // Nested bags still honour the flag when the rest matches.
            if canon && a.map(SnapValue::canonical) == b.map(SnapValue::canonical) {
                return;
            }
            whole(out, path)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InconsistencyKind {
    VariableState,
    TestOutcome,
    Both,
}

impl fmt::Display for InconsistencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InconsistencyKind::VariableState => "variable-state",
            InconsistencyKind::TestOutcome => "test-outcome",
            InconsistencyKind::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistencyRecord {
    pub kind: InconsistencyKind,
    pub diffs: Vec<StateDiff>,
    pub supporting_tests: usize,
}

fn status_name(s: Status) -> SnapValue {
    SnapValue::Str(
        match s {
            Status::Returned => "returned",
            Status::Raised => "raised",
            Status::StepLimitExceeded => "step-limit-exceeded",
        }
        .to_string(),
    )
}

/// Inconsistency shown by one test, if any.
pub fn inconsistency(pair: &OutcomePair, canonicalize_bags: bool) -> Option<(InconsistencyKind, Vec<StateDiff>)> {
    let (a, o) = (&pair.actual, &pair.original);
    let mut diffs = compare_states(&o.snapshot, &a.snapshot, canonicalize_bags);
    if o.outcome.status != a.outcome.status {
        diffs.push(StateDiff {
            section: Section::Return,
            path: "status".to_string(),
            left: Some(status_name(o.outcome.status)),
            right: Some(status_name(a.outcome.status)),
        });
        return Some((InconsistencyKind::TestOutcome, diffs));
    }
    let kind_of = |r: &RunRecord| r.outcome.error.as_ref().map(|e| SnapValue::Str(e.kind.to_string()));
    if kind_of(o) != kind_of(a) {
        diffs.push(StateDiff {
            section: Section::Return,
            path: "error".to_string(),
            left: kind_of(o),
            right: kind_of(a),
        });
    }
    (!diffs.is_empty()).then_some((InconsistencyKind::VariableState, diffs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCVerdict {
    pub pair: ConflictingApiPair,
    pub is_sc: bool,
    pub kind: Option<InconsistencyKind>,
    pub records: Vec<InconsistencyRecord>,
    pub threshold_met: bool,
    pub inconsistent_tests: usize,
    pub total_tests: usize,
}

/// SC when more than one test behaves inconsistently.
pub fn classify(pair: &ConflictingApiPair, outcome_pairs: &[OutcomePair], canonicalize_bags: bool) -> SCVerdict {
    let mut groups: BTreeMap<InconsistencyKind, (BTreeSet<StateDiff>, usize)> = BTreeMap::new();
    let mut inconsistent = 0;
    for op in outcome_pairs {
        if let Some((kind, diffs)) = inconsistency(op, canonicalize_bags) {
            inconsistent += 1;
            let g = groups.entry(kind).or_default();
            g.0.extend(diffs);
            g.1 += 1;
        }
    }
    let kind = match (
        groups.contains_key(&InconsistencyKind::VariableState),
        groups.contains_key(&InconsistencyKind::TestOutcome),
    ) {
        (true, true) => Some(InconsistencyKind::Both),
        (true, false) => Some(InconsistencyKind::VariableState),
        (false, true) => Some(InconsistencyKind::TestOutcome),
        (false, false) => None,
    };
    let threshold_met = inconsistent > 1;
    SCVerdict {
        pair: pair.clone(),
        is_sc: threshold_met,
        kind,
        records: groups
            .into_iter()
            .map(|(kind, (diffs, n))| InconsistencyRecord {
                kind,
                diffs: diffs.into_iter().collect(),
                supporting_tests: n,
            })
            .collect(),
        threshold_met,
        inconsistent_tests: inconsistent,
        total_tests: outcome_pairs.len(),
    }
}
