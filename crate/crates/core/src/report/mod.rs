//! Issue reports and evaluation metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DependencyPath, DiffSite, PairRecord};
use crate::diffexec::{InconsistencyKind, InconsistencyRecord, SCVerdict};
use crate::miner::InstancePool;
use crate::resolver::{ApiRef, Classpath, MediationStep, ShadowedClass};
use crate::testgen::TestCase;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("pair `{0}` has no ground-truth label")]
    Unlabeled(String),
    #[error("report document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Some denominator was zero and the affected values were set to 0.
    pub degenerate: bool,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricSet {
    let ratio = |n: usize, d: usize| if d == 0 { None } else { Some(n as f64 / d as f64) };
    let p = ratio(cm.tp, cm.tp + cm.fp);
    let r = ratio(cm.tp, cm.tp + cm.fn_);
    let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
    let sum = precision + recall;
    MetricSet {
        precision,
        recall,
        f_measure: if sum > 0.0 { 2.0 * precision * recall / sum } else { 0.0 },
        degenerate: p.is_none() || r.is_none() || sum == 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Sc,
    Benign,
}

/// Buckets predictions against labels. Labeled pairs without a prediction
/// count as predicted benign; predictions without a label are an error.
pub fn score_against_truth(
    predictions: &BTreeMap<String, bool>,
    labels: &BTreeMap<String, Label>,
) -> Result<ConfusionMatrix, ReportError> {
    if let Some(id) = predictions.keys().find(|k| !labels.contains_key(*k)) {
        return Err(ReportError::Unlabeled(id.clone()));
    }
    let mut cm = ConfusionMatrix::default();
    for (id, label) in labels {
        match (predictions.get(id).copied().unwrap_or(false), label) {
            (true, Label::Sc) => cm.tp += 1,
            (true, Label::Benign) => cm.fp += 1,
            (false, Label::Benign) => cm.tn += 1,
            (false, Label::Sc) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Plain-text table with one row per tool, three decimals.
pub fn metrics_table(rows: &[(&str, ConfusionMatrix)]) -> String {
    let mut out = format!(
        "{:<10} {:>4} {:>4} {:>4} {:>4} {:>9} {:>7} {:>9}\n",
        "Tool", "TP", "FP", "TN", "FN", "Precision", "Recall", "F-measure"
    );
    for (name, cm) in rows {
        let m = compute_metrics(cm);
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:>4} {:>4} {:>4} {:>9.3} {:>7.3} {:>9.3}{}",
            name,
            cm.tp,
            cm.fp,
            cm.tn,
            cm.fn_,
            m.precision,
            m.recall,
            m.f_measure,
            if m.degenerate { "  (degenerate)" } else { "" }
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArguRecord {
    pub constructor: ApiRef,
    pub argu_s: usize,
    pub argu_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRatio {
    pub pair: String,
    pub test: usize,
    /// R_p / N_o: pool-seeded objects over all constructed objects.
    pub rp_over_no: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Instrumentation {
    pub n_c: usize,
    pub n_t: usize,
    pub n_i: f64,
    pub argu: Vec<ArguRecord>,
    pub rp_over_no: Vec<TestRatio>,
}

impl Instrumentation {
    pub fn from_pool(pool: &InstancePool) -> Self {
        let cov = pool.coverage();
        let argu = pool
            .entries
            .values()
            .flatten()
            .filter(|e| !e.context.bindings.is_empty())
            .map(|e| ArguRecord {
                constructor: e.context.constructor.clone(),
                argu_s: e.context.bindings.iter().filter(|b| b.from_source()).count(),
                argu_t: e.context.bindings.len(),
            })
            .collect();
        Instrumentation {
            n_c: cov.n_c,
            n_t: cov.n_t,
            n_i: cov.n_i,
            argu,
            rp_over_no: Vec::new(),
        }
    }
}

/// One pair after the test generation and replay stages.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedPair {
    pub id: String,
    pub record: PairRecord,
    pub tests: Vec<TestCase>,
    /// `None` when the pair never reached replay (not isomerous).
    pub verdict: Option<SCVerdict>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub library: String,
    pub loaded: String,
    pub shadowed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCause {
    pub project: String,
    pub conflicts: Vec<Conflict>,
    pub shadowed_classes: Vec<ShadowedClass>,
    pub mediation: Vec<MediationStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedPair {
    pub id: String,
    pub shadowed: ApiRef,
    pub loaded: ApiRef,
    pub fallback_used: bool,
    pub diff_sites: Vec<DiffSite>,
    pub original_paths: Vec<DependencyPath>,
    pub actual_paths: Vec<DependencyPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedTest {
    pub pair: String,
    pub index: usize,
    pub listing: String,
    pub test: TestCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedDiff {
    pub pair: String,
    pub kind: InconsistencyKind,
    pub inconsistent_tests: usize,
    pub total_tests: usize,
    pub records: Vec<InconsistencyRecord>,
}

/// A pair that was analysed but not reported as an SC issue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixEntry {
    pub pair: String,
    pub isomerous: Option<bool>,
    pub tests: usize,
    pub inconsistent_tests: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    /// Run configuration, embedded verbatim for replay.
    pub manifest: serde_json::Value,
    pub root_cause: RootCause,
    pub pairs: Vec<ReportedPair>,
    pub tests: Vec<ReportedTest>,
    pub diffs: Vec<ReportedDiff>,
    pub appendix: Vec<AppendixEntry>,
    pub instrumentation: Instrumentation,
}

pub fn emit_report(
    manifest: serde_json::Value,
    project: &str,
    classpath: &Classpath,
    evaluated: &[EvaluatedPair],
    mut instrumentation: Instrumentation,
) -> IssueReport {
    let root_cause = RootCause {
        project: project.to_string(),
        conflicts: classpath
            .shadowed
            .iter()
            .map(|(lib, vs)| Conflict {
                library: lib.clone(),
                loaded: classpath.loaded.get(lib).cloned().unwrap_or_default(),
                shadowed: vs.iter().cloned().collect(),
            })
            .collect(),
        shadowed_classes: classpath.shadowed_classes.clone(),
        mediation: classpath.trace.clone(),
    };
    let mut report = IssueReport {
        manifest,
        root_cause,
        pairs: Vec::new(),
        tests: Vec::new(),
        diffs: Vec::new(),
        appendix: Vec::new(),
        instrumentation: Instrumentation::default(),
    };
    for e in evaluated {
        for (i, t) in e.tests.iter().enumerate() {
            instrumentation.rp_over_no.push(TestRatio {
                pair: e.id.clone(),
                test: i,
                rp_over_no: t.pool_ratio(),
            });
        }
        let sc = e.verdict.as_ref().filter(|v| v.is_sc);
        let Some(v) = sc else {
            report.appendix.push(AppendixEntry {
                pair: e.id.clone(),
                isomerous: e.record.pair.isomerous,
                tests: e.tests.len(),
                inconsistent_tests: e.verdict.as_ref().map_or(0, |v| v.inconsistent_tests),
                notes: e.notes.clone(),
            });
            continue;
        };
        let p = &e.record.pair;
        report.pairs.push(ReportedPair {
            id: e.id.clone(),
            shadowed: p.shadowed.clone(),
            loaded: p.loaded.clone(),
            fallback_used: p.fallback_used,
            diff_sites: p.diff_sites.clone(),
            original_paths: e.record.original_paths.clone(),
            actual_paths: e.record.actual_paths.clone(),
        });
        for (i, t) in e.tests.iter().enumerate() {
            report.tests.push(ReportedTest {
                pair: e.id.clone(),
                index: i,
                listing: t.to_string(),
                test: t.clone(),
            });
        }
        report.diffs.push(ReportedDiff {
            pair: e.id.clone(),
            kind: v.kind.expect("an SC verdict has inconsistencies"),
            inconsistent_tests: v.inconsistent_tests,
            total_tests: v.total_tests,
            records: v.records.clone(),
        });
    }
    report.instrumentation = instrumentation;
    report
}

impl IssueReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Format(e.to_string()))
    }

    pub fn has_issues(&self) -> bool {
        !self.pairs.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut out = format!("project {}\n", self.root_cause.project);
        for c in &self.root_cause.conflicts {
            let _ = writeln!(out, "  {} loads {} and shadows {}", c.library, c.loaded, c.shadowed.join(", "));
        }
        let _ = writeln!(out, "{} SC issue(s)", self.pairs.len());
        for d in &self.diffs {
            let _ = writeln!(
                out,
                "  {} [{}] {}/{} tests inconsistent",
                d.pair, d.kind, d.inconsistent_tests, d.total_tests
            );
        }
        let _ = writeln!(out, "{} pair(s) without SC evidence", self.appendix.len());
        let i = &self.instrumentation;
        let _ = writeln!(out, "pool: N_c/N_t = {}/{}, N_i = {:.2}", i.n_c, i.n_t, i.n_i);
        out
    }
}
