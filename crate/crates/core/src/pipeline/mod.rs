//! End-to-end run over one workspace: scan, mine, generate, replay, report.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{scan, Configs, DetectorConfig, Inventory, PairRecord, DEFAULT_DEPTH_LIMIT, DEFAULT_MAX_PATHS};
use crate::diffexec::{classify, run_both};
use crate::miner::{build_pool, InstancePool, DEFAULT_DN};
use crate::report::{emit_report, EvaluatedPair, Instrumentation, IssueReport};
use crate::resolver::{build_tree, link, mediate, ResolveError, Workspace};
use crate::testgen::{generate, GAConfig, GenerationReport, TestgenError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Testgen(#[from] TestgenError),
    #[error("manifest: {0}")]
    Manifest(String),
}

fn d_seed() -> u64 {
    42
}
fn d_dn() -> usize {
    DEFAULT_DN
}
fn d_depth() -> usize {
    DEFAULT_DEPTH_LIMIT
}
fn d_rn() -> usize {
    GAConfig::default().repetitions
}
fn d_budget() -> Option<u64> {
    GAConfig::default().budget_ms
}
fn d_true() -> bool {
    true
}
fn d_population() -> usize {
    GAConfig::default().population_size
}
fn d_generations() -> usize {
    GAConfig::default().max_generations
}
fn d_paths() -> usize {
    DEFAULT_MAX_PATHS
}
fn d_steps() -> u64 {
    GAConfig::default().step_limit
}

/// Every knob of a run. Embedded in the report so the run can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default)]
    pub workspace: Option<PathBuf>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_dn")]
    pub dn: usize,
    #[serde(default = "d_depth")]
    pub depth_limit: usize,
    #[serde(default = "d_rn")]
    pub rn: usize,
    #[serde(default = "d_budget")]
    pub budget_ms: Option<u64>,
    #[serde(default = "d_true")]
    pub seeding: bool,
    #[serde(default)]
    pub canonicalize_bags: bool,
    #[serde(default = "d_population")]
    pub population_size: usize,
    #[serde(default = "d_generations")]
    pub max_generations: usize,
    #[serde(default = "d_paths")]
    pub max_paths: usize,
    #[serde(default = "d_steps")]
    pub step_limit: u64,
    /// Free-form values recorded for the reader; not interpreted.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl Default for RunManifest {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn ga_config(&self) -> GAConfig {
        GAConfig {
            population_size: self.population_size,
            max_generations: self.max_generations,
            budget_ms: self.budget_ms,
            repetitions: self.rn,
            seeding_enabled: self.seeding,
            step_limit: self.step_limit,
            ..GAConfig::default()
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            depth_limit: self.depth_limit,
            max_paths: self.max_paths,
        }
    }
}

/// Stable seed for one pair, independent of pair order.
pub fn pair_seed(seed: u64, pair: &str) -> u64 {
    // FNV-1a over the id, mixed with the run seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in pair.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub inventory: Inventory,
    pub generations: BTreeMap<String, GenerationReport>,
    pub evaluated: Vec<EvaluatedPair>,
    pub report: IssueReport,
}

impl PipelineOutput {
    /// Pair id to SC prediction for every pair that reached replay.
    pub fn predictions(&self) -> BTreeMap<String, bool> {
        self.evaluated
            .iter()
            .filter_map(|e| Some((e.id.clone(), e.verdict.as_ref()?.is_sc)))
            .collect()
    }

    /// 2 when an SC issue was reported, otherwise 0.
    pub fn exit_code(&self) -> i32 {
        if self.report.has_issues() {
            2
        } else {
            0
        }
    }
}

const PARALLEL: bool = cfg!(not(target_arch = "wasm32"));
const WORKER_STACK: usize = 64 << 20;

fn overrides_key(record: &PairRecord) -> String {
    serde_json::to_string(&record.pair.original).expect("overrides serialize")
}

fn evaluate_pair(
    record: &PairRecord,
    configs: Option<&Configs>,
    pool: &InstancePool,
    ga: &GAConfig,
    manifest: &RunManifest,
) -> (EvaluatedPair, Option<GenerationReport>) {
    let id = record.pair.shadowed.to_string();
    let skipped = |note: &str| EvaluatedPair {
        id: id.clone(),
        record: record.clone(),
        tests: Vec::new(),
        verdict: None,
        notes: vec![note.to_string()],
    };
    let Some(configs) = configs.filter(|_| record.pair.isomerous == Some(true)) else {
        return (skipped("no differing code reachable within the depth limit"), None);
    };
    let gen = generate(configs, record, pool, ga, pair_seed(manifest.seed, &id));
    let mut notes = gen.diagnostics.clone();
    let outcomes: Vec<_> = gen.tests.iter().map(|t| run_both(t, configs, manifest.step_limit)).collect();
    let verdict = classify(&record.pair, &outcomes, manifest.canonicalize_bags);
    if gen.tests.is_empty() {
        notes.push("no covering test was generated".to_string());
    }
    let e = EvaluatedPair {
        id,
        record: record.clone(),
        tests: gen.tests.clone(),
        verdict: Some(verdict),
        notes,
    };
    (e, Some(gen))
}

pub fn run_pipeline(ws: &Workspace, manifest: &RunManifest) -> Result<PipelineOutput, PipelineError> {
    let ga = manifest.ga_config();
    ga.validate()?;
    let classpath = mediate(&build_tree(ws)?);
    let actual = link(ws, &classpath)?;
    let pool = build_pool(&actual, manifest.dn);
    let inventory = scan(ws, &manifest.detector_config())?;
    let mut cache: BTreeMap<String, Configs> = BTreeMap::new();
    for record in &inventory.pairs {
        let key = overrides_key(record);
        if record.pair.isomerous == Some(true) && !cache.contains_key(&key) {
            cache.insert(key, Configs::build(ws, &record.pair.original)?);
        }
    }
    let evaluate = |record: &PairRecord| evaluate_pair(record, cache.get(&overrides_key(record)), &pool, &ga, manifest);
    let results: Vec<(EvaluatedPair, Option<GenerationReport>)> = if PARALLEL {
        std::thread::scope(|s| {
            let handles: Vec<_> = inventory
                .pairs
                .iter()
                .map(|r| {
                    std::thread::Builder::new()
                        .stack_size(WORKER_STACK)
                        .spawn_scoped(s, move || evaluate(r))
                        .expect("spawn pair worker")
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("pair worker panicked")).collect()
        })
    } else {
        inventory.pairs.iter().map(evaluate).collect()
    };
    let mut evaluated = Vec::new();
    let mut generations = BTreeMap::new();
    for (e, g) in results {
        if let Some(g) = g {
            generations.insert(e.id.clone(), g);
        }
        evaluated.push(e);
    }
    evaluated.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest_json = serde_json::to_value(manifest).expect("manifest serializes");
    let report = emit_report(
        manifest_json,
        &ws.project.manifest.name,
        &classpath,
        &evaluated,
        Instrumentation::from_pool(&pool),
    );
    Ok(PipelineOutput {
        inventory,
        generations,
        evaluated,
        report,
    })
}
