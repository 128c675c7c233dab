//! Synthetic labeled workspaces for evaluation.
//!
//! Every workspace has the same three-library shape: the project depends on
//! `Mid@1.0` and `Core@2.0`, and `Mid` was built against `Core@1.0`, so
//! mediation loads `Core@2.0` and shadows `Core@1.0`. `Core@2.0` is `Core@1.0`
//! after one mutation. The project only reaches `Core` through a service
//! whose endpoint argument needs exact constructor literals, which a random
//! generator will not hit but the project's own code contains.

mod mutate;
mod probe;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mutate::{apply_mutation, bump, MutationOperator, MutationTrace, DEGRADED};
pub use probe::{probe, ProbeResult, Witness};

use crate::lang::ast::SourceUnit;
use crate::lang::{parse, pretty};
use crate::report::Label;
use crate::resolver::{force_load, resolve, Manifest, Package, ResolveError, Workspace};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("operator {0} does not apply")]
    NotApplicable(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io(path: &Path, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Operators cycled through for conflicting workspaces.
pub const SC_CYCLE: [MutationOperator; 5] = [
    MutationOperator::ConstantChange,
    MutationOperator::BranchAdd,
    MutationOperator::BranchDelete,
    MutationOperator::PreconditionStrengthen,
    MutationOperator::PostconditionWeaken,
];

/// Operators cycled through for benign workspaces.
pub const BENIGN_CYCLE: [MutationOperator; 5] = [
    MutationOperator::LocalRename,
    MutationOperator::StatementReorder,
    MutationOperator::ExtractMethod,
    MutationOperator::BagOrderShuffle,
    MutationOperator::StatementReorder,
];

const PATHS: [&str; 6] = ["/endpoint", "/api/v2", "/status", "/ingest", "/metrics/raw", "/hooks/push"];

/// Random inputs drawn per probe.
pub const PROBE_SAMPLES: usize = 50;
/// Conflicting mutants must differ on at least this share of probe inputs,
/// so a handful of generated tests sees the difference.
pub const MIN_WITNESS_DENSITY: f64 = 0.25;
const MAX_ATTEMPTS: usize = 40;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusOptions {
    /// Label bag reordering as a conflict and probe it order-sensitively.
    pub shuffle_is_sc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWorkspace {
    pub name: String,
    pub workspace: Workspace,
    pub label: Label,
    /// Shadowed member the mutation touched.
    pub pair: String,
    pub trace: MutationTrace,
    pub probe: ProbeResult,
}

/// Per-workspace metadata written next to the sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub label: Label,
    pub pair: String,
    pub trace: MutationTrace,
    pub probe: ProbeResult,
}

struct Template {
    path: String,
    port: i64,
    k: [i64; 6],
}

impl Template {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Template {
            path: PATHS.choose(rng).expect("nonempty").to_string(),
            port: rng.gen_range(2000..10_000),
            k: [
                rng.gen_range(1..50),
                rng.gen_range(1..50),
                rng.gen_range(0..200),
                rng.gen_range(1..50),
                rng.gen_range(1..50),
                rng.gen_range(1..50),
            ],
        }
    }

    /// Engine scale used on the `compute` route.
    fn scale(&self) -> i64 {
        self.port % 7 + 1
    }

    fn app(&self) -> String {
        let (path, port) = (&self.path, self.port);
        format!(
            r#"library App v1.0 {{
  public class Endpoint {{
    field path: Str;
    field port: Int;
    new(path: Str, port: Int) {{
      require(path == "{path}");
      require(port == {port});
      this.path = path;
      this.port = port;
    }}
  }}
  internal class Setup {{
    new() {{}}
    internal method make() -> Endpoint {{ return new Endpoint("{path}", {port}); }}
  }}
  public class Service {{
    field calls: Int;
    new() {{ this.calls = 0; }}
    public method run(ep: Endpoint, x: Int) -> Int {{
      let h = new Helper(ep.port);
      let r = h.go(x);
      require(r > -500000);
      this.calls = this.calls + 1;
      return r;
    }}
    public method gather(ep: Endpoint, x: Int) -> Bag {{
      let h = new Helper(ep.port);
      return h.collect(x);
    }}
  }}
}}"#
        )
    }

    fn core(&self) -> String {
        let [k1, k2, k3, k4, k5, k6] = self.k;
        format!(
            "library Core v1.0 {{
  public class Engine {{
    field scale: Int;
    field history: Bag;
    new(scale: Int) {{ this.scale = scale; this.history = bag[]; }}
    public method compute(p: Int) -> Int {{
      let a = p * this.scale;
      let c = p + {k1};
      let b = a + {k2};
      if (a > {k3}) {{ b = b - {k4}; }}
      b = b * 2;
      return b + c;
    }}
    public method collect(p: Int) -> Bag {{
      let first = p + {k5};
      let second = p * 2;
      return bag[first, second, {k6}];
    }}
  }}
}}"
        )
    }
}

const MID: &str = "library Mid v1.0 {
  public class Helper {
    field base: Int;
    new(base: Int) { this.base = base; }
    public method go(x: Int) -> Int {
      let e = new Engine(this.base % 7 + 1);
      return e.compute(x);
    }
    public method collect(x: Int) -> Bag {
      let e = new Engine(1);
      return e.collect(x);
    }
  }
}";

/// Parses `text` and reparses its printed form, so spans match what a
/// written and reloaded workspace carries.
fn parse_printed(text: &str) -> Result<SourceUnit, CorpusError> {
    let bad = |e: crate::lang::ParseError| CorpusError::Validation(e.to_string());
    parse(&pretty(&parse(text).map_err(bad)?)).map_err(bad)
}

fn assemble(app: &str, base: &SourceUnit, mutated: &SourceUnit) -> Result<Workspace, CorpusError> {
    let parse_ok = parse_printed;
    let ws = Workspace::new(
        Package::new(
            Manifest::new("App", "1.0", &[("Mid", "1.0"), ("Core", &mutated.version)]),
            parse_ok(app)?,
        )?,
        [
            Package::new(Manifest::new("Mid", "1.0", &[("Core", &base.version)]), parse_ok(MID)?)?,
            Package::new(Manifest::new("Core", &base.version, &[]), base.clone())?,
            Package::new(Manifest::new("Core", &mutated.version, &[]), mutated.clone())?,
        ],
    );
    // Both the mediated and the shadowed configuration must link cleanly.
    let pinned = BTreeMap::from([("Core".to_string(), base.version.clone())]);
    for program in [resolve(&ws)?, force_load(&ws, &pinned)?] {
        if let Some(d) = program.check().first() {
            return Err(CorpusError::Validation(format!("{d:?}")));
        }
    }
    Ok(ws)
}

fn candidate(
    rng: &mut ChaCha8Rng,
    op: MutationOperator,
    label: Label,
    options: CorpusOptions,
) -> Result<(Template, SourceUnit, SourceUnit, MutationTrace, ProbeResult), CorpusError> {
    let t = Template::random(rng);
    let base = parse_printed(&t.core())?;
    let (mutated, trace) = apply_mutation(&base, op, rng)?;
    let scale = if trace.method.name == "collect" { 1 } else { t.scale() };
    let canonical = op == MutationOperator::BagOrderShuffle && !options.shuffle_is_sc;
    let probe = probe(&base, &mutated, &trace.class, &trace.method, &[scale], PROBE_SAMPLES, canonical, rng)?;
    let ok = match label {
        Label::Sc => probe.witness.is_some() && probe.density() >= MIN_WITNESS_DENSITY,
        Label::Benign => probe.differing == 0,
    };
    if !ok {
        return Err(CorpusError::Validation(format!(
            "{op}: {} of {} probe inputs differ",
            probe.differing, probe.samples
        )));
    }
    Ok((t, base, mutated, trace, probe))
}

fn label_of(op: MutationOperator, options: CorpusOptions) -> Label {
    match op {
        MutationOperator::BagOrderShuffle if options.shuffle_is_sc => Label::Sc,
        o if SC_CYCLE.contains(&o) => Label::Sc,
        _ => Label::Benign,
    }
}

/// Builds one workspace for `op`, retrying with fresh templates until a
/// mutant passes the probe.
pub fn synthesize_one(
    rng: &mut ChaCha8Rng,
    name: &str,
    op: MutationOperator,
    options: CorpusOptions,
) -> Result<LabeledWorkspace, CorpusError> {
    let label = label_of(op, options);
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        match candidate(rng, op, label, options) {
            Ok((t, base, mutated, trace, probe)) => {
                let workspace = assemble(&t.app(), &base, &mutated)?;
                let pair = format!("Core@{}::{}::{}", base.version, trace.class, trace.method);
                return Ok(LabeledWorkspace {
                    name: name.to_string(),
                    workspace,
                    label,
                    pair,
                    trace,
                    probe,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| CorpusError::NotApplicable(op.name().to_string())))
}

/// `n_sc` conflicting and `n_benign` benign workspaces, deterministic in
/// `seed`. Conflicting ones come first.
pub fn synthesize(
    seed: u64,
    n_sc: usize,
    n_benign: usize,
    options: CorpusOptions,
) -> Result<Vec<LabeledWorkspace>, CorpusError> {
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let plan = (0..n_sc)
        .map(|i| ("sc", SC_CYCLE[i % SC_CYCLE.len()]))
        .chain((0..n_benign).map(|i| ("benign", BENIGN_CYCLE[i % BENIGN_CYCLE.len()])));
    let mut out = Vec::new();
    for (i, (kind, op)) in plan.enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(root.gen());
        let name = format!("{kind}-{i:03}-{op}");
        out.push(synthesize_one(&mut rng, &name, op, options)?);
    }
    Ok(out)
}

/// Workspace whose two `Core` versions first differ `diff_depth` calls below
/// the shadowed entry `Engine::compute`.
pub fn depth_fixture(diff_depth: usize) -> Result<Workspace, CorpusError> {
    let n = diff_depth.max(2) - 1;
    let mut body = String::from("public class Engine { new() {} public method compute(x: Int) -> Int { return this.h1(x); }\n");
    for i in 1..n {
        body.push_str(&format!("  internal method h{i}(x: Int) -> Int {{ return this.h{}(x); }}\n", i + 1));
    }
    body.push_str(&format!("  internal method h{n}(x: Int) -> Int {{ return x + 1; }} }}"));
    let v1 = format!("library Core v1.0 {{ {body} }}");
    let v2 = v1.replace("return x + 1;", "return x + 2;").replace("v1.0", "v2.0");
    let app = "library App v1.0 { public class Client { new() {}
        public method use(x: Int) -> Int { let m = new Relay(); return m.pass(x); } } }";
    let mid = "library Mid v1.0 { public class Relay { new() {}
        public method pass(x: Int) -> Int { let e = new Engine(); return e.compute(x); } } }";
    Ok(Workspace::from_sources(
        (Manifest::new("App", "1.0", &[("Mid", "1.0"), ("Core", "2.0")]), app),
        &[
            (Manifest::new("Mid", "1.0", &[("Core", "1.0")]), mid),
            (Manifest::new("Core", "1.0", &[]), &v1),
            (Manifest::new("Core", "2.0", &[]), &v2),
        ],
    )?)
}

impl LabeledWorkspace {
    pub fn entry(&self) -> CorpusEntry {
        CorpusEntry {
            name: self.name.clone(),
            label: self.label,
            pair: self.pair.clone(),
            trace: self.trace.clone(),
            probe: self.probe.clone(),
        }
    }
}

/// Key under which a pair of a corpus workspace is scored.
pub fn scoring_key(workspace: &str, pair: &str) -> String {
    format!("{workspace}/{pair}")
}

/// Ground truth for a whole corpus, keyed by [`scoring_key`].
pub fn flat_labels(corpus: &[LabeledWorkspace]) -> BTreeMap<String, Label> {
    corpus.iter().map(|w| (scoring_key(&w.name, &w.pair), w.label)).collect()
}

/// Writes one directory per workspace plus `labels.json` (workspace to
/// pair to label) and `corpus.json` (mutation traces and probe witnesses).
pub fn write_corpus(dir: &Path, corpus: &[LabeledWorkspace]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for w in corpus {
        w.workspace.write(&dir.join(&w.name))?;
    }
    let labels: BTreeMap<&str, BTreeMap<&str, Label>> = corpus
        .iter()
        .map(|w| (w.name.as_str(), BTreeMap::from([(w.pair.as_str(), w.label)])))
        .collect();
    let entries: Vec<CorpusEntry> = corpus.iter().map(LabeledWorkspace::entry).collect();
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| io(&p, e))
    };
    write("labels.json", serde_json::to_string_pretty(&labels).expect("labels serialize"))?;
    write("corpus.json", serde_json::to_string_pretty(&entries).expect("entries serialize"))
}

/// Reads `labels.json` back as workspace to pair to label.
pub fn read_labels(dir: &Path) -> Result<BTreeMap<String, BTreeMap<String, Label>>, CorpusError> {
    let p = dir.join("labels.json");
    let text = fs::read_to_string(&p).map_err(|e| io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| io(&p, e))
}
