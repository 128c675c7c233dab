//! `semconflict` command-line entry point.
//!
//! Exit status: 0 when no SC issue was found, 2 when at least one was, 1 on
//! any error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use semconflict_core::corpus::{read_labels, scoring_key, synthesize, write_corpus, CorpusOptions};
use semconflict_core::detector::{scan, Configs, Inventory, PairRecord};
use semconflict_core::diffexec::{classify, run_both};
use semconflict_core::miner::build_pool;
use semconflict_core::pipeline::{pair_seed, run_pipeline, PipelineOutput, RunManifest};
use semconflict_core::report::{metrics_table, score_against_truth, ConfusionMatrix, IssueReport, Label};
use semconflict_core::resolver::{resolve, Workspace};
use semconflict_core::testgen::{generate, GenerationReport};

const SEED_ENV: &str = "SEMCONFLICT_SEED";

#[derive(Parser)]
#[command(name = "semconflict", version, about = "Find semantic conflicts caused by shadowed dependency versions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List conflicting API pairs, their dependency paths and isomerism.
    Scan {
        workspace: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Mine constructor invocation contexts into an instance pool.
    Mine {
        workspace: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Generate covering tests for one pair.
    Testgen {
        workspace: PathBuf,
        /// Shadowed member id, e.g. `Core@1.0::Engine::compute(Int)->Int`.
        #[arg(long)]
        pair: String,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay generated tests under both configurations and classify.
    Diff {
        workspace: PathBuf,
        /// Output of `testgen`.
        #[arg(long)]
        tests: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Print the summary of a stored report.
    Report {
        report: PathBuf,
        /// Re-emit the JSON document instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Precision, recall and F-measure.
    Metrics {
        /// Confusion matrix as TP,FP,TN,FN; repeatable.
        #[arg(long = "cm", value_name = "TP,FP,TN,FN")]
        matrices: Vec<String>,
        /// Row name for each `--cm`, in order.
        #[arg(long = "name")]
        names: Vec<String>,
        /// Corpus `labels.json` to score `--predictions` against.
        #[arg(long, requires = "predictions")]
        labels: Option<PathBuf>,
        #[arg(long, requires = "labels")]
        predictions: Option<PathBuf>,
    },
    /// Labeled synthetic workspaces.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Full pipeline over one workspace, or every workspace of a corpus.
    Run {
        /// Workspace directory; taken from the manifest when omitted.
        workspace: Option<PathBuf>,
        /// Treat the directory as a corpus written by `corpus gen`.
        #[arg(long)]
        corpus: bool,
        #[command(flatten)]
        knobs: Knobs,
        /// Directory for the report and intermediate artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long = "sc", default_value_t = 20)]
        n_sc: usize,
        #[arg(long = "benign", default_value_t = 20)]
        n_benign: usize,
        #[arg(long)]
        out: PathBuf,
        /// Label bag reordering as a conflict.
        #[arg(long)]
        shuffle_is_sc: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Overrides applied on top of `--manifest` (or the defaults).
#[derive(Args, Default)]
struct Knobs {
    /// RunManifest JSON file.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dn: Option<usize>,
    #[arg(long)]
    depth_limit: Option<usize>,
    #[arg(long)]
    rn: Option<usize>,
    /// Wall-clock budget per repetition; 0 disables it.
    #[arg(long)]
    budget_ms: Option<u64>,
    #[arg(long, value_enum)]
    seeding: Option<Switch>,
    #[arg(long)]
    canonicalize_bags: bool,
    #[arg(long)]
    max_generations: Option<usize>,
}

impl Knobs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::from_json(&read(p)?).with_context(|| format!("reading {}", p.display()))?,
            None => RunManifest::default(),
        };
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Ok(s) = std::env::var(SEED_ENV) {
            m.seed = s.trim().parse().map_err(|_| anyhow!("{SEED_ENV}={s} is not an integer"))?;
        }
        if let Some(v) = self.dn {
            m.dn = v;
        }
        if let Some(v) = self.depth_limit {
            m.depth_limit = v;
        }
        if let Some(v) = self.rn {
            m.rn = v;
        }
        if let Some(v) = self.budget_ms {
            m.budget_ms = (v > 0).then_some(v);
        }
        if let Some(s) = self.seeding {
            m.seeding = matches!(s, Switch::On);
        }
        if let Some(v) = self.max_generations {
            m.max_generations = v;
        }
        m.canonicalize_bags |= self.canonicalize_bags;
        Ok(m)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<Workspace> {
    Workspace::load(path).with_context(|| format!("loading workspace {}", path.display()))
}

fn find_pair<'a>(inv: &'a Inventory, id: &str) -> Result<&'a PairRecord> {
    inv.pairs.iter().find(|p| p.pair.shadowed.to_string() == id).ok_or_else(|| {
        let known: Vec<String> = inv.pairs.iter().map(|p| p.pair.shadowed.to_string()).collect();
        anyhow!("no pair `{id}`; known pairs: {}", known.join(", "))
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn parse_cm(text: &str) -> Result<ConfusionMatrix> {
    let n: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("bad confusion matrix `{text}`, want TP,FP,TN,FN"))?;
    let [tp, fp, tn, fn_] = n[..] else {
        bail!("bad confusion matrix `{text}`, want four counts");
    };
    Ok(ConfusionMatrix::new(tp, fp, tn, fn_))
}

fn write_artifacts(dir: &Path, manifest: &RunManifest, out: &PipelineOutput, ws: &Workspace) -> Result<()> {
    let pool = build_pool(&resolve(ws)?, manifest.dn);
    write(&dir.join("manifest.json"), &manifest.to_json())?;
    write(&dir.join("inventory.json"), &out.inventory.to_json())?;
    write(&dir.join("pool.json"), &pool.to_json())?;
    write(&dir.join("tests.json"), &json(&out.generations))?;
    write(&dir.join("predictions.json"), &json(&out.predictions()))?;
    write(&dir.join("report.json"), &out.report.to_json())
}

fn run_one(path: &Path, manifest: &RunManifest, out: Option<&Path>) -> Result<u8> {
    let ws = load(path)?;
    let mut manifest = manifest.clone();
    manifest.workspace = Some(path.to_path_buf());
    let result = run_pipeline(&ws, &manifest)?;
    match out {
        Some(dir) => {
            write_artifacts(dir, &manifest, &result, &ws)?;
            print!("{}", result.report.summary());
        }
        None => println!("{}", result.report.to_json()),
    }
    Ok(result.exit_code() as u8)
}

fn run_corpus(dir: &Path, manifest: &RunManifest, out: Option<&Path>) -> Result<u8> {
    let labels = read_labels(dir)?;
    let mut predictions = BTreeMap::new();
    let mut any = false;
    for name in labels.keys() {
        let ws = load(&dir.join(name))?;
        let mut m = manifest.clone();
        m.workspace = Some(dir.join(name));
        let result = run_pipeline(&ws, &m)?;
        any |= result.report.has_issues();
        for (pair, sc) in result.predictions() {
            predictions.insert(scoring_key(name, &pair), sc);
        }
        if let Some(o) = out {
            write_artifacts(&o.join(name), &m, &result, &ws)?;
        }
        println!("{name}: {}", if result.report.has_issues() { "SC" } else { "no SC" });
    }
    let flat: BTreeMap<String, Label> = labels
        .iter()
        .flat_map(|(ws, pairs)| pairs.iter().map(move |(p, l)| (scoring_key(ws, p), *l)))
        .collect();
    let cm = score_against_truth(&predictions, &flat)?;
    print!("{}", metrics_table(&[("semconflict", cm)]));
    if let Some(o) = out {
        write(&o.join("predictions.json"), &json(&predictions))?;
    }
    Ok(if any { 2 } else { 0 })
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Scan { workspace, knobs } => {
            let m = knobs.manifest()?;
            let inv = scan(&load(&workspace)?, &m.detector_config())?;
            println!("{}", inv.to_json());
            Ok(0)
        }
        Command::Mine { workspace, knobs } => {
            let m = knobs.manifest()?;
            println!("{}", build_pool(&resolve(&load(&workspace)?)?, m.dn).to_json());
            Ok(0)
        }
        Command::Testgen {
            workspace,
            pair,
            knobs,
            out,
        } => {
            let m = knobs.manifest()?;
            let ga = m.ga_config();
            ga.validate()?;
            let ws = load(&workspace)?;
            let inv = scan(&ws, &m.detector_config())?;
            let record = find_pair(&inv, &pair)?;
            let configs = Configs::build(&ws, &record.pair.original)?;
            let pool = build_pool(&configs.actual, m.dn);
            let report = generate(&configs, record, &pool, &ga, pair_seed(m.seed, &pair));
            for t in &report.tests {
                eprintln!("{t}");
            }
            emit(out.as_deref(), &json(&report))?;
            Ok(0)
        }
        Command::Diff {
            workspace,
            tests,
            knobs,
        } => {
            let m = knobs.manifest()?;
            let gen: GenerationReport = serde_json::from_str(&read(&tests)?).context("parsing tests")?;
            let ws = load(&workspace)?;
            let inv = scan(&ws, &m.detector_config())?;
            let record = find_pair(&inv, &gen.target.to_string())?;
            let configs = Configs::build(&ws, &record.pair.original)?;
            let outcomes: Vec<_> = gen.tests.iter().map(|t| run_both(t, &configs, m.step_limit)).collect();
            let verdict = classify(&record.pair, &outcomes, m.canonicalize_bags);
            println!(
                "{}",
                json(&serde_json::json!({ "outcomes": outcomes, "verdict": verdict }))
            );
            Ok(if verdict.is_sc { 2 } else { 0 })
        }
        Command::Report { report, json } => {
            let r = IssueReport::from_json(&read(&report)?)?;
            if json {
                println!("{}", r.to_json());
            } else {
                print!("{}", r.summary());
            }
            Ok(if r.has_issues() { 2 } else { 0 })
        }
        Command::Metrics {
            matrices,
            names,
            labels,
            predictions,
        } => {
            let mut rows: Vec<(String, ConfusionMatrix)> = Vec::new();
            for (i, text) in matrices.iter().enumerate() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("row{}", i + 1));
                rows.push((name, parse_cm(text)?));
            }
            if let (Some(l), Some(p)) = (labels, predictions) {
                let labels: BTreeMap<String, BTreeMap<String, Label>> = serde_json::from_str(&read(&l)?)?;
                let flat = labels
                    .iter()
                    .flat_map(|(ws, pairs)| pairs.iter().map(move |(p, l)| (scoring_key(ws, p), *l)))
                    .collect();
                let preds: BTreeMap<String, bool> = serde_json::from_str(&read(&p)?)?;
                rows.push(("predictions".into(), score_against_truth(&preds, &flat)?));
            }
            if rows.is_empty() {
                bail!("nothing to score: pass --cm or --labels with --predictions");
            }
            let refs: Vec<(&str, ConfusionMatrix)> = rows.iter().map(|(n, c)| (n.as_str(), *c)).collect();
            print!("{}", metrics_table(&refs));
            Ok(0)
        }
        Command::Corpus {
            command:
                CorpusCommand::Gen {
                    seed,
                    n_sc,
                    n_benign,
                    out,
                    shuffle_is_sc,
                },
        } => {
            let seed = match std::env::var(SEED_ENV) {
                Ok(s) => s.trim().parse().map_err(|_| anyhow!("{SEED_ENV}={s} is not an integer"))?,
                Err(_) => seed,
            };
            let corpus = synthesize(seed, n_sc, n_benign, CorpusOptions { shuffle_is_sc })?;
            write_corpus(&out, &corpus)?;
            println!("wrote {} workspaces to {}", corpus.len(), out.display());
            Ok(0)
        }
        Command::Run {
            workspace,
            corpus,
            knobs,
            out,
        } => {
            let m = knobs.manifest()?;
            let path = workspace
                .or_else(|| m.workspace.clone())
                .ok_or_else(|| anyhow!("no workspace given on the command line or in the manifest"))?;
            if corpus {
                run_corpus(&path, &m, out.as_deref())
            } else {
                run_one(&path, &m, out.as_deref())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Interpreter recursion needs more than the default main-thread stack.
    let worker = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(move || execute(cli))
        .expect("spawn worker");
    match worker.join() {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}
