//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints one line, and the process fails if any check fails.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semconflict_core::corpus::{
    depth_fixture, flat_labels, scoring_key, synthesize, CorpusOptions, LabeledWorkspace, MutationOperator,
};
use semconflict_core::detector::{scan, DetectorConfig};
use semconflict_core::diffexec::InconsistencyKind;
use semconflict_core::lang::arbitrary::{arbitrary_unit, GEN_LIBRARY};
use semconflict_core::lang::ast::{Signature, TypeTag};
use semconflict_core::lang::reference::reference_evaluate;
use semconflict_core::lang::snapshot::snap_value;
use semconflict_core::lang::{evaluate_entry, Input, Value};
use semconflict_core::pipeline::{run_pipeline, PipelineOutput, RunManifest};
use semconflict_core::report::{compute_metrics, score_against_truth, Label, MetricSet};
use semconflict_core::resolver::{ApiRef, ResolvedProgram};
use semconflict_core::testgen::seeding_probability;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 0.001
}

fn metric_arithmetic() -> Check {
    let rows = [((57, 14, 136, 18), (0.803, 0.760, 0.781)), ((6, 2, 148, 69), (0.750, 0.080, 0.145))];
    let mut out = Vec::new();
    let mut ok = true;
    for ((tp, fp, tn, fn_), (p, r, f)) in rows {
        let m = compute_metrics(&semconflict_core::report::ConfusionMatrix::new(tp, fp, tn, fn_));
        ok &= near(m.precision, p) && near(m.recall, r) && near(m.f_measure, f);
        out.push(format!("({tp},{fp},{tn},{fn_}) -> {}", show(&m)));
    }
    ensure(ok, out.join("; "))
}

fn show(m: &MetricSet) -> String {
    format!("P={:.3} R={:.3} F={:.3}", m.precision, m.recall, m.f_measure)
}

/// Runs the pipeline over every workspace on big-stack worker threads.
fn run_corpus(corpus: &[LabeledWorkspace], manifest: &RunManifest) -> Vec<PipelineOutput> {
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(8);
    let mut out: Vec<Option<PipelineOutput>> = vec![None; corpus.len()];
    for (chunk_in, chunk_out) in corpus.chunks(workers).zip(out.chunks_mut(workers)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_in
                .iter()
                .map(|w| {
                    std::thread::Builder::new()
                        .stack_size(64 << 20)
                        .spawn_scoped(s, move || run_pipeline(&w.workspace, manifest).expect("pipeline runs"))
                        .expect("spawn")
                })
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("worker"));
            }
        });
    }
    out.into_iter().map(|o| o.expect("filled")).collect()
}

fn predictions(corpus: &[LabeledWorkspace], outputs: &[PipelineOutput]) -> BTreeMap<String, bool> {
    corpus
        .iter()
        .zip(outputs)
        .flat_map(|(w, o)| {
            o.predictions()
                .into_iter()
                .map(move |(pair, sc)| (scoring_key(&w.name, &pair), sc))
        })
        .collect()
}

fn metrics_for(corpus: &[LabeledWorkspace], outputs: &[PipelineOutput]) -> Result<MetricSet, String> {
    let cm = score_against_truth(&predictions(corpus, outputs), &flat_labels(corpus)).map_err(|e| e.to_string())?;
    Ok(compute_metrics(&cm))
}

struct CorpusRuns {
    corpus: Vec<LabeledWorkspace>,
    seeded: Vec<PipelineOutput>,
    unseeded: Vec<PipelineOutput>,
    seconds: f64,
}

fn corpus_detection(runs: &CorpusRuns) -> Check {
    let m = metrics_for(&runs.corpus, &runs.seeded)?;
    ensure(
        m.precision >= 0.75 && m.recall >= 0.70 && runs.seconds <= 900.0,
        format!("{} in {:.1}s", show(&m), runs.seconds),
    )
}

fn baseline_gap(runs: &CorpusRuns) -> Check {
    let on = metrics_for(&runs.corpus, &runs.seeded)?;
    let off = metrics_for(&runs.corpus, &runs.unseeded)?;
    ensure(
        off.recall <= on.recall / 2.0,
        format!("recall seeding on {:.3}, off {:.3}", on.recall, off.recall),
    )
}

fn depth_cutoff() -> Check {
    let iso = |d: usize| -> Result<bool, String> {
        let ws = depth_fixture(d).map_err(|e| e.to_string())?;
        let inv = scan(&ws, &DetectorConfig::default()).map_err(|e| e.to_string())?;
        let pair = inv
            .pairs
            .iter()
            .find(|p| p.pair.shadowed.signature.name == "compute")
            .ok_or("no compute pair")?;
        Ok(pair.pair.isomerous == Some(true))
    };
    let (d11, d9) = (iso(11)?, iso(9)?);
    ensure(!d11 && d9, format!("depth 11 isomerous={d11}, depth 9 isomerous={d9}"))
}

fn seeding_grid() -> Check {
    let p = |d, t| seeding_probability(d, t).map_err(|e| e.to_string());
    let mut ok = p(1, 0)? == 1.0;
    for d in 1..=20usize {
        for t in 0..20u64 {
            let v = p(d, t)?;
            ok &= v > 0.0 && v <= 1.0;
            ok &= p(d + 1, t)? < v && p(d, t + 1)? < v;
        }
    }
    ensure(ok, "P(1,0)=1, strictly decreasing on 20x20, range (0,1]".into())
}

fn shuffle_false_positive(runs: &CorpusRuns) -> Check {
    let idx = runs
        .corpus
        .iter()
        .position(|w| w.trace.operator == MutationOperator::BagOrderShuffle)
        .ok_or("corpus has no bag-order-shuffle workspace")?;
    let w = &runs.corpus[idx];
    let off = runs.seeded[idx].report.has_issues();
    let manifest = RunManifest {
        canonicalize_bags: true,
        ..RunManifest::default()
    };
    let on = run_corpus(std::slice::from_ref(w), &manifest)[0].report.has_issues();
    ensure(off && !on, format!("{}: flagged off={off}, flagged on={on}", w.name))
}

fn interpreter_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let entry = ApiRef {
        library: GEN_LIBRARY.into(),
        version: "1.0".into(),
        class: "C0".into(),
        signature: Signature {
            name: "m0".into(),
            params: vec![TypeTag::Int],
            ret: TypeTag::Int,
        },
    };
    let mut mismatches = Vec::new();
    for i in 0..200 {
        let unit = arbitrary_unit(&mut rng);
        let p = ResolvedProgram::standalone(vec![unit]).map_err(|e| e.to_string())?;
        let receiver = Input::New {
            class: "C0".into(),
            args: vec![Input::Value(Value::Int(rng.gen_range(-5..20)))],
        };
        let args = [Input::Value(Value::Int(rng.gen_range(-30..60)))];
        let a = evaluate_entry(&p, &entry, &receiver, &args, 2_000);
        let b = reference_evaluate(&p, &entry, &receiver, &args, 2_000);
        let snap = |o: &semconflict_core::lang::ExecutionOutcome| {
            o.return_value.as_ref().map(|v| snap_value(&o.heap_snapshot, v))
        };
        let same = a.status == b.status
            && a.return_value == b.return_value
            && a.error.as_ref().map(|e| e.kind) == b.error.as_ref().map(|e| e.kind)
            && a.heap_snapshot == b.heap_snapshot
            && a.reads == b.reads
            && snap(&a) == snap(&b);
        if !same {
            mismatches.push(i);
        }
    }
    ensure(
        mismatches.is_empty(),
        format!("200 programs, {} mismatches {:?}", mismatches.len(), mismatches),
    )
}

fn determinism(runs: &CorpusRuns) -> Check {
    let idx = runs.corpus.iter().position(|w| w.label == Label::Sc).ok_or("no sc workspace")?;
    let again = run_corpus(&runs.corpus[idx..=idx], &RunManifest::default());
    let (a, b) = (runs.seeded[idx].report.to_json(), again[0].report.to_json());
    ensure(a == b, format!("{}: {} bytes, identical={}", runs.corpus[idx].name, a.len(), a == b))
}

fn taxonomy(runs: &CorpusRuns) -> Check {
    let (mut agree, mut total) = (0, 0);
    let mut bad = Vec::new();
    for (w, o) in runs.corpus.iter().zip(&runs.seeded) {
        let want: &[InconsistencyKind] = match w.trace.operator {
            MutationOperator::PreconditionStrengthen | MutationOperator::PostconditionWeaken => {
                &[InconsistencyKind::TestOutcome, InconsistencyKind::Both]
            }
            MutationOperator::ConstantChange => &[InconsistencyKind::VariableState],
            _ => continue,
        };
        total += 1;
        let got = o.report.diffs.iter().find(|d| d.pair == w.pair).map(|d| d.kind);
        if got.is_some_and(|k| want.contains(&k)) {
            agree += 1;
        } else {
            bad.push(format!("{} got {got:?}", w.name));
        }
    }
    ensure(
        total > 0 && agree == total,
        format!("{agree}/{total} pairs match their mutation trace {bad:?}"),
    )
}

fn main() {
    // Deeply nested random programs need more than the main thread's stack.
    let code = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(run_checks)
        .expect("spawn")
        .join()
        .expect("checks ran");
    std::process::exit(code);
}

fn run_checks() -> i32 {
    let mut failed = 0;
    let mut report = |name: &str, r: Check| match r {
        Ok(d) => println!("PASS {name}: {d}"),
        Err(d) => {
            failed += 1;
            println!("FAIL {name}: {d}");
        }
    };
    report("1 metric arithmetic", metric_arithmetic());

    let start = Instant::now();
    let corpus = synthesize(42, 20, 20, CorpusOptions::default()).expect("corpus generates");
    let seeded = run_corpus(&corpus, &RunManifest::default());
    let seconds = start.elapsed().as_secs_f64();
    let unseeded = run_corpus(
        &corpus,
        &RunManifest {
            seeding: false,
            ..RunManifest::default()
        },
    );
    let runs = CorpusRuns {
        corpus,
        seeded,
        unseeded,
        seconds,
    };
    report("2 corpus detection", corpus_detection(&runs));
    report("3 seeding baseline gap", baseline_gap(&runs));
    report("4 depth cutoff", depth_cutoff());
    report("5 seeding probability", seeding_grid());
    report("6 bag-order false positive", shuffle_false_positive(&runs));
    report("7 interpreter oracle", interpreter_oracle());
    report("8 report determinism", determinism(&runs));
    report("9 inconsistency taxonomy", taxonomy(&runs));
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        return 1;
    }
    println!("all acceptance checks passed");
    0
}
