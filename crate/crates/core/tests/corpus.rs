use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semconflict_core::corpus::{
    apply_mutation, bump, depth_fixture, flat_labels, probe, read_labels, synthesize, write_corpus, CorpusError,
    CorpusOptions, MutationOperator, PROBE_SAMPLES,
};
use semconflict_core::detector::{canonical_body, scan, DetectorConfig};
use semconflict_core::lang::ast::SourceUnit;
use semconflict_core::lang::{normalize, parse, pretty};
use semconflict_core::report::Label;
use semconflict_core::resolver::{resolve, Workspace};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(src: &str) -> SourceUnit {
    parse(src).unwrap()
}

#[test]
fn constant_change_bumps_a_literal() {
    let u = unit("library L v1.0 { public class A { new() {} public method f() -> Int { return 7; } } }");
    let (m, trace) = apply_mutation(&u, MutationOperator::ConstantChange, &mut rng(0)).unwrap();
    assert!(pretty(&m).contains("return 8;"), "{}", pretty(&m));
    assert_eq!((m.version.as_str(), trace.from_version.as_str()), ("2.0", "1.0"));
    assert_eq!(trace.detail, "7 -> 8");
    assert_eq!(trace.method.name, "f");
}

#[test]
fn comparison_operands_are_not_constant_changed() {
    let u = unit("library L v1.0 { public class A { new() {} public method f(x: Int) -> Int { if (x > 3) { return 1; } return 1; } } }");
    for s in 0..20 {
        let (m, _) = apply_mutation(&u, MutationOperator::ConstantChange, &mut rng(s)).unwrap();
        assert!(pretty(&m).contains("x > 3"));
    }
}

#[test]
fn inapplicable_operator_is_reported() {
    let u = unit("library L v1.0 { public class A { new() {} public method f() -> Str { return \"s\"; } } }");
    for op in [
        MutationOperator::ConstantChange,
        MutationOperator::BranchAdd,
        MutationOperator::PostconditionWeaken,
        MutationOperator::BagOrderShuffle,
        MutationOperator::ExtractMethod,
    ] {
        assert!(matches!(apply_mutation(&u, op, &mut rng(1)), Err(CorpusError::NotApplicable(_))), "{op}");
    }
}

#[test]
fn version_bump_is_major() {
    assert_eq!(bump("1.0"), "2.0");
    assert_eq!(bump("3.4.1"), "4.0.0");
}

const ENGINE: &str = "library Core v1.0 { public class Engine { field scale: Int; new(scale: Int) { this.scale = scale; }
    public method compute(p: Int) -> Int { let a = p * this.scale; let c = p + 3; let b = a + 4;
      if (a > 10) { b = b - 2; } b = b * 2; return b + c; }
    public method collect(p: Int) -> Bag { let first = p + 1; let second = p * 2; return bag[first, second, 9]; } } }";

#[test]
fn local_rename_is_alpha_equivalent() {
    let u = unit(ENGINE);
    let (m, trace) = apply_mutation(&u, MutationOperator::LocalRename, &mut rng(2)).unwrap();
    let before = u.classes[0].methods.iter().find(|x| x.signature() == trace.method).unwrap();
    let after = m.classes[0].methods.iter().find(|x| x.signature() == trace.method).unwrap();
    assert_ne!(normalize(before), normalize(after));
    let canon = |x: &semconflict_core::lang::ast::MethodDecl| normalize(&canonical_body(&x.params, &x.body).1);
    assert_eq!(canon(before), canon(after));
}

#[test]
fn extract_method_preserves_probe_snapshots() {
    let u = unit(ENGINE);
    let (m, trace) = apply_mutation(&u, MutationOperator::ExtractMethod, &mut rng(3)).unwrap();
    assert_eq!(trace.method.name, "compute");
    let c = &m.classes[0];
    assert_eq!(c.methods.len(), 3);
    assert!(c.methods.iter().any(|x| x.name == "computePart1"));
    let p = probe(&u, &m, "Engine", &trace.method, &[3], PROBE_SAMPLES, false, &mut rng(4)).unwrap();
    assert_eq!((p.samples, p.differing), (PROBE_SAMPLES, 0));
}

#[test]
fn bag_shuffle_differs_only_in_order() {
    let u = unit(ENGINE);
    let (m, trace) = apply_mutation(&u, MutationOperator::BagOrderShuffle, &mut rng(5)).unwrap();
    let strict = probe(&u, &m, "Engine", &trace.method, &[1], 20, false, &mut rng(6)).unwrap();
    let canon = probe(&u, &m, "Engine", &trace.method, &[1], 20, true, &mut rng(6)).unwrap();
    assert!(strict.differing > 0 && strict.witness.is_some());
    assert_eq!(canon.differing, 0);
}

#[test]
fn every_semantic_operator_applies_to_the_engine() {
    let u = unit(ENGINE);
    for op in MutationOperator::ALL {
        let (m, t) = apply_mutation(&u, op, &mut rng(7)).unwrap_or_else(|e| panic!("{op}: {e}"));
        assert_eq!(t.operator, op);
        // The mutant prints and reparses to the same tree.
        assert_eq!(normalize(&parse(&pretty(&m)).unwrap()), normalize(&m));
    }
}

#[test]
fn single_sc_workspace_has_a_witness() {
    let c = synthesize(1, 1, 0, CorpusOptions::default()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].label, Label::Sc);
    let w = c[0].probe.witness.as_ref().unwrap();
    assert_ne!(w.base, w.mutated);
}

#[test]
fn single_benign_workspace_matches_on_every_probe() {
    let c = synthesize(1, 0, 1, CorpusOptions::default()).unwrap();
    assert_eq!(c[0].label, Label::Benign);
    assert_eq!((c[0].probe.samples, c[0].probe.differing), (PROBE_SAMPLES, 0));
}

#[test]
fn synthesis_is_deterministic_and_link_clean() {
    let a = synthesize(9, 5, 5, CorpusOptions::default()).unwrap();
    let b = synthesize(9, 5, 5, CorpusOptions::default()).unwrap();
    assert_eq!(a, b);
    for w in &a {
        let ws = &w.workspace;
        assert!(resolve(ws).unwrap().check().is_empty(), "{}", w.name);
        let inv = scan(ws, &DetectorConfig::default()).unwrap();
        assert!(inv.pairs.iter().any(|p| p.pair.shadowed.to_string() == w.pair), "{}", w.name);
        match w.label {
            Label::Sc => assert!(w.probe.witness.is_some()),
            Label::Benign => assert_eq!(w.probe.differing, 0),
        }
    }
}

#[test]
fn shuffle_flag_flips_the_label() {
    let on = synthesize(2, 0, 4, CorpusOptions { shuffle_is_sc: true }).unwrap();
    let shuffle = on.iter().find(|w| w.trace.operator == MutationOperator::BagOrderShuffle).unwrap();
    assert_eq!(shuffle.label, Label::Sc);
    assert!(shuffle.probe.witness.is_some());
}

#[test]
fn corpus_round_trips_through_disk() {
    let c = synthesize(4, 2, 2, CorpusOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &c).unwrap();
    let labels = read_labels(dir.path()).unwrap();
    assert_eq!(labels.len(), 4);
    let flat: usize = labels.values().map(|m| m.len()).sum();
    assert_eq!(flat, flat_labels(&c).len());
    for w in &c {
        assert_eq!(labels[&w.name][&w.pair], w.label);
        assert_eq!(Workspace::load(&dir.path().join(&w.name)).unwrap(), w.workspace);
    }
}

#[test]
fn depth_fixture_builds() {
    for d in [2, 9, 11] {
        let ws = depth_fixture(d).unwrap();
        assert!(resolve(&ws).unwrap().check().is_empty());
    }
}
