use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semconflict_core::detector::{build_call_graph, paths_to};
use semconflict_core::lang::ast::TypeTag;
use semconflict_core::lang::{parse, Value};
use semconflict_core::miner::{build_pool, InstancePool, DEFAULT_DN};
use semconflict_core::resolver::{Callable, ResolvedProgram};
use semconflict_core::testgen::{
    generate_for, random_value, seeding_probability, EntryCall, FitnessTarget, GAConfig, GenerationReport, Origin,
    Statement, TestCase, TestgenError, INT_RANGE,
};

fn program(src: &str) -> ResolvedProgram {
    ResolvedProgram::standalone(vec![parse(src).unwrap()]).unwrap()
}

fn method(p: &ResolvedProgram, class: &str, name: &str) -> Callable {
    let id = p.class_id(class).unwrap();
    let h = p.methods(id).find(|h| p.method_decl(*h).name == name).unwrap();
    Callable::Method(h)
}

fn search(p: &ResolvedProgram, target: Callable, pool: &InstancePool, config: &GAConfig, seed: u64) -> GenerationReport {
    let g = build_call_graph(p);
    let paths = paths_to(&g, target, 8);
    generate_for(p, &g, target, &paths, pool, config, seed)
}

fn quick() -> GAConfig {
    GAConfig {
        budget_ms: None,
        max_generations: 20,
        ..GAConfig::default()
    }
}

#[test]
fn seeding_probability_examples() {
    assert_eq!(seeding_probability(1, 0).unwrap(), 1.0);
    assert!((seeding_probability(2, 4).unwrap() - 0.1).abs() < 1e-12);
    assert!((seeding_probability(4, 1).unwrap() - 0.125).abs() < 1e-12);
    assert_eq!(seeding_probability(0, 3), Err(TestgenError::Domain(0)));
}

proptest! {
    #[test]
    fn seeding_probability_decreases(d in 1usize..50, t in 0u64..50) {
        let p = seeding_probability(d, t).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!(seeding_probability(d + 1, t).unwrap() < p);
        prop_assert!(seeding_probability(d, t + 1).unwrap() < p);
    }
}

#[test]
fn random_values_stay_in_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut odd_char = false;
    let (mut t, mut f) = (false, false);
    for _ in 0..10_000 {
        let Value::Int(i) = random_value(&TypeTag::Int, &mut rng) else { panic!() };
        assert!(INT_RANGE.contains(&i));
        let Value::Str(s) = random_value(&TypeTag::Str, &mut rng) else { panic!() };
        assert!(s.chars().count() <= 10);
        odd_char |= s.chars().any(|c| !c.is_ascii_alphanumeric());
        match random_value(&TypeTag::Bool, &mut rng) {
            Value::Bool(true) => t = true,
            Value::Bool(false) => f = true,
            v => panic!("{v:?}"),
        }
    }
    assert!(odd_char && t && f);
}

const GUARDED: &str = "library App v1.0 {
    public class Svc { new() {}
      public method run(x: Int) -> Int { require(x > 0); return this.target(x); }
      internal method target(x: Int) -> Int { return x + 1; } }
    public class Picky { field ok: Int; new(v: Int) { require(v == 4242); this.ok = v; }
      public method go() -> Int { let s = new Svc(); return s.run(this.ok); } }
}";

fn test_for(p: &ResolvedProgram, class: &str, entry: &str, statements: Vec<Statement>, args: Vec<usize>) -> TestCase {
    let api = p.callable_ref(method(p, class, entry));
    TestCase {
        entry: EntryCall {
            api,
            receiver: 0,
            args,
        },
        statements,
        rng_seed: 0,
    }
}

fn svc_test(p: &ResolvedProgram, x: i64) -> TestCase {
    test_for(
        p,
        "Svc",
        "run",
        vec![
            Statement::Construct {
                class: "Svc".into(),
                args: vec![],
                origin: Origin::Random,
            },
            Statement::Literal { value: Value::Int(x) },
        ],
        vec![1],
    )
}

fn target(p: &ResolvedProgram) -> FitnessTarget {
    let g = build_call_graph(p);
    let t = method(p, "Svc", "target");
    FitnessTarget::new(p, &g, t, &paths_to(&g, t, 8))
}

#[test]
fn covering_test_scores_zero() {
    let p = program(GUARDED);
    let ft = target(&p);
    let t = svc_test(&p, 5);
    let s = ft.score(&t.entry.api, &t.execute(&p, 10_000, true));
    assert!(s.covered);
    assert_eq!((s.approach_level, s.branch_distance), (0, 0.0));
}

#[test]
fn missed_require_distance_grows_with_gap() {
    let p = program(GUARDED);
    let ft = target(&p);
    let score = |x| {
        let t = svc_test(&p, x);
        ft.score(&t.entry.api, &t.execute(&p, 10_000, true))
    };
    let (far, near) = (score(-3), score(-1));
    assert!(!far.covered && !near.covered);
    // 0 - (-3) + 1 = 4, normalized 4/5.
    assert!((far.branch_distance - 0.8).abs() < 1e-12);
    assert!((near.branch_distance - 2.0 / 3.0).abs() < 1e-12);
    assert!(far.branch_distance > near.branch_distance);
    assert_eq!(far.approach_level, near.approach_level);
}

#[test]
fn constructor_crash_takes_full_depth() {
    let p = program(GUARDED);
    let ft = target(&p);
    let t = test_for(
        &p,
        "Picky",
        "go",
        vec![
            Statement::Literal { value: Value::Int(1) },
            Statement::Construct {
                class: "Picky".into(),
                args: vec![0],
                origin: Origin::Random,
            },
        ],
        vec![],
    );
    let t = TestCase {
        entry: EntryCall { receiver: 1, ..t.entry },
        ..t
    };
    let s = ft.score(&t.entry.api, &t.execute(&p, 10_000, true));
    assert_eq!(Some(s.approach_level), ft.control_depth(&t.entry.api));
    assert!(s.approach_level >= 3);
}

proptest! {
    #[test]
    fn zero_fitness_iff_covered(x in -2000i64..2000) {
        let p = program(GUARDED);
        let ft = target(&p);
        let t = svc_test(&p, x);
        let run = t.execute(&p, 10_000, true);
        let s = ft.score(&t.entry.api, &run);
        let hit = run.trace.as_ref().unwrap().entered.contains(&ft.target);
        prop_assert_eq!(s.total() == 0.0, hit);
        prop_assert_eq!(s.covered, hit);
        prop_assert!(s.branch_distance < 1.0);
    }
}

#[test]
fn no_arg_entry_is_covered_in_first_generation() {
    let p = program(
        "library App v1.0 {
            public class Svc { new() {}
              public method run() -> Int { return this.t(); }
              internal method t() -> Int { return 3; } }
        }",
    );
    let r = search(&p, method(&p, "Svc", "t"), &InstancePool::default(), &quick(), 1);
    assert_eq!(r.tests.len(), 10);
    assert!(r.repetitions.iter().all(|x| x.covered && x.generations == 0));
    assert!(r.tests.iter().all(TestCase::is_well_formed));
}

const ENDPOINT: &str = r#"library App v1.0 {
    public class Endpoint { field path: Str; field port: Int;
      new(path: Str, port: Int) { require(path == "/endpoint"); require(port == 9200); this.path = path; this.port = port; } }
    internal class Setup { new() {}
      internal method make() -> Endpoint { return new Endpoint("/endpoint", 9200); } }
    public class Svc { new() {}
      public method run(ep: Endpoint, x: Int) -> Int { return this.send(ep.port, x); }
      internal method send(port: Int, x: Int) -> Int { return port + x; } }
}"#;

#[test]
fn seeding_reaches_guarded_construction() {
    let p = program(ENDPOINT);
    let pool = build_pool(&p, DEFAULT_DN);
    let t = method(&p, "Svc", "send");
    let on = search(&p, t, &pool, &quick(), 7);
    assert_eq!(on.tests.len(), 10, "{on:?}");
    assert!(on.tests.iter().all(|t| t.pool_ratio() > 0.0));
    let mut off_config = quick();
    off_config.seeding_enabled = false;
    let off = search(&p, t, &pool, &off_config, 7);
    assert!(off.tests.is_empty());
    assert!(off.repetitions.iter().all(|r| r.seeded == 0));
}

#[test]
fn seeding_counters_match_pool_use() {
    let p = program(ENDPOINT);
    let pool = build_pool(&p, DEFAULT_DN);
    let r = search(&p, method(&p, "Svc", "send"), &pool, &quick(), 3);
    assert!(r.repetitions.iter().all(|x| x.seeded >= 1));
    // The caller's pool is untouched; every search works on its own copy.
    assert_eq!(pool.total_seeded(), 0);
}

#[test]
fn generation_is_deterministic() {
    let p = program(ENDPOINT);
    let pool = build_pool(&p, DEFAULT_DN);
    let t = method(&p, "Svc", "send");
    let a = search(&p, t, &pool, &quick(), 99);
    let b = search(&p, t, &pool, &quick(), 99);
    assert_eq!(a, b);
    let text = a.tests[0].to_string();
    assert!(text.contains("new Endpoint(") && text.contains("// pool"), "{text}");
    let back: TestCase = serde_json::from_str(&a.tests[0].to_json()).unwrap();
    assert_eq!(back, a.tests[0]);
}

#[test]
fn search_climbs_toward_guarded_branch() {
    let p = program(
        "library App v1.0 {
            public class Svc { new() {}
              public method run(x: Int) -> Int { if (x == 1500) { return this.t(); } return 0; }
              internal method t() -> Int { return 3; } }
        }",
    );
    let config = GAConfig {
        repetitions: 3,
        max_generations: 200,
        ..quick()
    };
    let r = search(&p, method(&p, "Svc", "t"), &InstancePool::default(), &config, 5);
    assert!(!r.tests.is_empty(), "{:?}", r.repetitions);
}
