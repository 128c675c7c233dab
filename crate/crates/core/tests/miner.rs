use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semconflict_core::lang::{parse, Machine, Value};
use semconflict_core::miner::{
    build_pool, collect_constructors, instantiate, mine_contexts, ArgBinding, InvocationContext, SiteIndex,
    DEFAULT_DN,
};
use semconflict_core::resolver::ResolvedProgram;

fn program(src: &str) -> ResolvedProgram {
    ResolvedProgram::standalone(vec![parse(src).unwrap()]).unwrap()
}

fn contexts(p: &ResolvedProgram, class: &str, dn: usize) -> Vec<InvocationContext> {
    let index = SiteIndex::new(p);
    let id = p.class_id(class).unwrap();
    p.ctors(id).flat_map(|h| mine_contexts(h, &index, dn)).collect()
}

fn lit(b: &ArgBinding) -> &Value {
    match b {
        ArgBinding::Literal { value } => value,
        other => panic!("expected literal, got {other:?}"),
    }
}

#[test]
fn constructor_sets() {
    let p = program(
        "library App v1.0 {
            public class Two { new() {} new(x: Int) {} }
            internal class Hidden { new() {} }
            public class Plain { new() {} }
        }",
    );
    assert_eq!(collect_constructors("Two", &p).constructors.len(), 2);
    assert!(collect_constructors("Hidden", &p).constructors.is_empty());
    let plain = collect_constructors("Plain", &p);
    assert_eq!(plain.constructors.len(), 1);
    assert!(plain.constructors[0].signature.params.is_empty());
}

#[test]
fn case1_latest_dominating_assignment() {
    let p = program(
        r#"library App v1.0 {
            public class Fmt { field pattern: Str; new(p: Str) { this.pattern = p; } }
            public class Use { new() {}
              method make() -> Fmt {
                let s = "dd/mm";
                if (true) { s = "ignored"; }
                s = "yyyy-mm-dd";
                return new Fmt(s);
              } }
        }"#,
    );
    let ctx = contexts(&p, "Fmt", DEFAULT_DN);
    assert_eq!(ctx.len(), 1);
    assert_eq!(lit(&ctx[0].bindings[0]), &Value::Str("yyyy-mm-dd".into()));
    assert_eq!(ctx[0].depth, 1);
    assert_eq!(ctx[0].provenance.len(), 1);
}

#[test]
fn nested_construction_literals() {
    let p = program(
        r#"library App v1.0 {
            public class EsClient { field host: Str; field port: Int;
              new(host: Str, port: Int) { this.host = host; this.port = port; } }
            public class Index { field client: EsClient; new(c: EsClient) { this.client = c; } }
            public class Setup { new() {}
              method build() -> Index { let client = new EsClient("localhost", 9200); return new Index(client); } }
        }"#,
    );
    let ctx = contexts(&p, "Index", DEFAULT_DN);
    let ArgBinding::Construct { context } = &ctx[0].bindings[0] else {
        panic!("{:?}", ctx[0].bindings[0])
    };
    assert_eq!(lit(&context.bindings[0]), &Value::Str("localhost".into()));
    assert_eq!(lit(&context.bindings[1]), &Value::Int(9200));
    assert_eq!(ctx[0].depth, 2);
}

#[test]
fn case2_caller_parameter() {
    let p = program(
        r#"library App v1.0 {
            public class Conn { field port: Int; new(port: Int) { this.port = port; } }
            public class Setup { new() {}
              method open(port: Int) -> Conn { return new Conn(port); }
              method main() -> Conn { return this.open(9300); } }
        }"#,
    );
    // `open` is public, so it is a boundary for case 2.
    let ctx = contexts(&p, "Conn", DEFAULT_DN);
    assert!(matches!(ctx[0].bindings[0], ArgBinding::Random { .. }));

    let p = program(
        r#"library App v1.0 {
            public class Conn { field port: Int; new(port: Int) { this.port = port; } }
            public class Setup { new() {}
              internal method open(port: Int) -> Conn { return new Conn(port); }
              method main() -> Conn { return this.open(9300); } }
        }"#,
    );
    let ctx = contexts(&p, "Conn", DEFAULT_DN);
    let ArgBinding::CallerParam { binding, param, .. } = &ctx[0].bindings[0] else {
        panic!("{:?}", ctx[0].bindings[0])
    };
    assert_eq!(param, "port");
    assert_eq!(lit(binding), &Value::Int(9300));
    assert_eq!(ctx[0].depth, 2);
}

#[test]
fn case3_call_result() {
    let p = program(
        r#"library App v1.0 {
            public class ConfigMain { new() {}
              public method getParameter(key: Str, dflt: Str) -> Str { return dflt; } }
            public class Client { field host: Str; new(h: Str) { this.host = h; } }
            public class Setup { new() {}
              method build() -> Client {
                let cfg = new ConfigMain();
                let host = cfg.getParameter("elasticsearch.host", "9205");
                return new Client(host);
              } }
        }"#,
    );
    let ctx = contexts(&p, "Client", DEFAULT_DN);
    let ArgBinding::CallResult { method, receiver, args } = &ctx[0].bindings[0] else {
        panic!("{:?}", ctx[0].bindings[0])
    };
    assert_eq!(method.signature.name, "getParameter");
    assert!(matches!(**receiver, ArgBinding::Construct { .. }));
    assert_eq!(lit(&args[0]), &Value::Str("elasticsearch.host".into()));
    assert_eq!(lit(&args[1]), &Value::Str("9205".into()));

    let mut m = Machine::new(&p, 10_000);
    let v = instantiate(&ctx[0], &mut m, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(m.field(v.as_obj().unwrap(), "host"), Some(&Value::Str("9205".into())));
}

#[test]
fn no_parameterized_constructors() {
    let p = program(
        "library App v1.0 { public class A { new() {} } public class B { new() {} method f() -> A { return new A(); } } }",
    );
    let pool = build_pool(&p, DEFAULT_DN);
    for (class, entries) in &pool.entries {
        assert!(!entries.is_empty(), "{class}");
        assert!(entries.iter().all(|e| e.context.depth == 1));
    }
    // The explicit site duplicates the trivial context.
    assert_eq!(pool.contexts("A").len(), 1);
    assert_eq!(pool.mined, 3);
}

#[test]
fn depth_limit_falls_back_to_random() {
    let p = program(
        "library App v1.0 {
            public class N { field next: N; field v: Int; new(v: Int, next: N) { this.v = v; this.next = next; } }
            public class Build { new() {}
              method chain() -> N { return new N(1, new N(2, new N(3, null))); } }
        }",
    );
    let outer = |ctxs: Vec<InvocationContext>| ctxs.into_iter().max_by_key(|c| c.depth).unwrap();
    let deep = outer(contexts(&p, "N", 5));
    assert_eq!(deep.depth, 3);
    let capped = outer(contexts(&p, "N", 2));
    assert_eq!(capped.depth, 2);
    let ArgBinding::Construct { context } = &capped.bindings[1] else { panic!() };
    assert!(matches!(context.bindings[1], ArgBinding::Random { .. }));
    for c in contexts(&p, "N", 2) {
        assert!(c.depth <= 2);
    }
}

#[test]
fn three_call_sites_before_dedup() {
    let p = program(
        "library App v1.0 {
            public class P { field v: Int; new(v: Int) { this.v = v; } }
            public class U { new() {}
              method a() -> P { return new P(1); }
              method b() -> P { return new P(2); }
              method c() -> P { return new P(1); } }
        }",
    );
    assert_eq!(contexts(&p, "P", DEFAULT_DN).len(), 3);
    let pool = build_pool(&p, DEFAULT_DN);
    let entries = pool.contexts("P");
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0].context.provenance.len(), 2);
    let cov = pool.coverage();
    assert_eq!(cov.n_t, 2);
    assert_eq!(cov.n_c, 2);
    assert!((cov.n_i - 1.5).abs() < 1e-12);
    assert_eq!(cov.argu_ratio, Some(1.0));
}

#[test]
fn instantiation_outcomes() {
    let p = program(
        r#"library App v1.0 {
            public class Plain { new() {} }
            public class Path { field value: Str;
              new(v: Str) { require(v != ""); this.value = v; } }
            public class U { new() {}
              method good() -> Path { return new Path("/endpoint"); }
              method bad() -> Path { return new Path(""); } }
        }"#,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool = build_pool(&p, DEFAULT_DN);
    let mut m = Machine::new(&p, 10_000);
    let plain = instantiate(&pool.contexts("Plain")[0].context, &mut m, &mut rng).unwrap();
    assert!(plain.as_obj().is_some());
    let paths = pool.contexts("Path");
    let good = paths.iter().find(|e| lit(&e.context.bindings[0]) == &Value::Str("/endpoint".into())).unwrap();
    let v = instantiate(&good.context, &mut m, &mut rng).unwrap();
    assert_eq!(m.field(v.as_obj().unwrap(), "value"), Some(&Value::Str("/endpoint".into())));
    let bad = paths.iter().find(|e| lit(&e.context.bindings[0]) == &Value::Str(String::new())).unwrap();
    let err = instantiate(&bad.context, &mut m, &mut rng).unwrap_err();
    assert_eq!(err.error.unwrap().kind, semconflict_core::lang::ErrorKind::RequireFailed);
}

#[test]
fn mining_is_deterministic_and_bindings_cover_params() {
    let src = r#"library App v1.0 {
        public class A { field x: Int; field s: Str; new(x: Int, s: Str) { this.x = x; this.s = s; } }
        public class U { new() {} method f(k: Int) -> A { let t = k * 2; return new A(t, "q"); } }
    }"#;
    let p = program(src);
    let a = build_pool(&p, DEFAULT_DN);
    let b = build_pool(&program(src), DEFAULT_DN);
    assert_eq!(a.to_json(), b.to_json());
    for entries in a.entries.values() {
        for e in entries {
            assert_eq!(e.context.bindings.len(), e.context.constructor.signature.params.len());
            let deepest = e.context.bindings.iter().map(ArgBinding::depth).max().unwrap_or(0);
            assert_eq!(e.context.depth, 1 + deepest);
        }
    }
    let ctx = &a.contexts("A")[0].context;
    assert_eq!(ctx.bindings[0].case_tag(), "random");
    assert_eq!(ctx.argu_ratio(), Some(0.5));
}
