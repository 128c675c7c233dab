use proptest::prelude::*;

use semconflict_core::detector::{
    build_call_graph, find_conflicting_pairs, find_paths, is_isomerous, paths_to, scan, Configs, DetectorConfig,
};
use semconflict_core::lang::parse;
use semconflict_core::resolver::{Callable, Manifest, ResolvedProgram, Workspace};

/// App -> {Mid@1.0, Core@2.0}; Mid -> Core@1.0. Core 2.0 is loaded.
fn workspace(app: &str, core_v1: &str, core_v2: &str) -> Workspace {
    let app = format!("library App v1.0 {{ {app} }}");
    let mid = "library Mid v1.0 { class MidThing { } }".to_string();
    let v1 = format!("library Core v1.0 {{ {core_v1} }}");
    let v2 = format!("library Core v2.0 {{ {core_v2} }}");
    Workspace::from_sources(
        (Manifest::new("App", "1.0", &[("Mid", "1.0"), ("Core", "2.0")]), &app),
        &[
            (Manifest::new("Mid", "1.0", &[("Core", "1.0")]), &mid),
            (Manifest::new("Core", "1.0", &[]), &v1),
            (Manifest::new("Core", "2.0", &[]), &v2),
        ],
    )
    .unwrap()
}

fn standalone(src: &str) -> ResolvedProgram {
    ResolvedProgram::standalone(vec![parse(src).unwrap()]).unwrap()
}

const CLIENT: &str = "public class Client { new() {}
    public method run(x: Int) -> Int { let e = new Engine(); return e.compute(x); } }";

#[test]
fn one_entry_one_call() {
    let p = standalone(
        "library App v1.0 {
            public class Main { new() {} public method run(l: Lib) -> Int { return l.value(); } }
            internal class Lib { new() {} public method value() -> Int { return 1; } }
        }",
    );
    let g = build_call_graph(&p);
    assert_eq!(g.nodes.len(), 2);
    assert_eq!(g.edge_count(), 1);
}

#[test]
fn virtual_call_reaches_every_override() {
    let p = standalone(
        "library App v1.0 {
            public class Main { new() {} public method run(b: Base) -> Int { return b.tag(); } }
            internal class Base { new() {} public method tag() -> Int { return 1; } }
            internal class Sub extends Base { new() {} public method tag() -> Int { return 2; } }
            internal class Other { new() {} public method tag() -> Int { return 3; } }
        }",
    );
    let g = build_call_graph(&p);
    let run = Callable::Method(p.entry_methods()[0]);
    let callees: Vec<String> = g.callees(run).map(|c| p.callable_ref(c).to_string()).collect();
    assert_eq!(callees.len(), 2, "{callees:?}");
    assert!(callees.iter().all(|c| !c.contains("Other")));
}

#[test]
fn long_chain_is_a_path() {
    let mut methods = String::new();
    for i in 0..12 {
        let vis = if i == 0 { "public" } else { "internal" };
        methods.push_str(&format!("{vis} method m{i}(x: Int) -> Int {{ return this.m{}(x); }}\n", i + 1));
    }
    methods.push_str("internal method m12(x: Int) -> Int { return x; }");
    let p = standalone(&format!("library App v1.0 {{ public class Main {{ new() {{}} {methods} }} }}"));
    let g = build_call_graph(&p);
    let id = p.class_id("Main").unwrap();
    let m12 = p.methods(id).map(Callable::Method).find(|c| p.callable_ref(*c).signature.name == "m12").unwrap();
    let paths = paths_to(&g, m12, 8);
    assert_eq!(paths[0].len() - 1, 12);
    assert!(paths.iter().all(|p| p.last() == Some(&m12)));
}

#[test]
fn same_signature_pair_without_fallback() {
    let w = workspace(
        CLIENT,
        "public class Engine { new() {} public method compute(x: Int) -> Int { return x + 1; } }",
        "public class Engine { new() {} public method compute(x: Int) -> Int { return x + 2; } }",
    );
    let (pairs, _) = find_conflicting_pairs(&w).unwrap();
    let compute: Vec<_> = pairs.iter().filter(|p| p.shadowed.signature.name == "compute").collect();
    assert_eq!(compute.len(), 1);
    assert!(!compute[0].fallback_used);
    assert_eq!(compute[0].shadowed.version, "1.0");
    assert_eq!(compute[0].loaded.version, "2.0");
}

#[test]
fn superclass_fallback() {
    let w = workspace(
        CLIENT,
        "public class Engine { new() {} public method compute(x: Int) -> Int { return x + 1; } }",
        "public class Base { new() {} public method compute(x: Int) -> Int { return x; } }
         public class Engine extends Base { new() {} }",
    );
    let (pairs, _) = find_conflicting_pairs(&w).unwrap();
    let p = pairs.iter().find(|p| p.shadowed.signature.name == "compute").unwrap();
    assert!(p.fallback_used);
    assert_eq!(p.loaded.class, "Base");
}

#[test]
fn unreachable_api_is_not_paired() {
    let w = workspace(
        CLIENT,
        "public class Engine { new() {} public method compute(x: Int) -> Int { return x; }
           public method unused() -> Int { return 1; } }",
        "public class Engine { new() {} public method compute(x: Int) -> Int { return x; }
           public method unused() -> Int { return 2; } }",
    );
    let (pairs, _) = find_conflicting_pairs(&w).unwrap();
    assert!(pairs.iter().all(|p| p.shadowed.signature.name != "unused"));
}

#[test]
fn direct_and_multi_entry_paths() {
    let app = "public class Client { new() {}
        public method run(x: Int) -> Int { let e = new Engine(); return e.compute(x); }
        public method other(x: Int) -> Int { return this.helper(x); }
        internal method helper(x: Int) -> Int { return new Engine().compute(x + 1); } }";
    let body = "public class Engine { new() {} public method compute(x: Int) -> Int { return x * 3; } }";
    let w = workspace(app, body, &body.replace("x * 3", "x * 4"));
    let inv = scan(&w, &DetectorConfig::default()).unwrap();
    let rec = inv.pairs.iter().find(|r| r.pair.shadowed.signature.name == "compute").unwrap();
    assert_eq!(rec.original_paths.len(), 2);
    assert_eq!(rec.original_paths.len(), rec.actual_paths.len());
    assert_eq!(rec.original_paths[0].len(), 2);
    assert_eq!(rec.original_paths[1].len(), 3);
    for (ep, fp) in rec.original_paths.iter().zip(&rec.actual_paths) {
        assert_eq!(ep.chain[..ep.len() - 1], fp.chain[..fp.len() - 1]);
        assert_eq!(ep.terminal(), &rec.pair.shadowed);
        assert_eq!(fp.terminal(), &rec.pair.loaded);
    }
    assert_eq!(rec.pair.isomerous, Some(true));
    // The unchanged constructor is paired but not isomerous.
    let ctor = inv.pairs.iter().find(|r| r.pair.shadowed.signature.name == "new").unwrap();
    assert_eq!(ctor.pair.isomerous, Some(false));
    assert!(ctor.pair.diff_sites.is_empty());
}

#[test]
fn transitive_library_path() {
    // Entry reaches the conflicting API only through other library code.
    let app = "public class Client { new() {}
        public method create(x: Int) -> Int { return new Executor().execute(x); } }";
    let v1 = "public class Executor { new() {} public method execute(x: Int) -> Int { return new Validator().validate(x); } }
              public class Validator { new() {} public method validate(x: Int) -> Int { require(x > 0); return x; } }";
    let v2 = v1.replace("require(x > 0); ", "");
    let w = workspace(app, v1, &v2);
    let inv = scan(&w, &DetectorConfig::default()).unwrap();
    let rec = inv.pairs.iter().find(|r| r.pair.shadowed.signature.name == "validate").unwrap();
    assert_eq!(rec.original_paths[0].len(), 3);
    // `execute` itself is identical but its callee differs at depth 2.
    let exec = inv.pairs.iter().find(|r| r.pair.shadowed.signature.name == "execute").unwrap();
    assert_eq!(exec.pair.isomerous, Some(true));
    assert_eq!(exec.pair.diff_sites[0].depth, 2);
}

fn iso_of(w: &Workspace, limit: usize) -> bool {
    let (pairs, _) = find_conflicting_pairs(w).unwrap();
    let pair = pairs.iter().find(|p| p.shadowed.signature.name == "compute").unwrap();
    let configs = Configs::build(w, &pair.original).unwrap();
    assert!(!find_paths(pair, &configs, 8).0.is_empty());
    let (iso, sites) = is_isomerous(pair, &configs, limit);
    assert_eq!(iso, !sites.is_empty());
    iso
}

#[test]
fn identical_versions_are_not_isomerous() {
    let body = "public class Engine { new() {} public method compute(x: Int) -> Int { return x + 1; } }";
    assert!(!iso_of(&workspace(CLIENT, body, body), 10));
}

#[test]
fn local_rename_is_not_isomerous() {
    let v1 = "public class Engine { new() {} public method compute(x: Int) -> Int { let a = x + 1; return fold(bag[a], 0, |s, i| s + i); } }";
    let v2 = "public class Engine { new() {}
      public method compute(input: Int) -> Int {
        let total = input + 1; // renamed
        return fold(bag[total], 0, |acc, item| acc + item);
      } }";
    assert!(!iso_of(&workspace(CLIENT, v1, v2), 10));
}

/// `compute` calls a chain h1 -> ... -> hN; the versions differ only in hN.
fn chain_versions(n: usize) -> (String, String) {
    let mut v = String::from("public class Engine { new() {} public method compute(x: Int) -> Int { return this.h1(x); }\n");
    for i in 1..n {
        v.push_str(&format!("method h{i}(x: Int) -> Int {{ return this.h{}(x); }}\n", i + 1));
    }
    v.push_str(&format!("method h{n}(x: Int) -> Int {{ return x + 1; }} }}"));
    (v.clone(), v.replace("return x + 1;", "return x + 2;"))
}

#[test]
fn depth_cutoff() {
    // h10 sits at depth 11, h8 at depth 9.
    let (a, b) = chain_versions(10);
    assert!(!iso_of(&workspace(CLIENT, &a, &b), 10));
    let (a, b) = chain_versions(8);
    assert!(iso_of(&workspace(CLIENT, &a, &b), 10));
    let (a, b) = chain_versions(9);
    assert!(!iso_of(&workspace(CLIENT, &a, &b), 10));
}

#[test]
fn added_callee_is_a_difference() {
    let v1 = "public class Engine { new() {} public method compute(x: Int) -> Int { return this.a(x); }
        method a(x: Int) -> Int { return x; } }";
    let v2 = "public class Engine { new() {} public method compute(input: Int) -> Int { return this.a(input); }
        method a(x: Int) -> Int { return this.b(x); } method b(x: Int) -> Int { return x; } }";
    let w = workspace(CLIENT, v1, v2);
    let (pairs, _) = find_conflicting_pairs(&w).unwrap();
    let pair = pairs.iter().find(|p| p.shadowed.signature.name == "compute").unwrap();
    let configs = Configs::build(&w, &pair.original).unwrap();
    let (iso, sites) = is_isomerous(pair, &configs, 10);
    assert!(iso);
    assert_eq!(sites[0].depth, 2);
    assert!(sites.iter().any(|s| s.shadowed.is_none() && s.depth == 3));
}

#[test]
fn inventory_serializes() {
    let body = "public class Engine { new() {} public method compute(x: Int) -> Int { return x + 1; } }";
    let w = workspace(CLIENT, body, &body.replace("+ 1", "+ 5"));
    let inv = scan(&w, &DetectorConfig::default()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&inv.to_json()).unwrap();
    let pair = &json["pairs"][0];
    for key in ["shadowed", "loaded", "fallback_used", "isomerous", "diff_sites"] {
        assert!(pair["pair"].get(key).is_some(), "missing {key}");
    }
    assert!(pair["original_paths"][0]["chain"].is_array());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monotone_and_symmetric(n in 1usize..13, d in 2usize..14) {
        let (a, b) = chain_versions(n);
        let w = workspace(CLIENT, &a, &b);
        let swapped = workspace(CLIENT, &b, &a);
        let at_d = iso_of(&w, d);
        prop_assert_eq!(at_d, iso_of(&swapped, d));
        if at_d {
            prop_assert!(iso_of(&w, d + 1));
        }
        // the differing method sits at depth n + 1
        prop_assert_eq!(at_d, n + 1 < d);
    }
}
