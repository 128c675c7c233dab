use std::collections::BTreeMap;

use proptest::prelude::*;

use semconflict_core::lang::ast::TypeTag;
use semconflict_core::lang::{evaluate_entry, Input, Value};
use semconflict_core::resolver::{
    build_tree, force_load, link, mediate, resolve, ApiRef, Manifest, Package, ResolveError, Workspace,
};

fn lib(name: &str, version: &str, body: &str) -> String {
    format!("library {name} v{version} {{ {body} }}")
}

fn ws(project_deps: &[(&str, &str)], libs: &[(&str, &str, &[(&str, &str)], &str)]) -> Workspace {
    let project = (
        Manifest::new("App", "1.0", project_deps),
        "library App v1.0 { public class Main { new() {} public method run() -> Int { return 0; } } }",
    );
    let texts: Vec<(Manifest, String)> = libs
        .iter()
        .map(|(n, v, deps, body)| (Manifest::new(n, v, deps), lib(n, v, body)))
        .collect();
    let borrowed: Vec<(Manifest, &str)> = texts.iter().map(|(m, t)| (m.clone(), t.as_str())).collect();
    Workspace::from_sources(project, &borrowed).unwrap()
}

const EMPTY: &str = "class Stub { }";

#[test]
fn project_without_dependencies() {
    let w = ws(&[], &[]);
    let tree = build_tree(&w).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    let cp = mediate(&tree);
    assert!(cp.shadowed.is_empty());
}

#[test]
fn two_versions_in_tree() {
    let w = ws(
        &[("Lib1", "1.0"), ("Lib2", "2.0")],
        &[
            ("Lib1", "1.0", &[("Lib2", "1.0")], "class A { }"),
            ("Lib2", "1.0", &[], EMPTY),
            ("Lib2", "2.0", &[], EMPTY),
        ],
    );
    let tree = build_tree(&w).unwrap();
    let lib2: Vec<_> = tree.nodes.iter().filter(|n| n.library == "Lib2").map(|n| n.version.as_str()).collect();
    assert_eq!(lib2, ["2.0", "1.0"]);
    let cp = mediate(&tree);
    assert_eq!(cp.loaded["Lib2"], "2.0");
    assert_eq!(cp.shadowed["Lib2"].iter().collect::<Vec<_>>(), ["1.0"]);
}

#[test]
fn nearest_wins_over_declaration_order() {
    // Lib2@1.0 is declared first but sits one level deeper.
    let w = ws(
        &[("Lib1", "1.0"), ("Lib2", "2.0")],
        &[
            ("Lib1", "1.0", &[("Lib2", "1.0")], "class A { }"),
            ("Lib2", "1.0", &[], EMPTY),
            ("Lib2", "2.0", &[], EMPTY),
        ],
    );
    let cp = mediate(&build_tree(&w).unwrap());
    assert_eq!(cp.loaded["Lib2"], "2.0");
}

#[test]
fn first_declared_wins_at_equal_depth() {
    let w = ws(
        &[("Lib2", "1.0"), ("Lib2", "2.0")],
        &[("Lib2", "1.0", &[], EMPTY), ("Lib2", "2.0", &[], EMPTY)],
    );
    let cp = mediate(&build_tree(&w).unwrap());
    assert_eq!(cp.loaded["Lib2"], "1.0");
    assert!(cp.shadowed["Lib2"].contains("2.0"));
}

#[test]
fn equal_depth_through_different_parents() {
    let w = ws(
        &[("A", "1.0"), ("B", "1.0")],
        &[
            ("A", "1.0", &[("X", "1.0")], "class AA { }"),
            ("B", "1.0", &[("X", "2.0")], "class BB { }"),
            ("X", "1.0", &[], EMPTY),
            ("X", "2.0", &[], EMPTY),
        ],
    );
    assert_eq!(mediate(&build_tree(&w).unwrap()).loaded["X"], "1.0");
    let w = ws(
        &[("B", "1.0"), ("A", "1.0")],
        &[
            ("A", "1.0", &[("X", "1.0")], "class AA { }"),
            ("B", "1.0", &[("X", "2.0")], "class BB { }"),
            ("X", "1.0", &[], EMPTY),
            ("X", "2.0", &[], EMPTY),
        ],
    );
    assert_eq!(mediate(&build_tree(&w).unwrap()).loaded["X"], "2.0");
}

#[test]
fn cycles_and_missing_archives() {
    let p = (Manifest::new("App", "1.0", &[("A", "1.0")]), "library App v1.0 { }");
    let a = Manifest::new("A", "1.0", &[("B", "1.0")]);
    let b = Manifest::new("B", "1.0", &[("A", "1.0")]);
    let w = Workspace::from_sources(p.clone(), &[(a.clone(), "library A v1.0 { }"), (b, "library B v1.0 { }")])
        .unwrap();
    assert!(matches!(build_tree(&w), Err(ResolveError::Cycle(_))));
    let w = Workspace::from_sources(p, &[(a, "library A v1.0 { }")]).unwrap();
    assert!(matches!(build_tree(&w), Err(ResolveError::MissingArchive { .. })));
}

#[test]
fn manifest_rejects_duplicates() {
    let m = Manifest::from_json(r#"{"name":"A","version":"1.0","dependencies":[{"name":"B","version":"1.0"},{"name":"B","version":"1.0"}]}"#);
    assert!(m.is_err());
    let ok = Manifest::from_json(r#"{"name":"A","version":"1.0","dependencies":[]}"#).unwrap();
    assert_eq!(Manifest::from_json(&ok.to_json()).unwrap(), ok);
}

const LIB2_V1: &str = "public class Lib2Core { new() {}
    public method value() -> Int { return 1; }
    public method onlyOld() -> Int { return 9; } }";
const LIB2_V2: &str = "public class Base { new() {} public method inherited() -> Int { return 40; } }
    public class Lib2Core extends Base { new() {}
    public method value() -> Int { return 2; } }";

fn shadow_ws(project_src: &str) -> Workspace {
    let project = (Manifest::new("App", "1.0", &[("Lib1", "1.0"), ("Lib2", "2.0")]), project_src);
    let libs = [
        (Manifest::new("Lib1", "1.0", &[("Lib2", "1.0")]), lib("Lib1", "1.0", "class L1 { }")),
        (Manifest::new("Lib2", "1.0", &[]), lib("Lib2", "1.0", LIB2_V1)),
        (Manifest::new("Lib2", "2.0", &[]), lib("Lib2", "2.0", LIB2_V2)),
    ];
    let borrowed: Vec<_> = libs.iter().map(|(m, t)| (m.clone(), t.as_str())).collect();
    Workspace::from_sources(project, &borrowed).unwrap()
}

fn run_value(program: &semconflict_core::resolver::ResolvedProgram) -> Option<Value> {
    let entry = ApiRef {
        library: "App".into(),
        version: "1.0".into(),
        class: "Main".into(),
        signature: semconflict_core::lang::ast::Signature {
            name: "run".into(),
            params: vec![],
            ret: TypeTag::Int,
        },
    };
    let recv = Input::New {
        class: "Main".into(),
        args: vec![],
    };
    evaluate_entry(program, &entry, &recv, &[], 1000).return_value
}

#[test]
fn link_resolves_and_reports() {
    let ok = shadow_ws(
        "library App v1.0 { public class Main { new() {}
            public method run() -> Int { let c = new Lib2Core(); return c.value() + c.inherited(); } } }",
    );
    let p = resolve(&ok).unwrap();
    assert_eq!(run_value(&p), Some(Value::Int(42)));

    let broken = shadow_ws(
        "library App v1.0 { public class Main { new() {}
            public method run() -> Int { let c = new Lib2Core(); return c.onlyOld(); } } }",
    );
    match resolve(&broken) {
        Err(ResolveError::Link(diags)) => assert!(diags.iter().any(|d| d.message.contains("onlyOld"))),
        other => panic!("expected link error, got {other:?}"),
    }
}

#[test]
fn force_load_selects_shadowed_version() {
    let w = shadow_ws(
        "library App v1.0 { public class Main { new() {}
            public method run() -> Int { let c = new Lib2Core(); return c.value(); } } }",
    );
    let actual = resolve(&w).unwrap();
    let same = force_load(&w, &BTreeMap::new()).unwrap();
    assert_eq!(actual, same);
    let original = force_load(&w, &BTreeMap::from([("Lib2".to_string(), "1.0".to_string())])).unwrap();
    assert_eq!(original.classpath.class_index["Lib2Core"].version, "1.0");
    assert_eq!(original.classpath.loaded["Lib2"], "1.0");
    assert!(original.classpath.shadowed["Lib2"].contains("2.0"));
    assert_eq!(run_value(&actual), Some(Value::Int(2)));
    assert_eq!(run_value(&original), Some(Value::Int(1)));
    let bad = force_load(&w, &BTreeMap::from([("Lib2".to_string(), "9.9".to_string())]));
    assert!(bad.is_err());
}

#[test]
fn class_level_conflict_follows_library_priority() {
    let project = (
        Manifest::new("App", "1.0", &[("Alpha", "1.0"), ("Beta", "1.0")]),
        "library App v1.0 { public class Main { new() {}
            public method run() -> Int { return new Util().id(); } } }",
    );
    let alpha = lib("Alpha", "1.0", "public class Util { new() {} public method id() -> Int { return 1; } }");
    let beta = lib("Beta", "1.0", "public class Util { new() {} public method id() -> Int { return 2; } }");
    let w = Workspace::from_sources(
        project,
        &[(Manifest::new("Alpha", "1.0", &[]), &alpha), (Manifest::new("Beta", "1.0", &[]), &beta)],
    )
    .unwrap();
    let cp = mediate(&build_tree(&w).unwrap());
    assert_eq!(cp.class_index["Util"].library, "Alpha");
    assert_eq!(cp.shadowed_classes.len(), 1);
    assert_eq!(cp.shadowed_classes[0].library, "Beta");
    assert_eq!(run_value(&link(&w, &cp).unwrap()), Some(Value::Int(1)));
}

#[test]
fn workspace_round_trips_through_disk() {
    let w = shadow_ws(
        "library App v1.0 { public class Main { new() {}
            public method run() -> Int { return new Lib2Core().value(); } } }",
    );
    let dir = tempfile::tempdir().unwrap();
    w.write(dir.path()).unwrap();
    assert!(dir.path().join("project/manifest.json").exists());
    assert!(dir.path().join("libs/Lib2/1.0/src").is_dir());
    let back = Workspace::load(dir.path()).unwrap();
    assert_eq!(resolve(&back).unwrap().classpath, resolve(&w).unwrap().classpath);
    let versions = back.versions("Lib2");
    assert_eq!(versions.versions.iter().collect::<Vec<_>>(), ["1.0", "2.0"]);
}

fn random_ws(decl: &[(usize, usize)]) -> Workspace {
    // Project depends on libraries D0..D3; each Dk depends on X at some version.
    let versions = ["1.0", "2.0", "3.0"];
    let project_deps: Vec<(String, String)> = decl
        .iter()
        .map(|(k, v)| if *k == 0 { ("X".to_string(), versions[*v].to_string()) } else { (format!("D{k}"), "1.0".to_string()) })
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let project_deps_ref: Vec<(&str, &str)> = project_deps.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut libs = Vec::new();
    for k in 1..4 {
        let v = decl.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v).unwrap_or(0);
        libs.push((Manifest::new(&format!("D{k}"), "1.0", &[("X", versions[v])]), lib(&format!("D{k}"), "1.0", "")));
    }
    for v in versions {
        libs.push((Manifest::new("X", v, &[]), lib("X", v, "")));
    }
    let borrowed: Vec<_> = libs.iter().map(|(m, t)| (m.clone(), t.as_str())).collect();
    Workspace::from_sources((Manifest::new("App", "1.0", &project_deps_ref), "library App v1.0 { }"), &borrowed).unwrap()
}

proptest! {
    #[test]
    fn mediation_invariants(decl in proptest::collection::vec((0usize..4, 0usize..3), 1..6)) {
        let w = random_ws(&decl);
        let tree = build_tree(&w).unwrap();
        let cp = mediate(&tree);
        for (lib, v) in &cp.loaded {
            prop_assert!(!cp.shadowed.get(lib).is_some_and(|s| s.contains(v)));
        }
        // Archive discovery order is irrelevant.
        let reversed = Workspace::new(w.project.clone(), w.archive.values().rev().cloned().collect::<Vec<Package>>());
        prop_assert_eq!(mediate(&build_tree(&reversed).unwrap()), cp.clone());
        // The winner is at minimal depth among reachable candidates.
        if let Some(v) = cp.loaded.get("X") {
            let min_depth = tree.nodes.iter().filter(|n| n.library == "X").map(|n| n.depth).min().unwrap();
            let winner = tree.nodes.iter().find(|n| n.library == "X" && &n.version == v).unwrap();
            prop_assert_eq!(winner.depth, min_depth);
        }
        prop_assert_eq!(link(&w, &cp).unwrap(), force_load(&w, &BTreeMap::new()).unwrap());
    }
}
