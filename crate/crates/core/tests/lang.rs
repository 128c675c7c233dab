use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semconflict_core::lang::arbitrary::{arbitrary_unit, GEN_LIBRARY};
use semconflict_core::lang::ast::{Signature, TypeTag};
use semconflict_core::lang::reference::reference_evaluate;
use semconflict_core::lang::{
    evaluate_entry, normalize, parse, pretty, snapshot_state, ErrorKind, Input, Machine, ParseError, SnapValue,
    Status, Value, DEFAULT_STEP_LIMIT,
};
use semconflict_core::resolver::{ApiRef, ResolvedProgram};

fn program(src: &str) -> ResolvedProgram {
    ResolvedProgram::standalone(vec![parse(src).unwrap()]).unwrap()
}

fn api(lib: &str, class: &str, name: &str, params: &[TypeTag], ret: TypeTag) -> ApiRef {
    ApiRef {
        library: lib.into(),
        version: "1.0".into(),
        class: class.into(),
        signature: Signature {
            name: name.into(),
            params: params.to_vec(),
            ret,
        },
    }
}

fn new(class: &str, args: Vec<Input>) -> Input {
    Input::New {
        class: class.into(),
        args,
    }
}

#[test]
fn minimal_unit() {
    let u = parse("library L v1.0 { class A { } }").unwrap();
    assert_eq!(u.library, "L");
    assert_eq!(u.version, "1.0");
    assert_eq!(u.classes.len(), 1);
    assert_eq!(u.classes[0].name, "A");
}

#[test]
fn duplicate_signature_rejected() {
    let src = "library L v1.0 { class A {
        method foo(x: Int) -> Int { return x; }
        method foo(y: Int) -> Int { return 1; }
    } }";
    assert!(matches!(parse(src), Err(ParseError::DuplicateSignature { .. })));
}

#[test]
fn syntax_error_has_position() {
    let err = parse("library L v1.0 {\n  class A { field x Int; }\n}").unwrap_err();
    match err {
        ParseError::Syntax { line, col, .. } => {
            assert_eq!(line, 2);
            assert!(col > 1);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_return_rejected() {
    let src = "library L v1.0 { class A { method f(x: Int) -> Int { if (x > 0) { return 1; } } } }";
    assert!(matches!(parse(src), Err(ParseError::MissingReturn { .. })));
}

#[test]
fn layout_and_comments_do_not_matter() {
    let a = parse("library L v1.0 { class A { method f(x: Int) -> Int { return x + 9200; } } }").unwrap();
    let b = parse(
        "library L v1.0 {
           // a comment
           class A {
             method f(x: Int) -> Int {
               /* block */ return   x
                 + 9200 ;
             }
           }
         }",
    )
    .unwrap();
    assert_eq!(normalize(&a), normalize(&b));
}

#[test]
fn literal_change_is_preserved() {
    let a = parse("library L v1.0 { class A { method f(x: Int) -> Int { return x + 9200; } } }").unwrap();
    let b = parse("library L v1.0 { class A { method f(x: Int) -> Int { return x + 9201; } } }").unwrap();
    assert_ne!(normalize(&a), normalize(&b));
}

#[test]
fn returns_constant() {
    let p = program("library L v1.0 { public class A { new() {} public method f() -> Int { return 7; } } }");
    let out = evaluate_entry(&p, &api("L", "A", "f", &[], TypeTag::Int), &new("A", vec![]), &[], 1000);
    assert_eq!(out.status, Status::Returned);
    assert_eq!(out.return_value, Some(Value::Int(7)));
    assert!(out.error.is_none());
}

#[test]
fn require_failure_raises() {
    let p = program(
        "library L v1.0 { public class A { new() {} public method f(x: Int) -> Int { require(x > 0); return x; } } }",
    );
    let out = evaluate_entry(
        &p,
        &api("L", "A", "f", &[TypeTag::Int], TypeTag::Int),
        &new("A", vec![]),
        &[Input::Value(Value::Int(0))],
        1000,
    );
    assert_eq!(out.status, Status::Raised);
    assert_eq!(out.error.unwrap().kind, ErrorKind::RequireFailed);
    assert!(out.return_value.is_none());
}

#[test]
fn runtime_error_kinds() {
    let p = program(
        "library L v1.0 { public class A { field o: A;
            new() {}
            public method div(x: Int) -> Int { return 10 / x; }
            public method nul() -> Int { return this.o.div(1); }
            public method missing(x: Int) -> Int { let b = bag[1]; return this.div(\"s\"); }
        } }",
    );
    let run = |name: &str, params: &[TypeTag], args: &[Input]| {
        evaluate_entry(&p, &api("L", "A", name, params, TypeTag::Int), &new("A", vec![]), args, 1000)
            .error
            .map(|e| e.kind)
    };
    assert_eq!(
        run("div", &[TypeTag::Int], &[Input::Value(Value::Int(0))]),
        Some(ErrorKind::DivisionByZero)
    );
    assert_eq!(run("nul", &[], &[]), Some(ErrorKind::NullDereference));
    assert_eq!(
        run("missing", &[TypeTag::Int], &[Input::Value(Value::Int(1))]),
        Some(ErrorKind::NoSuchMethod)
    );
}

#[test]
fn step_limit_is_enforced() {
    let p = program(
        "library L v1.0 { public class A { new() {}
            public method spin() -> Int { let i = 0; while (true) bound 1000000 { i = i + 1; } return i; }
            public method rec(x: Int) -> Int { return this.rec(x + 1); }
        } }",
    );
    let out = evaluate_entry(&p, &api("L", "A", "spin", &[], TypeTag::Int), &new("A", vec![]), &[], 500);
    assert_eq!(out.status, Status::StepLimitExceeded);
    assert!(out.step_count <= 500);
    assert!(out.error.is_none() && out.return_value.is_none());
    let out = evaluate_entry(
        &p,
        &api("L", "A", "rec", &[TypeTag::Int], TypeTag::Int),
        &new("A", vec![]),
        &[Input::Value(Value::Int(0))],
        DEFAULT_STEP_LIMIT,
    );
    assert_eq!(out.status, Status::StepLimitExceeded);
}

#[test]
fn bounded_while_stops_at_bound() {
    let p = program(
        "library L v1.0 { public class A { new() {}
            public method f() -> Int { let i = 0; while (i < 100) bound 3 { i = i + 1; } return i; }
        } }",
    );
    let out = evaluate_entry(&p, &api("L", "A", "f", &[], TypeTag::Int), &new("A", vec![]), &[], 1000);
    assert_eq!(out.return_value, Some(Value::Int(3)));
}

#[test]
fn overflow_wraps() {
    let p = program(
        "library L v1.0 { public class A { new() {}
            public method f(x: Int) -> Int { return x * 2 + 1; }
        } }",
    );
    let out = evaluate_entry(
        &p,
        &api("L", "A", "f", &[TypeTag::Int], TypeTag::Int),
        &new("A", vec![]),
        &[Input::Value(Value::Int(i64::MAX))],
        100,
    );
    assert_eq!(out.return_value, Some(Value::Int(i64::MAX.wrapping_mul(2).wrapping_add(1))));
}

#[test]
fn dynamic_dispatch_runs_override() {
    let p = program(
        "library L v1.0 {
            public class Base { new() {} public method tag() -> Int { return 1; }
              public method via(b: Base) -> Int { return b.tag(); } }
            public class Sub extends Base { new() {} public method tag() -> Int { return 2; } }
        }",
    );
    let out = evaluate_entry(
        &p,
        &api("L", "Base", "via", &[TypeTag::Class("Base".into())], TypeTag::Int),
        &new("Base", vec![]),
        &[new("Sub", vec![])],
        1000,
    );
    assert_eq!(out.return_value, Some(Value::Int(2)));
}

#[test]
fn inherited_method_resolves_in_superclass() {
    let p = program(
        "library L v1.0 {
            public class Base { new() {} public method tag() -> Int { return 5; } }
            public class Sub extends Base { new() {} }
        }",
    );
    let out = evaluate_entry(&p, &api("L", "Base", "tag", &[], TypeTag::Int), &new("Sub", vec![]), &[], 100);
    assert_eq!(out.return_value, Some(Value::Int(5)));
}

#[test]
fn bag_literal_fold_and_multiset_equality() {
    let p = program(
        "library L v1.0 { public class A { new() {}
            public method sum() -> Int { return fold(insert(bag[1, 2], 3), 0, |a, x| a + x); }
            public method same() -> Bool { return bag[1, 2, 2] == bag[2, 1, 2]; }
            public method differ() -> Bool { return bag[1, 2] == bag[1, 2, 2]; }
            public method order() -> Str { return fold(bag[1, 2], \"\", |a, x| a ++ x); }
        } }",
    );
    let run = |name: &str, ret: TypeTag| {
        evaluate_entry(&p, &api("L", "A", name, &[], ret), &new("A", vec![]), &[], 1000).return_value
    };
    assert_eq!(run("sum", TypeTag::Int), Some(Value::Int(6)));
    assert_eq!(run("same", TypeTag::Bool), Some(Value::Bool(true)));
    assert_eq!(run("differ", TypeTag::Bool), Some(Value::Bool(false)));
    assert_eq!(run("order", TypeTag::Str), Some(Value::Str("12".into())));
}

#[test]
fn snapshot_sections() {
    let p = program(
        "library L v1.0 {
            const LIMIT: Int = 40;
            public class Box { field n: Int; new(n: Int) { this.n = n; } }
            public class A { field k: Int; field unused: Int; new() { this.k = 2; }
              public method three() -> Int { return 3; }
              public method bump(b: Box) -> Int { b.n = b.n + this.k; return L::LIMIT; }
            }
        }",
    );
    let receiver = new("A", vec![]);
    let entry = api("L", "A", "three", &[], TypeTag::Int);
    let mut m = Machine::new(&p, 1000);
    let r = m.materialize(&receiver).unwrap();
    let out = m.evaluate_entry(&entry, &r, &[]);
    let snap = snapshot_state(&out, &r, &[]);
    assert!(snap.params.is_empty());
    assert!(snap.externals.is_empty());
    assert_eq!(snap.ret, Some(SnapValue::Int(3)));

    let entry = api("L", "A", "bump", &[TypeTag::Class("Box".into())], TypeTag::Int);
    let mut m = Machine::new(&p, 1000);
    let r = m.materialize(&receiver).unwrap();
    let b = m.materialize(&new("Box", vec![Input::Value(Value::Int(5))])).unwrap();
    let out = m.evaluate_entry(&entry, &r, std::slice::from_ref(&b));
    let snap = snapshot_state(&out, &r, std::slice::from_ref(&b));
    let SnapValue::Obj { fields, .. } = &snap.params["arg0"] else {
        panic!("object param expected");
    };
    assert_eq!(fields["n"], SnapValue::Int(7));
    assert_eq!(snap.externals["this.k"], SnapValue::Int(2));
    assert_eq!(snap.externals["L::LIMIT"], SnapValue::Int(40));
    assert!(!snap.externals.contains_key("this.unused"));

    // Replay with the reference evaluator and compare the parameter's record.
    let reference = reference_evaluate(&p, &entry, &receiver, &[new("Box", vec![Input::Value(Value::Int(5))])], 1000);
    let box_id = b.as_obj().unwrap().id;
    assert_eq!(reference.heap_snapshot[&box_id].fields["n"], Value::Int(7));
    assert_eq!(reference.reads, out.reads);
}

#[test]
fn cyclic_objects_snapshot_with_back_references() {
    let p = program(
        "library L v1.0 { public class N { field next: N; new() {}
            public method loop(o: N) -> Int { o.next = o; return 0; }
        } }",
    );
    let entry = api("L", "N", "loop", &[TypeTag::Class("N".into())], TypeTag::Int);
    let mut m = Machine::new(&p, 100);
    let r = m.construct("N", vec![]).unwrap();
    let o = m.construct("N", vec![]).unwrap();
    let out = m.evaluate_entry(&entry, &r, std::slice::from_ref(&o));
    let snap = snapshot_state(&out, &r, &[o]);
    let SnapValue::Obj { fields, .. } = &snap.params["arg0"] else {
        panic!()
    };
    assert_eq!(fields["next"], SnapValue::BackRef(1));
}

#[test]
fn outcome_serialization_is_deterministic() {
    let p = program(
        "library L v1.0 { public class A { field b: Bag; new() {}
            public method f(x: Int) -> Int { this.b = insert(this.b, x); return fold(this.b, 0, |a, y| a + y); }
        } }",
    );
    let entry = api("L", "A", "f", &[TypeTag::Int], TypeTag::Int);
    let run = || evaluate_entry(&p, &entry, &new("A", vec![]), &[Input::Value(Value::Int(4))], 100).to_json();
    assert_eq!(run(), run());
}

fn gen_unit(seed: u64) -> semconflict_core::lang::SourceUnit {
    arbitrary_unit(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn round_trip(seed in any::<u64>()) {
        let u = gen_unit(seed);
        let text = pretty(&u);
        let parsed = parse(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        prop_assert_eq!(normalize(&parsed), normalize(&u));
        let again = parse(&pretty(&parsed)).unwrap();
        prop_assert_eq!(normalize(&again), normalize(&parsed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let u = parse(&pretty(&gen_unit(seed))).unwrap();
        let once = normalize(&u);
        prop_assert_eq!(normalize(&once), once.clone());
        for class in &u.classes {
            for m in &class.methods {
                let n = normalize(m);
                prop_assert_eq!(normalize(&n), n);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interpreter_matches_reference(seed in any::<u64>(), arg in -30i64..60, recv_arg in -5i64..20) {
        let u = gen_unit(seed);
        let p = ResolvedProgram::standalone(vec![u]).unwrap();
        let entry = api(GEN_LIBRARY, "C0", "m0", &[TypeTag::Int], TypeTag::Int);
        let receiver = new("C0", vec![Input::Value(Value::Int(recv_arg))]);
        let args = [Input::Value(Value::Int(arg))];
        let fast = evaluate_entry(&p, &entry, &receiver, &args, 2_000);
        let slow = reference_evaluate(&p, &entry, &receiver, &args, 2_000);
        prop_assert_eq!(fast.status, slow.status);
        prop_assert_eq!(&fast.return_value, &slow.return_value);
        prop_assert_eq!(fast.error.as_ref().map(|e| e.kind), slow.error.as_ref().map(|e| e.kind));
        prop_assert_eq!(fast.step_count, slow.step_count);
        prop_assert_eq!(&fast.heap_snapshot, &slow.heap_snapshot);
        prop_assert_eq!(&fast.reads, &slow.reads);
    }
}

#[test]
fn generator_reaches_every_outcome() {
    let entry = api(GEN_LIBRARY, "C0", "m0", &[TypeTag::Int], TypeTag::Int);
    let mut seen = std::collections::BTreeMap::new();
    for seed in 0..300 {
        let p = ResolvedProgram::standalone(vec![gen_unit(seed)]).unwrap();
        let out = evaluate_entry(
            &p,
            &entry,
            &new("C0", vec![Input::Value(Value::Int(3))]),
            &[Input::Value(Value::Int(seed as i64 % 40))],
            2_000,
        );
        let key = match (&out.status, &out.error) {
            (_, Some(e)) => format!("{}", e.kind),
            (s, None) => format!("{s:?}"),
        };
        *seen.entry(key).or_insert(0) += 1;
    }
    for k in ["Returned", "StepLimitExceeded", "require-failed", "type-error"] {
        assert!(seen.contains_key(k), "{k} never produced: {seen:?}");
    }
}
