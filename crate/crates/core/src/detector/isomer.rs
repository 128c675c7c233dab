//! Iterative top-down AST differencing of a conflicting pair.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::alpha::canonical_body;
use super::callgraph::CallGraph;
use crate::lang::ast::Stmt;
use crate::lang::pretty;
use crate::resolver::{ApiRef, Callable, ResolvedProgram};

pub const DEFAULT_DEPTH_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSite {
    /// Method on the shadowed side, absent when only the loaded side has it.
    pub shadowed: Option<ApiRef>,
    pub loaded: Option<ApiRef>,
    pub depth: usize,
    pub summary: String,
}

/// One side of a comparison: a program and its call graph.
#[derive(Clone, Copy)]
pub struct Side<'a> {
    pub program: &'a ResolvedProgram,
    pub graph: &'a CallGraph,
}

fn member_key(program: &ResolvedProgram, c: Callable) -> (String, String) {
    let r = program.callable_ref(c);
    (r.class, r.signature.to_string())
}

fn describe(stmts: &[Stmt], i: usize) -> String {
    stmts
        .get(i)
        .map(|s| pretty::stmt_text(s).trim().replace('\n', " "))
        .unwrap_or_else(|| "<end>".into())
}

fn summarize(a: &(Vec<crate::lang::ast::Param>, Vec<Stmt>), b: &(Vec<crate::lang::ast::Param>, Vec<Stmt>)) -> String {
    if a.0 != b.0 {
        return "parameter list differs".into();
    }
    let first = (0..a.1.len().max(b.1.len())).find(|i| a.1.get(*i) != b.1.get(*i)).unwrap_or(0);
    format!(
        "{} vs {} statements; first difference at statement {}: `{}` vs `{}`",
        a.1.len(),
        b.1.len(),
        first + 1,
        describe(&a.1, first),
        describe(&b.1, first)
    )
}

/// Compares `shadowed` and `loaded` and every same-signature callee pair
/// reachable from them below `depth_limit`. Returns the unequal sites.
pub fn diff_sites(
    shadowed: (Side<'_>, Callable),
    loaded: (Side<'_>, Callable),
    depth_limit: usize,
) -> Vec<DiffSite> {
    let (s, l) = (shadowed.0, loaded.0);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(shadowed.1, loaded.1, 1usize)]);
    while let Some((a, b, depth)) = queue.pop_front() {
        if depth >= depth_limit || !seen.insert((a, b)) {
            continue;
        }
        let (pa, ba) = s.program.callable_body(a);
        let (pb, bb) = l.program.callable_body(b);
        let ca = canonical_body(pa, ba);
        let cb = canonical_body(pb, bb);
        if ca != cb {
            out.push(DiffSite {
                shadowed: Some(s.program.callable_ref(a)),
                loaded: Some(l.program.callable_ref(b)),
                depth,
                summary: summarize(&ca, &cb),
            });
        }
        let left: BTreeMap<_, _> = s.graph.callees(a).map(|c| (member_key(s.program, c), c)).collect();
        let right: BTreeMap<_, _> = l.graph.callees(b).map(|c| (member_key(l.program, c), c)).collect();
        for (key, ca) in &left {
            match right.get(key) {
                Some(cb) => queue.push_back((*ca, *cb, depth + 1)),
                None if depth + 1 < depth_limit => out.push(DiffSite {
                    shadowed: Some(s.program.callable_ref(*ca)),
                    loaded: None,
                    depth: depth + 1,
                    summary: "callee only in shadowed version".into(),
                }),
                None => {}
            }
        }
        for (key, cb) in &right {
            if !left.contains_key(key) && depth + 1 < depth_limit {
                out.push(DiffSite {
                    shadowed: None,
                    loaded: Some(l.program.callable_ref(*cb)),
                    depth: depth + 1,
                    summary: "callee only in loaded version".into(),
                });
            }
        }
    }
    out.sort_by_key(|d| d.depth);
    out
}
