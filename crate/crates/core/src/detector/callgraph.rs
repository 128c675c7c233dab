//! Class-hierarchy-analysis call graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::lang::ast::{ExprKind, Span};
use crate::resolver::typing::{static_class, walk_typed};
use crate::resolver::{ApiRef, Callable, ResolvedProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallEdge {
    pub callee: Callable,
    pub site: Span,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    /// Entry methods and every callable that takes part in an edge.
    pub nodes: BTreeSet<Callable>,
    pub edges: BTreeMap<Callable, Vec<CallEdge>>,
    pub entries: Vec<Callable>,
}

impl CallGraph {
    pub fn callees(&self, c: Callable) -> impl Iterator<Item = Callable> + '_ {
        let mut seen = BTreeSet::new();
        self.edges
            .get(&c)
            .into_iter()
            .flatten()
            .map(|e| e.callee)
            .filter(move |c| seen.insert(*c))
    }

    pub fn has_edge(&self, from: Callable, to: Callable) -> bool {
        self.edges.get(&from).is_some_and(|es| es.iter().any(|e| e.callee == to))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    /// Everything reachable from the entry methods, entries included.
    pub fn reachable(&self) -> BTreeSet<Callable> {
        let mut seen: BTreeSet<Callable> = self.entries.iter().copied().collect();
        let mut queue: VecDeque<Callable> = self.entries.iter().copied().collect();
        while let Some(c) = queue.pop_front() {
            for d in self.callees(c) {
                if seen.insert(d) {
                    queue.push_back(d);
                }
            }
        }
        seen
    }

    pub fn summary(&self, program: &ResolvedProgram) -> CallGraphSummary {
        CallGraphSummary {
            nodes: self.nodes.len(),
            edges: self.edge_count(),
            entries: self.entries.iter().map(|c| program.callable_ref(*c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallGraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub entries: Vec<ApiRef>,
}

/// Targets a call site may reach: every override visible under the
/// receiver's static type, or every same-named method when it is unknown.
fn call_targets(
    program: &ResolvedProgram,
    static_type: Option<crate::resolver::ClassId>,
    method: &str,
    arity: usize,
) -> Vec<Callable> {
    let classes = match static_type {
        Some(c) => program.subclasses(c),
        None => program.class_ids().collect(),
    };
    let mut out = BTreeSet::new();
    for c in classes {
        for h in program.dispatch_candidates(c, method, arity) {
            out.insert(Callable::Method(*h));
        }
    }
    out.into_iter().collect()
}

pub fn build_call_graph(program: &ResolvedProgram) -> CallGraph {
    let mut g = CallGraph {
        entries: program.entry_methods().into_iter().map(Callable::Method).collect(),
        ..CallGraph::default()
    };
    g.nodes.extend(g.entries.iter().copied());
    for class in program.class_ids() {
        let callables = program
            .methods(class)
            .map(Callable::Method)
            .chain(program.ctors(class).map(Callable::Ctor));
        for caller in callables {
            let (params, body) = program.callable_body(caller);
            let mut edges = Vec::new();
            walk_typed(program, Some(class), params, body, &mut |e, env| match &e.kind {
                ExprKind::Call {
                    receiver,
                    method,
                    args,
                } => {
                    let st = static_class(program, Some(class), env, receiver);
                    for callee in call_targets(program, st, method, args.len()) {
                        edges.push(CallEdge { callee, site: e.span });
                    }
                }
                ExprKind::New { class: name, args } => {
                    if let Some(id) = program.class_id(name) {
                        for h in program.ctors(id) {
                            if program.ctor_decl(h).params.len() == args.len() {
                                edges.push(CallEdge {
                                    callee: Callable::Ctor(h),
                                    site: e.span,
                                });
                            }
                        }
                    }
                }
                _ => {}
            });
            if !edges.is_empty() {
                g.nodes.insert(caller);
                g.nodes.extend(edges.iter().map(|e| e.callee));
                g.edges.insert(caller, edges);
            }
        }
    }
    g
}
