//! Approach level plus normalized branch distance along dependency paths.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::detector::CallGraph;
use crate::lang::ast::{walk_expr, walk_stmt_exprs, ExprKind, Span, Stmt, StmtKind};
use crate::lang::interp::{PredSite, Trace};
use crate::resolver::{ApiRef, Callable, ResolvedProgram};

use super::case::TestRun;

/// Raw distance assumed for a predicate that was never evaluated.
pub const UNEVALUATED: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub approach_level: usize,
    /// In `[0, 1)`.
    pub branch_distance: f64,
    pub covered: bool,
}

impl FitnessScore {
    pub const COVERED: FitnessScore = FitnessScore {
        approach_level: 0,
        branch_distance: 0.0,
        covered: true,
    };

    /// Lower is better; zero exactly when covered.
    pub fn total(&self) -> f64 {
        self.approach_level as f64 + self.branch_distance
    }
}

pub fn normalize(d: f64) -> f64 {
    d / (d + 1.0)
}

/// A predicate that must take `need` for execution to continue toward the
/// call site.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Guard {
    offset: u32,
    need: bool,
}

#[derive(Debug, Clone)]
struct Hop {
    caller: Callable,
    callee: Callable,
    /// Guard chains, one per call site that can reach `callee`.
    sites: Vec<Vec<Guard>>,
}

impl Hop {
    fn levels(&self) -> usize {
        self.sites.iter().map(Vec::len).min().unwrap_or(0) + 1
    }
}

#[derive(Debug, Clone)]
struct Route {
    entry: ApiRef,
    start: Callable,
    hops: Vec<Hop>,
}

/// Control structure of every dependency path toward one target.
#[derive(Debug, Clone)]
pub struct FitnessTarget {
    pub target: Callable,
    routes: Vec<Route>,
}

impl FitnessTarget {
    /// `paths` are callable chains ending at `target` in `program`.
    pub fn new(program: &ResolvedProgram, graph: &CallGraph, target: Callable, paths: &[Vec<Callable>]) -> Self {
        let routes = paths
            .iter()
            .filter(|p| p.last() == Some(&target))
            .map(|p| Route {
                entry: program.callable_ref(p[0]),
                start: p[0],
                hops: p
                    .windows(2)
                    .map(|w| {
                        let (_, body) = program.callable_body(w[0]);
                        let sites: BTreeSet<Span> = graph
                            .edges
                            .get(&w[0])
                            .into_iter()
                            .flatten()
                            .filter(|e| e.callee == w[1])
                            .map(|e| e.site)
                            .collect();
                        Hop {
                            caller: w[0],
                            callee: w[1],
                            sites: sites.iter().filter_map(|s| guards_to(body, s.start)).collect(),
                        }
                    })
                    .collect(),
            })
            .collect();
        FitnessTarget { target, routes }
    }

    /// Entry methods a test may call.
    pub fn entries(&self) -> Vec<ApiRef> {
        let mut out: Vec<ApiRef> = Vec::new();
        for r in &self.routes {
            if !out.contains(&r.entry) {
                out.push(r.entry.clone());
            }
        }
        out
    }

    /// Control depth of the shallowest route from `entry`.
    pub fn control_depth(&self, entry: &ApiRef) -> Option<usize> {
        self.routes
            .iter()
            .filter(|r| &r.entry == entry)
            .map(|r| r.hops.iter().map(Hop::levels).sum())
            .min()
    }

    pub fn score(&self, entry: &ApiRef, run: &TestRun) -> FitnessScore {
        let worst = |levels: usize| FitnessScore {
            approach_level: levels,
            branch_distance: normalize(UNEVALUATED),
            covered: false,
        };
        let Some(depth) = self.control_depth(entry) else {
            return worst(usize::MAX / 2);
        };
        let trace = match (&run.trace, run.entered) {
            (Some(t), true) => t,
            _ => return worst(depth),
        };
        if trace.entered.contains(&self.target) {
            return FitnessScore::COVERED;
        }
        self.routes
            .iter()
            .filter(|r| &r.entry == entry)
            .map(|r| route_score(r, trace))
            .min_by(|a, b| a.total().total_cmp(&b.total()))
            .unwrap_or_else(|| worst(depth))
    }
}

fn route_score(route: &Route, trace: &Trace) -> FitnessScore {
    let total: usize = route.hops.iter().map(Hop::levels).sum();
    if !trace.entered.contains(&route.start) {
        return FitnessScore {
            approach_level: total,
            branch_distance: normalize(UNEVALUATED),
            covered: false,
        };
    }
    for (i, hop) in route.hops.iter().enumerate() {
        if trace.entered.contains(&hop.callee) {
            continue;
        }
        let rest: usize = route.hops[i + 1..].iter().map(Hop::levels).sum();
        let mut best: Option<FitnessScore> = None;
        for guards in &hop.sites {
            let s = site_score(hop.caller, guards, rest, trace);
            if best.is_none_or(|b| s.total() < b.total()) {
                best = Some(s);
            }
        }
        // A call edge without a locatable site: only the call itself is left.
        return best.unwrap_or(FitnessScore {
            approach_level: rest,
            branch_distance: normalize(1.0),
            covered: false,
        });
    }
    // Every callee entered except through some other route.
    FitnessScore {
        approach_level: 0,
        branch_distance: normalize(1.0),
        covered: false,
    }
}

fn site_score(caller: Callable, guards: &[Guard], rest: usize, trace: &Trace) -> FitnessScore {
    for (k, g) in guards.iter().enumerate() {
        let site = PredSite {
            callable: caller,
            offset: g.offset,
        };
        let d = match trace.preds.get(&site) {
            None => UNEVALUATED,
            Some(st) => {
                let (hit, best) = if g.need {
                    (st.hit_true, st.best_true)
                } else {
                    (st.hit_false, st.best_false)
                };
                if hit {
                    continue;
                }
                best
            }
        };
        return FitnessScore {
            approach_level: (guards.len() - 1 - k) + 1 + rest,
            branch_distance: normalize(d),
            covered: false,
        };
    }
    FitnessScore {
        approach_level: rest,
        branch_distance: normalize(1.0),
        covered: false,
    }
}

fn holds_site(stmt: &Stmt, offset: u32) -> bool {
    let mut found = false;
    walk_stmt_exprs(stmt, &mut |e| {
        if e.span.start == offset && matches!(e.kind, ExprKind::Call { .. } | ExprKind::New { .. }) {
            found = true;
        }
    });
    found
}

fn expr_holds_site(e: &crate::lang::ast::Expr, offset: u32) -> bool {
    let mut found = false;
    walk_expr(e, &mut |x| {
        if x.span.start == offset && matches!(x.kind, ExprKind::Call { .. } | ExprKind::New { .. }) {
            found = true;
        }
    });
    found
}

fn always_returns(block: &[Stmt]) -> bool {
    matches!(block.last().map(|s| &s.kind), Some(StmtKind::Return(_)))
}

/// Predicates controlling the call site at `offset`, outermost first:
/// enclosing conditions, earlier `require`s and earlier early-return tests.
fn guards_to(block: &[Stmt], offset: u32) -> Option<Vec<Guard>> {
    let mut before = Vec::new();
    for stmt in block {
        if !holds_site(stmt, offset) {
            match &stmt.kind {
                StmtKind::Require(c) => before.push(Guard {
                    offset: c.span.start,
                    need: true,
                }),
                StmtKind::If {
                    cond,
                    then_block,
                    else_block: None,
                } if always_returns(then_block) => before.push(Guard {
                    offset: cond.span.start,
                    need: false,
                }),
                _ => {}
            }
            continue;
        }
        match &stmt.kind {
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } if !expr_holds_site(cond, offset) => {
                before.push(Guard {
                    offset: cond.span.start,
                    need: then_block.iter().any(|s| holds_site(s, offset)),
                });
                let inner = if then_block.iter().any(|s| holds_site(s, offset)) {
                    then_block
                } else {
                    else_block.as_deref().unwrap_or(&[])
                };
                before.extend(guards_to(inner, offset)?);
            }
            StmtKind::While { cond, body, .. } if !expr_holds_site(cond, offset) => {
                before.push(Guard {
                    offset: cond.span.start,
                    need: true,
                });
                before.extend(guards_to(body, offset)?);
            }
            _ => {}
        }
        return Some(before);
    }
    None
}
