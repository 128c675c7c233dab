//! Conflicting API pairs, their dependency paths and the isomerous check.

mod alpha;
mod callgraph;
mod isomer;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

pub use alpha::canonical_body;
pub use callgraph::{build_call_graph, CallEdge, CallGraph, CallGraphSummary};
pub use isomer::{diff_sites, DiffSite, Side, DEFAULT_DEPTH_LIMIT};

use crate::resolver::{
    build_tree, force_load_with, link, mediate, ApiRef, Callable, Overrides, ResolveError, ResolvedProgram,
    Workspace,
};

pub const DEFAULT_MAX_PATHS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub depth_limit: usize,
    pub max_paths: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            depth_limit: DEFAULT_DEPTH_LIMIT,
            max_paths: DEFAULT_MAX_PATHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictingApiPair {
    pub shadowed: ApiRef,
    /// Same-signature method of the loaded class, or the loaded superclass
    /// method it would override when `fallback_used`.
    pub loaded: ApiRef,
    pub fallback_used: bool,
    pub isomerous: Option<bool>,
    pub diff_sites: Vec<DiffSite>,
    /// Pins that load the shadowed version (the Original configuration).
    pub original: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Original,
    Actual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyPath {
    pub kind: PathKind,
    pub chain: Vec<ApiRef>,
}

impl DependencyPath {
    pub fn entry(&self) -> &ApiRef {
        &self.chain[0]
    }

    pub fn terminal(&self) -> &ApiRef {
        self.chain.last().expect("paths are nonempty")
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }
}

/// The two program configurations a pair is compared under.
pub struct Configs {
    pub original: ResolvedProgram,
    pub actual: ResolvedProgram,
    pub ep_graph: CallGraph,
    pub fp_graph: CallGraph,
}

impl Configs {
    pub fn build(ws: &Workspace, original: &Overrides) -> Result<Self, ResolveError> {
        let actual = link(ws, &mediate(&build_tree(ws)?))?;
        let original = force_load_with(ws, original)?;
        Ok(Configs {
            ep_graph: build_call_graph(&original),
            fp_graph: build_call_graph(&actual),
            original,
            actual,
        })
    }

    pub fn shadowed_callable(&self, pair: &ConflictingApiPair) -> Option<Callable> {
        find_callable(&self.original, &pair.shadowed)
    }

    pub fn loaded_callable(&self, pair: &ConflictingApiPair) -> Option<Callable> {
        find_callable(&self.actual, &pair.loaded)
    }
}

/// Method or constructor named by `api`, if its exact version is loaded.
pub fn find_callable(program: &ResolvedProgram, api: &ApiRef) -> Option<Callable> {
    if api.signature.name == "new" {
        let id = program.class_id(&api.class)?;
        let unit = program.class_unit(id);
        if unit.library != api.library || unit.version != api.version {
            return None;
        }
        program
            .ctors(id)
            .find(|h| program.ctor_decl(*h).param_types().eq(api.signature.params.iter()))
            .map(Callable::Ctor)
    } else {
        program.find_api(api).map(Callable::Method)
    }
}

/// One candidate shadowed configuration per shadowed library version and
/// per shadowed class.
fn shadow_configurations(ws: &Workspace) -> Result<Vec<Overrides>, ResolveError> {
    let cp = mediate(&build_tree(ws)?);
    let mut out = Vec::new();
    for (lib, versions) in &cp.shadowed {
        for v in versions {
            out.push(Overrides {
                libraries: BTreeMap::from([(lib.clone(), v.clone())]),
                classes: BTreeMap::new(),
            });
        }
    }
    for sc in &cp.shadowed_classes {
        out.push(Overrides {
            libraries: BTreeMap::new(),
            classes: BTreeMap::from([(sc.class.clone(), sc.library.clone())]),
        });
    }
    Ok(out)
}

/// Result of scanning a workspace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub pairs: Vec<PairRecord>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair: ConflictingApiPair,
    pub original_paths: Vec<DependencyPath>,
    pub actual_paths: Vec<DependencyPath>,
}

impl Inventory {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("inventory serializes")
    }
}

/// Loaded counterpart of a shadowed member: same signature in the loaded
/// class, else the nearest loaded superclass method with that signature.
fn replaceable(actual: &ResolvedProgram, shadowed: &ApiRef) -> Option<(ApiRef, bool)> {
    let id = actual.class_id(&shadowed.class)?;
    if shadowed.signature.name == "new" {
        let h = actual
            .ctors(id)
            .find(|h| actual.ctor_decl(*h).param_types().eq(shadowed.signature.params.iter()))?;
        return Some((actual.ctor_ref(h), false));
    }
    let own = actual
        .methods(id)
        .find(|h| actual.method_decl(*h).signature() == shadowed.signature);
    if let Some(h) = own {
        return Some((actual.api_ref(h), false));
    }
    let sup = actual.superclass(id)?;
    let h = actual.lookup_signature(sup, &shadowed.signature)?;
    Some((actual.api_ref(h), true))
}

/// Every referenced member of every shadowed class version paired with its
/// loaded replacement. Pairs are returned without the isomerous verdict.
pub fn find_conflicting_pairs(ws: &Workspace) -> Result<(Vec<ConflictingApiPair>, Vec<String>), ResolveError> {
    let mut pairs = Vec::new();
    let mut diagnostics = Vec::new();
    let actual = link(ws, &mediate(&build_tree(ws)?))?;
    for ov in shadow_configurations(ws)? {
        let original = match force_load_with(ws, &ov) {
            Ok(p) => p,
            Err(e) => {
                diagnostics.push(format!("shadowed configuration {ov:?} does not link: {e}"));
                continue;
            }
        };
        let reachable = build_call_graph(&original).reachable();
        let shadowed_classes: BTreeSet<String> = if ov.classes.is_empty() {
            let lib = ov.libraries.keys().next().expect("one library pin");
            original
                .class_ids()
                .filter(|c| &original.class_unit(*c).library == lib)
                .map(|c| original.class_name(c).to_string())
                .collect()
        } else {
            ov.classes.keys().cloned().collect()
        };
        for c in reachable {
            let api = original.callable_ref(c);
            if !shadowed_classes.contains(&api.class) {
                continue;
            }
            match replaceable(&actual, &api) {
                Some((loaded, fallback_used)) => {
                    if loaded == api {
                        continue;
                    }
                    pairs.push(ConflictingApiPair {
                        shadowed: api,
                        loaded,
                        fallback_used,
                        isomerous: None,
                        diff_sites: Vec::new(),
                        original: ov.clone(),
                    })
                }
                None => diagnostics.push(format!("{api} has no loaded replacement (crash-class conflict)")),
            }
        }
    }
    Ok((pairs, diagnostics))
}

/// Acyclic call chains from entry methods to `target`, shortest first.
pub fn paths_to(graph: &CallGraph, target: Callable, cap: usize) -> Vec<Vec<Callable>> {
    let mut out = Vec::new();
    let mut queue: VecDeque<Vec<Callable>> = graph.entries.iter().map(|e| vec![*e]).collect();
    // Prune nodes that cannot reach the target.
    let mut reaches = BTreeSet::from([target]);
    loop {
        let before = reaches.len();
        for (from, es) in &graph.edges {
            if es.iter().any(|e| reaches.contains(&e.callee)) {
                reaches.insert(*from);
            }
        }
        if reaches.len() == before {
            break;
        }
    }
    while let Some(path) = queue.pop_front() {
        if out.len() >= cap {
            break;
        }
        let last = *path.last().unwrap();
        if !reaches.contains(&last) {
            continue;
        }
        if last == target {
            out.push(path);
            continue;
        }
        for next in graph.callees(last) {
            if !path.contains(&next) && reaches.contains(&next) {
                let mut p = path.clone();
                p.push(next);
                queue.push_back(p);
            }
        }
    }
    out
}

/// Original paths ending at the shadowed member and, for each, the actual
/// path that shares its prefix and ends at the loaded member.
pub fn find_paths(
    pair: &ConflictingApiPair,
    configs: &Configs,
    max_paths: usize,
) -> (Vec<DependencyPath>, Vec<DependencyPath>) {
    let (Some(s), Some(l)) = (configs.shadowed_callable(pair), configs.loaded_callable(pair)) else {
        return (Vec::new(), Vec::new());
    };
    let mut eps = Vec::new();
    let mut fps = Vec::new();
    for path in paths_to(&configs.ep_graph, s, max_paths) {
        let ep: Vec<ApiRef> = path.iter().map(|c| configs.original.callable_ref(*c)).collect();
        let prefix: Option<Vec<Callable>> = ep[..ep.len() - 1]
            .iter()
            .map(|r| find_callable(&configs.actual, r).or_else(|| member_in(&configs.actual, r)))
            .collect();
        let Some(mut fp) = prefix else { continue };
        fp.push(l);
        let linked = fp.windows(2).all(|w| configs.fp_graph.has_edge(w[0], w[1]));
        if !linked {
            continue;
        }
        fps.push(DependencyPath {
            kind: PathKind::Actual,
            chain: fp.iter().map(|c| configs.actual.callable_ref(*c)).collect(),
        });
        eps.push(DependencyPath {
            kind: PathKind::Original,
            chain: ep,
        });
    }
    (eps, fps)
}

/// Same class and signature in whatever version `program` loads.
fn member_in(program: &ResolvedProgram, r: &ApiRef) -> Option<Callable> {
    let id = program.class_id(&r.class)?;
    let u = program.class_unit(id);
    let here = ApiRef {
        library: u.library.clone(),
        version: u.version.clone(),
        class: r.class.clone(),
        signature: r.signature.clone(),
    };
    find_callable(program, &here)
}

/// Runs the top-down differencing for one pair.
pub fn is_isomerous(pair: &ConflictingApiPair, configs: &Configs, depth_limit: usize) -> (bool, Vec<DiffSite>) {
    let (Some(s), Some(l)) = (configs.shadowed_callable(pair), configs.loaded_callable(pair)) else {
        return (false, Vec::new());
    };
    let sites = diff_sites(
        (
            Side {
                program: &configs.original,
                graph: &configs.ep_graph,
            },
            s,
        ),
        (
            Side {
                program: &configs.actual,
                graph: &configs.fp_graph,
            },
            l,
        ),
        depth_limit,
    );
    (!sites.is_empty(), sites)
}

/// Full detection over a workspace: pairs, paths and verdicts. Pairs
/// without an original path are dropped with a diagnostic.
pub fn scan(ws: &Workspace, config: &DetectorConfig) -> Result<Inventory, ResolveError> {
    let (pairs, mut diagnostics) = find_conflicting_pairs(ws)?;
    let mut cache: BTreeMap<String, Configs> = BTreeMap::new();
    let mut records = Vec::new();
    for mut pair in pairs {
        let key = serde_json::to_string(&pair.original).expect("overrides serialize");
        if !cache.contains_key(&key) {
            cache.insert(key.clone(), Configs::build(ws, &pair.original)?);
        }
        let configs = &cache[&key];
        let (eps, fps) = find_paths(&pair, configs, config.max_paths);
        if eps.is_empty() {
            diagnostics.push(format!("{}: no dependency path from an entry method", pair.shadowed));
            continue;
        }
        let (iso, sites) = is_isomerous(&pair, configs, config.depth_limit);
        pair.isomerous = Some(iso);
        pair.diff_sites = sites;
        records.push(PairRecord {
            pair,
            original_paths: eps,
            actual_paths: fps,
        });
    }
    Ok(Inventory {
        pairs: records,
        diagnostics,
    })
}
