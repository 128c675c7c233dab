//! Dependency tree construction and nearest-wins mediation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::workspace::Workspace;
use super::ResolveError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub library: String,
    pub version: String,
    pub depth: usize,
    pub parent: Option<usize>,
    /// Declaration indices from the root down to this node.
    pub path: Vec<usize>,
    /// Class names shipped by this package.
    pub classes: Vec<String>,
}

/// Nodes in breadth-first order; node 0 is the project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    pub nodes: Vec<TreeNode>,
}

impl DependencyTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn children(&self, idx: usize) -> impl Iterator<Item = (usize, &TreeNode)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.parent == Some(idx))
    }

    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parent.map(|p| (p, i, *n.path.last().unwrap())))
            .collect()
    }

    fn ancestors(&self, mut idx: usize) -> impl Iterator<Item = &TreeNode> {
        let mut out = Vec::new();
        loop {
            out.push(&self.nodes[idx]);
            match self.nodes[idx].parent {
                Some(p) => idx = p,
                None => break,
            }
        }
        out.into_iter()
    }
}

pub fn build_tree(ws: &Workspace) -> Result<DependencyTree, ResolveError> {
    let root = &ws.project;
    let mut tree = DependencyTree {
        nodes: vec![TreeNode {
            library: root.manifest.name.clone(),
            version: root.manifest.version.clone(),
            depth: 0,
            parent: None,
            path: Vec::new(),
            classes: root.unit.classes.iter().map(|c| c.name.clone()).collect(),
        }],
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let node = tree.nodes[idx].clone();
        let pkg = ws
            .package(&node.library, &node.version)
            .ok_or_else(|| ResolveError::MissingArchive {
                name: node.library.clone(),
                version: node.version.clone(),
            })?;
        for (decl, dep) in pkg.manifest.dependencies.iter().enumerate() {
            let in_chain = tree
                .ancestors(idx)
                .any(|a| a.library == dep.name && a.version == dep.version);
            if in_chain {
                let mut chain: Vec<String> = tree
                    .ancestors(idx)
                    .map(|a| format!("{}@{}", a.library, a.version))
                    .collect();
                chain.reverse();
                chain.push(format!("{}@{}", dep.name, dep.version));
                return Err(ResolveError::Cycle(chain.join(" -> ")));
            }
            let child = ws
                .package(&dep.name, &dep.version)
                .ok_or_else(|| ResolveError::MissingArchive {
                    name: dep.name.clone(),
                    version: dep.version.clone(),
                })?;
            let mut path = node.path.clone();
            path.push(decl);
            tree.nodes.push(TreeNode {
                library: dep.name.clone(),
                version: dep.version.clone(),
                depth: node.depth + 1,
                parent: Some(idx),
                path,
                classes: child.unit.classes.iter().map(|c| c.name.clone()).collect(),
            });
            queue.push_back(tree.nodes.len() - 1);
        }
    }
    Ok(tree)
}

/// Where a class is loaded from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassOrigin {
    pub library: String,
    pub version: String,
}

/// A class shipped by a library whose own copy lost to another library's.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShadowedClass {
    pub class: String,
    pub library: String,
    pub version: String,
    pub winner: ClassOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediationStep {
    pub library: String,
    pub version: String,
    pub depth: usize,
    pub path: Vec<usize>,
    pub outcome: MediationOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediationOutcome {
    Loaded,
    Duplicate,
    Shadowed,
    /// Below a shadowed node; its dependencies are never consulted.
    Omitted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classpath {
    pub loaded: BTreeMap<String, String>,
    pub shadowed: BTreeMap<String, BTreeSet<String>>,
    pub class_index: BTreeMap<String, ClassOrigin>,
    pub shadowed_classes: Vec<ShadowedClass>,
    /// Libraries in load priority order (project first).
    pub order: Vec<String>,
    pub trace: Vec<MediationStep>,
}

/// Nearest wins; equal depth falls back to breadth-first declaration order.
pub fn mediate(tree: &DependencyTree) -> Classpath {
    let mut loaded: BTreeMap<String, String> = BTreeMap::new();
    let mut shadowed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut order = Vec::new();
    let mut classes_of: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut dead = vec![false; tree.nodes.len()];
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.parent.is_some_and(|p| dead[p]) {
            dead[i] = true;
            trace.push(step(node, MediationOutcome::Omitted));
            continue;
        }
        let outcome = match loaded.get(&node.library) {
            None => {
                loaded.insert(node.library.clone(), node.version.clone());
                order.push(node.library.clone());
                classes_of.insert(node.library.clone(), node.classes.clone());
                MediationOutcome::Loaded
            }
            Some(v) if *v == node.version => MediationOutcome::Duplicate,
            Some(_) => {
                shadowed
                    .entry(node.library.clone())
                    .or_default()
                    .insert(node.version.clone());
                dead[i] = true;
                MediationOutcome::Shadowed
            }
        };
        trace.push(step(node, outcome));
    }
    let (class_index, shadowed_classes) =
        index_classes(&order, &loaded, |lib| classes_of[lib].clone(), &BTreeMap::new());
    Classpath {
        loaded,
        shadowed,
        class_index,
        shadowed_classes,
        order,
        trace,
    }
}

fn step(node: &TreeNode, outcome: MediationOutcome) -> MediationStep {
    MediationStep {
        library: node.library.clone(),
        version: node.version.clone(),
        depth: node.depth,
        path: node.path.clone(),
        outcome,
    }
}

/// Assigns each class name to the highest-priority loaded library that
/// ships it, unless `class_overrides` pins it to another library.
pub(crate) fn index_classes(
    order: &[String],
    loaded: &BTreeMap<String, String>,
    classes_of: impl Fn(&str) -> Vec<String>,
    class_overrides: &BTreeMap<String, String>,
) -> (BTreeMap<String, ClassOrigin>, Vec<ShadowedClass>) {
    let mut decl: BTreeMap<String, Vec<ClassOrigin>> = BTreeMap::new();
    for lib in order {
        let origin = ClassOrigin {
            library: lib.clone(),
            version: loaded[lib].clone(),
        };
        for c in classes_of(lib) {
            decl.entry(c).or_default().push(origin.clone());
        }
    }
    let mut index = BTreeMap::new();
    let mut shadowed = Vec::new();
    for (class, mut origins) in decl {
        if let Some(lib) = class_overrides.get(&class) {
            if let Some(pos) = origins.iter().position(|o| &o.library == lib) {
                let pinned = origins.remove(pos);
                origins.insert(0, pinned);
            }
        }
        let winner = origins[0].clone();
        for o in &origins[1..] {
            shadowed.push(ShadowedClass {
                class: class.clone(),
                library: o.library.clone(),
                version: o.version.clone(),
                winner: winner.clone(),
            });
        }
        index.insert(class, winner);
    }
    (index, shadowed)
}
