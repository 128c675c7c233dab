//! Dependency trees, version mediation and linking.

mod link;
mod tree;
pub mod typing;
mod workspace;

use std::path::Path;

use thiserror::Error;

pub use link::{
    force_load, force_load_with, link, resolve, ApiRef, Callable, ClassId, CtorHandle, LinkDiagnostic,
    LoadedUnit, MethodHandle, Overrides, ResolvedProgram,
};
pub use tree::{
    build_tree, mediate, ClassOrigin, Classpath, DependencyTree, MediationOutcome, MediationStep,
    ShadowedClass, TreeNode,
};
pub use workspace::{Dependency, Manifest, Package, VersionSet, Workspace};

use crate::lang::ParseError;

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("{file}: {source}")]
    Parse {
        file: String,
        #[source]
        source: ParseError,
    },
    #[error("missing archive {name}@{version}")]
    MissingArchive { name: String, version: String },
    #[error("dependency cycle: {0}")]
    Cycle(String),
    #[error("override names library `{0}` which is not on the classpath")]
    UnknownOverride(String),
    #[error("inheritance cycle through `{0}`")]
    InheritanceCycle(String),
    #[error("link failed with {} unresolved reference(s); first: {}", .0.len(), .0[0])]
    Link(Vec<LinkDiagnostic>),
}

impl ResolveError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        ResolveError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
