//! On-disk and in-memory workspace layout.
//!
//! ```text
//! project/manifest.json
//! project/src/*.ml
//! libs/<name>/<version>/manifest.json
//! libs/<name>/<version>/src/*.ml
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ResolveError;
use crate::lang::{self, pretty, SourceUnit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
}

impl Manifest {
    pub fn new(name: &str, version: &str, deps: &[(&str, &str)]) -> Self {
        Manifest {
            name: name.to_string(),
            version: version.to_string(),
            dependencies: deps
                .iter()
                .map(|(n, v)| Dependency {
                    name: n.to_string(),
                    version: v.to_string(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ResolveError> {
        let m: Manifest =
            serde_json::from_str(text).map_err(|e| ResolveError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ResolveError> {
        if self.name.is_empty() || self.version.is_empty() {
            return Err(ResolveError::Manifest("name and version must be nonempty".into()));
        }
        let mut seen = BTreeSet::new();
        for d in &self.dependencies {
            if !seen.insert((&d.name, &d.version)) {
                return Err(ResolveError::Manifest(format!(
                    "duplicate dependency {}@{} in {}",
                    d.name, d.version, self.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// A manifest plus the merged source of all its `.ml` files.
#[derive(Debug, Clone, PartialEq)]
pub struct Package {
    pub manifest: Manifest,
    pub unit: SourceUnit,
}

impl Package {
    pub fn new(manifest: Manifest, unit: SourceUnit) -> Result<Self, ResolveError> {
        manifest.validate()?;
        if unit.library != manifest.name || unit.version != manifest.version {
            return Err(ResolveError::Manifest(format!(
                "source header {}@{} does not match manifest {}@{}",
                unit.library, unit.version, manifest.name, manifest.version
            )));
        }
        Ok(Package { manifest, unit })
    }

    pub fn key(&self) -> (String, String) {
        (self.manifest.name.clone(), self.manifest.version.clone())
    }

    fn load(dir: &Path) -> Result<Self, ResolveError> {
        let mpath = dir.join("manifest.json");
        let text = fs::read_to_string(&mpath).map_err(|e| ResolveError::io(&mpath, e))?;
        let manifest = Manifest::from_json(&text)?;
        let src = dir.join("src");
        let mut files: Vec<PathBuf> = match fs::read_dir(&src) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "ml"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(ResolveError::io(&src, e)),
        };
        files.sort();
        let mut merged = SourceUnit {
            library: manifest.name.clone(),
            version: manifest.version.clone(),
            globals: Vec::new(),
            classes: Vec::new(),
        };
        for f in files {
            let text = fs::read_to_string(&f).map_err(|e| ResolveError::io(&f, e))?;
            let unit = lang::parse(&text).map_err(|source| ResolveError::Parse {
                file: f.display().to_string(),
                source,
            })?;
            if unit.library != manifest.name || unit.version != manifest.version {
                return Err(ResolveError::Manifest(format!(
                    "{} declares {}@{} inside package {}@{}",
                    f.display(),
                    unit.library,
                    unit.version,
                    manifest.name,
                    manifest.version
                )));
            }
            for c in unit.classes {
                if merged.class(&c.name).is_some() {
                    return Err(ResolveError::Parse {
                        file: f.display().to_string(),
                        source: lang::ParseError::DuplicateClass(c.name),
                    });
                }
                merged.classes.push(c);
            }
            for g in unit.globals {
                if merged.global(&g.name).is_some() {
                    return Err(ResolveError::Parse {
                        file: f.display().to_string(),
                        source: lang::ParseError::DuplicateGlobal(g.name),
                    });
                }
                merged.globals.push(g);
            }
        }
        Ok(Package { manifest, unit: merged })
    }

    fn write(&self, dir: &Path, file_stem: &str) -> Result<(), ResolveError> {
        let src = dir.join("src");
        fs::create_dir_all(&src).map_err(|e| ResolveError::io(&src, e))?;
        let m = dir.join("manifest.json");
        fs::write(&m, self.manifest.to_json()).map_err(|e| ResolveError::io(&m, e))?;
        let f = src.join(format!("{file_stem}.ml"));
        fs::write(&f, pretty(&self.unit)).map_err(|e| ResolveError::io(&f, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub project: Package,
    /// Every available library version, keyed by (name, version).
    pub archive: BTreeMap<(String, String), Package>,
}

impl Workspace {
    pub fn new(project: Package, libs: impl IntoIterator<Item = Package>) -> Self {
        Workspace {
            project,
            archive: libs.into_iter().map(|p| (p.key(), p)).collect(),
        }
    }

    /// Builds a workspace from source texts; each manifest's sources are
    /// parsed and checked against it.
    pub fn from_sources(
        project: (Manifest, &str),
        libs: &[(Manifest, &str)],
    ) -> Result<Self, ResolveError> {
        let load = |(m, text): (Manifest, &str)| -> Result<Package, ResolveError> {
            let unit = lang::parse(text).map_err(|source| ResolveError::Parse {
                file: format!("{}@{}", m.name, m.version),
                source,
            })?;
            Package::new(m, unit)
        };
        let project = load(project)?;
        let libs = libs
            .iter()
            .map(|(m, t)| load((m.clone(), t)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Workspace::new(project, libs))
    }

    pub fn package(&self, name: &str, version: &str) -> Option<&Package> {
        if self.project.manifest.name == name && self.project.manifest.version == version {
            return Some(&self.project);
        }
        self.archive.get(&(name.to_string(), version.to_string()))
    }

    pub fn versions(&self, name: &str) -> VersionSet {
        VersionSet {
            library: name.to_string(),
            versions: self
                .archive
                .keys()
                .filter(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .collect(),
        }
    }

    pub fn load(root: &Path) -> Result<Self, ResolveError> {
        let project = Package::load(&root.join("project"))?;
        let mut archive = BTreeMap::new();
        let libs = root.join("libs");
        if libs.is_dir() {
            for lib in read_dirs(&libs)? {
                for ver in read_dirs(&lib)? {
                    let p = Package::load(&ver)?;
                    let dir_name = lib.file_name().unwrap().to_string_lossy().to_string();
                    let dir_ver = ver.file_name().unwrap().to_string_lossy().to_string();
                    if p.manifest.name != dir_name || p.manifest.version != dir_ver {
                        return Err(ResolveError::Manifest(format!(
                            "{} holds {}@{}",
                            ver.display(),
                            p.manifest.name,
                            p.manifest.version
                        )));
                    }
                    archive.insert(p.key(), p);
                }
            }
        }
        Ok(Workspace { project, archive })
    }

    pub fn write(&self, root: &Path) -> Result<(), ResolveError> {
        self.project.write(&root.join("project"), "main")?;
        for ((name, version), p) in &self.archive {
            p.write(&root.join("libs").join(name).join(version), &name.to_lowercase())?;
        }
        Ok(())
    }
}

fn read_dirs(dir: &Path) -> Result<Vec<PathBuf>, ResolveError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ResolveError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

/// All versions of one library present in the archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionSet {
    pub library: String,
    pub versions: BTreeSet<String>,
}
