//! Linking a classpath into an executable program.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::tree::{build_tree, index_classes, mediate, ClassOrigin, Classpath};
use super::typing::{static_class, walk_typed};
use super::workspace::Workspace;
use super::ResolveError;
use crate::lang::ast::*;

/// A method identified by its declaring library version and class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ApiRef {
    pub library: String,
    pub version: String,
    pub class: String,
    pub signature: Signature,
}

impl ApiRef {
    /// Same method modulo library version.
    pub fn same_member(&self, other: &ApiRef) -> bool {
        self.library == other.library && self.class == other.class && self.signature == other.signature
    }
}

impl fmt::Display for ApiRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}::{}::{}", self.library, self.version, self.class, self.signature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedUnit {
    pub library: String,
    pub version: String,
    pub unit: Arc<SourceUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodHandle {
    pub class: ClassId,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CtorHandle {
    pub class: ClassId,
    pub index: u32,
}

/// Anything a call site can invoke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Callable {
    Method(MethodHandle),
    Ctor(CtorHandle),
}

impl Callable {
    pub fn class(self) -> ClassId {
        match self {
            Callable::Method(h) => h.class,
            Callable::Ctor(h) => h.class,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ClassEntry {
    name: String,
    unit: usize,
    index: usize,
    superclass: Option<ClassId>,
}

/// One diagnostic produced by [`ResolvedProgram::check`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkDiagnostic {
    pub library: String,
    pub class: String,
    pub member: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for LinkDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}::{} at {}:{}: {}",
            self.library, self.class, self.member, self.line, self.col, self.message
        )
    }
}

/// Library and class pins applied on top of mediation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    pub libraries: BTreeMap<String, String>,
    pub classes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedProgram {
    pub project: String,
    pub units: Vec<LoadedUnit>,
    pub classpath: Classpath,
    classes: Vec<ClassEntry>,
    class_ids: BTreeMap<String, ClassId>,
    dispatch: HashMap<(ClassId, String, usize), Vec<MethodHandle>>,
    globals: BTreeMap<(String, String), (usize, usize)>,
}

impl ResolvedProgram {
    fn assemble(project: String, units: Vec<LoadedUnit>, classpath: Classpath) -> Result<Self, ResolveError> {
        let unit_of: BTreeMap<(String, String), usize> = units
            .iter()
            .enumerate()
            .map(|(i, u)| ((u.library.clone(), u.version.clone()), i))
            .collect();
        let mut classes = Vec::new();
        let mut class_ids = BTreeMap::new();
        for (name, origin) in &classpath.class_index {
            let u = unit_of[&(origin.library.clone(), origin.version.clone())];
            let index = units[u]
                .unit
                .classes
                .iter()
                .position(|c| &c.name == name)
                .expect("indexed class exists in its unit");
            class_ids.insert(name.clone(), ClassId(classes.len() as u32));
            classes.push(ClassEntry {
                name: name.clone(),
                unit: u,
                index,
                superclass: None,
            });
        }
        let mut globals = BTreeMap::new();
        for (ui, u) in units.iter().enumerate() {
            for (gi, g) in u.unit.globals.iter().enumerate() {
                globals.insert((u.library.clone(), g.name.clone()), (ui, gi));
            }
        }
        let mut p = ResolvedProgram {
            project,
            units,
            classpath,
            classes,
            class_ids,
            dispatch: HashMap::new(),
            globals,
        };
        for i in 0..p.classes.len() {
            let sup = p.decl_of(ClassId(i as u32)).superclass.clone();
            p.classes[i].superclass = sup.and_then(|s| p.class_ids.get(&s).copied());
        }
        for i in 0..p.classes.len() {
            let id = ClassId(i as u32);
            let mut seen = vec![id];
            let mut cur = p.classes[i].superclass;
            while let Some(c) = cur {
                if seen.contains(&c) {
                    return Err(ResolveError::InheritanceCycle(p.classes[i].name.clone()));
                }
                seen.push(c);
                cur = p.classes[c.0 as usize].superclass;
            }
        }
        p.build_dispatch();
        Ok(p)
    }

    /// Program made of the given units with no mediation; the first unit is
    /// the project and earlier units win class-name clashes.
    pub fn standalone(units: Vec<SourceUnit>) -> Result<Self, ResolveError> {
        let project = units
            .first()
            .map(|u| u.library.clone())
            .ok_or_else(|| ResolveError::Manifest("no units".into()))?;
        let loaded: BTreeMap<String, String> =
            units.iter().map(|u| (u.library.clone(), u.version.clone())).collect();
        let order: Vec<String> = units.iter().map(|u| u.library.clone()).collect();
        let classes_of = |lib: &str| {
            units
                .iter()
                .find(|u| u.library == lib)
                .map(|u| u.classes.iter().map(|c| c.name.clone()).collect())
                .unwrap_or_default()
        };
        let (class_index, shadowed_classes) =
            index_classes(&order, &loaded, classes_of, &BTreeMap::new());
        let classpath = Classpath {
            loaded,
            shadowed: BTreeMap::new(),
            class_index,
            shadowed_classes,
            order,
            trace: Vec::new(),
        };
        let units = units
            .into_iter()
            .map(|u| LoadedUnit {
                library: u.library.clone(),
                version: u.version.clone(),
                unit: Arc::new(u),
            })
            .collect();
        Self::assemble(project, units, classpath)
    }

    fn build_dispatch(&mut self) {
        let mut table: HashMap<(ClassId, String, usize), Vec<MethodHandle>> = HashMap::new();
        for i in 0..self.classes.len() {
            let id = ClassId(i as u32);
            let mut seen_keys: Vec<(String, Vec<TypeTag>)> = Vec::new();
            let mut cur = Some(id);
            while let Some(c) = cur {
                let decl = self.decl_of(c);
                for (mi, m) in decl.methods.iter().enumerate() {
                    let key = (m.name.clone(), m.param_types().cloned().collect::<Vec<_>>());
                    if seen_keys.contains(&key) {
                        continue;
                    }
                    seen_keys.push(key);
                    table
                        .entry((id, m.name.clone(), m.params.len()))
                        .or_default()
                        .push(MethodHandle {
                            class: c,
                            index: mi as u32,
                        });
                }
                cur = self.classes[c.0 as usize].superclass;
            }
        }
        self.dispatch = table;
    }

    fn decl_of(&self, id: ClassId) -> &ClassDecl {
        let e = &self.classes[id.0 as usize];
        &self.units[e.unit].unit.classes[e.index]
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.class_ids.get(name).copied()
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.classes.len() as u32).map(ClassId)
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        &self.classes[id.0 as usize].name
    }

    pub fn class_decl(&self, id: ClassId) -> &ClassDecl {
        self.decl_of(id)
    }

    pub fn class_unit(&self, id: ClassId) -> &LoadedUnit {
        &self.units[self.classes[id.0 as usize].unit]
    }

    pub fn superclass(&self, id: ClassId) -> Option<ClassId> {
        self.classes[id.0 as usize].superclass
    }

    pub fn is_project_class(&self, id: ClassId) -> bool {
        self.class_unit(id).library == self.project
    }

    /// `sub` equals `sup` or inherits from it.
    pub fn is_subclass(&self, sub: ClassId, sup: ClassId) -> bool {
        let mut cur = Some(sub);
        while let Some(c) = cur {
            if c == sup {
                return true;
            }
            cur = self.superclass(c);
        }
        false
    }

    pub fn subclasses(&self, id: ClassId) -> Vec<ClassId> {
        self.class_ids().filter(|c| self.is_subclass(*c, id)).collect()
    }

    /// Methods callable as `name/arity` on an instance of `id`, most derived
    /// first.
    pub fn dispatch_candidates(&self, id: ClassId, name: &str, arity: usize) -> &[MethodHandle] {
        self.dispatch
            .get(&(id, name.to_string(), arity))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn method_decl(&self, h: MethodHandle) -> &MethodDecl {
        &self.decl_of(h.class).methods[h.index as usize]
    }

    pub fn ctor_decl(&self, h: CtorHandle) -> &ConstructorDecl {
        &self.decl_of(h.class).constructors[h.index as usize]
    }

    pub fn ctors(&self, id: ClassId) -> impl Iterator<Item = CtorHandle> + '_ {
        (0..self.decl_of(id).constructors.len() as u32).map(move |index| CtorHandle { class: id, index })
    }

    pub fn methods(&self, id: ClassId) -> impl Iterator<Item = MethodHandle> + '_ {
        (0..self.decl_of(id).methods.len() as u32).map(move |index| MethodHandle { class: id, index })
    }

    /// Resolves `sig` on `id`, walking up the superclass chain.
    pub fn lookup_signature(&self, id: ClassId, sig: &Signature) -> Option<MethodHandle> {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if let Some(i) = self.decl_of(c).methods.iter().position(|m| m.signature() == *sig) {
                return Some(MethodHandle {
                    class: c,
                    index: i as u32,
                });
            }
            cur = self.superclass(c);
        }
        None
    }

    pub fn field_type(&self, id: ClassId, field: &str) -> Option<TypeTag> {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if let Some(f) = self.decl_of(c).field(field) {
                return Some(f.ty.clone());
            }
            cur = self.superclass(c);
        }
        None
    }

    /// All fields of `id` including inherited ones, base class first.
    pub fn all_fields(&self, id: ClassId) -> Vec<&FieldDecl> {
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            chain.push(c);
            cur = self.superclass(c);
        }
        chain
            .iter()
            .rev()
            .flat_map(|c| self.decl_of(*c).fields.iter())
            .collect()
    }

    pub fn global(&self, library: &str, name: &str) -> Option<&GlobalDecl> {
        let (u, g) = self.globals.get(&(library.to_string(), name.to_string()))?;
        Some(&self.units[*u].unit.globals[*g])
    }

    pub fn api_ref(&self, h: MethodHandle) -> ApiRef {
        let u = self.class_unit(h.class);
        ApiRef {
            library: u.library.clone(),
            version: u.version.clone(),
            class: self.class_name(h.class).to_string(),
            signature: self.method_decl(h).signature(),
        }
    }

    pub fn ctor_ref(&self, h: CtorHandle) -> ApiRef {
        let u = self.class_unit(h.class);
        let name = self.class_name(h.class).to_string();
        ApiRef {
            library: u.library.clone(),
            version: u.version.clone(),
            class: name.clone(),
            signature: Signature {
                name: "new".into(),
                params: self.ctor_decl(h).param_types().cloned().collect(),
                ret: TypeTag::Class(name),
            },
        }
    }

    pub fn callable_ref(&self, c: Callable) -> ApiRef {
        match c {
            Callable::Method(h) => self.api_ref(h),
            Callable::Ctor(h) => self.ctor_ref(h),
        }
    }

    pub fn callable_body(&self, c: Callable) -> (&[Param], &[Stmt]) {
        match c {
            Callable::Method(h) => {
                let m = self.method_decl(h);
                (&m.params, &m.body)
            }
            Callable::Ctor(h) => {
                let k = self.ctor_decl(h);
                (&k.params, &k.body)
            }
        }
    }

    /// Finds the method `api` names, if its class version is loaded here.
    pub fn find_api(&self, api: &ApiRef) -> Option<MethodHandle> {
        let id = self.class_id(&api.class)?;
        let u = self.class_unit(id);
        if u.library != api.library || u.version != api.version {
            return None;
        }
        let index = self.decl_of(id).methods.iter().position(|m| m.signature() == api.signature)?;
        Some(MethodHandle {
            class: id,
            index: index as u32,
        })
    }

    /// Public methods of public project classes.
    pub fn entry_methods(&self) -> Vec<MethodHandle> {
        self.class_ids()
            .filter(|c| self.is_project_class(*c) && self.decl_of(*c).visibility == Visibility::Public)
            .flat_map(|c| self.methods(c).collect::<Vec<_>>())
            .filter(|h| self.method_decl(*h).visibility == Visibility::Public)
            .collect()
    }

    pub fn origin(&self, id: ClassId) -> ClassOrigin {
        let u = self.class_unit(id);
        ClassOrigin {
            library: u.library.clone(),
            version: u.version.clone(),
        }
    }

    /// Every unresolvable reference in loaded code.
    pub fn check(&self) -> Vec<LinkDiagnostic> {
        let mut out = Vec::new();
        for id in self.class_ids() {
            let decl = self.decl_of(id);
            let lib = self.class_unit(id).library.clone();
            let diag = |member: &str, span: Span, message: String| LinkDiagnostic {
                library: lib.clone(),
                class: decl.name.clone(),
                member: member.to_string(),
                line: span.line,
                col: span.col,
                message,
            };
            if let Some(s) = &decl.superclass {
                if self.class_id(s).is_none() {
                    out.push(diag("<class>", decl.span, format!("unknown superclass `{s}`")));
                }
            }
            let check_type = |t: &TypeTag, member: &str, span: Span, out: &mut Vec<LinkDiagnostic>| {
                if let TypeTag::Class(c) = t {
                    if self.class_id(c).is_none() {
                        out.push(diag(member, span, format!("unknown class `{c}`")));
                    }
                }
            };
            for f in &decl.fields {
                check_type(&f.ty, &f.name, f.span, &mut out);
            }
            let bodies = decl
                .constructors
                .iter()
                .map(|c| ("new".to_string(), &c.params, &c.body, c.span))
                .chain(
                    decl.methods
                        .iter()
                        .map(|m| (m.name.clone(), &m.params, &m.body, m.span)),
                );
            for (member, params, body, span) in bodies {
                for p in params.iter() {
                    check_type(&p.ty, &member, span, &mut out);
                }
                walk_typed(self, Some(id), params, body, &mut |e, env| {
                    if let Some(msg) = self.check_expr(id, env, e) {
                        out.push(diag(&member, e.span, msg));
                    }
                });
            }
        }
        out.sort();
        out
    }

    fn check_expr(&self, this: ClassId, env: &super::typing::TypeEnv, e: &Expr) -> Option<String> {
        match &e.kind {
            ExprKind::New { class, args } => match self.class_id(class) {
                None => Some(format!("unknown class `{class}`")),
                Some(c) => {
                    let ok = self.decl_of(c).constructors.iter().any(|k| k.params.len() == args.len());
                    (!ok).then(|| format!("no constructor `{class}/{}`", args.len()))
                }
            },
            ExprKind::Call {
                receiver,
                method,
                args,
            } => match static_class(self, Some(this), env, receiver) {
                Some(c) => self
                    .dispatch_candidates(c, method, args.len())
                    .is_empty()
                    .then(|| format!("no method `{}.{method}/{}`", self.class_name(c), args.len())),
                None => {
                    let any = self
                        .class_ids()
                        .any(|c| !self.dispatch_candidates(c, method, args.len()).is_empty());
                    (!any).then(|| format!("no method `{method}/{}` on any loaded class", args.len()))
                }
            },
            ExprKind::Field { object, field } => {
                let c = static_class(self, Some(this), env, object)?;
                self.field_type(c, field)
                    .is_none()
                    .then(|| format!("no field `{}.{field}`", self.class_name(c)))
            }
            ExprKind::Global { library, name } => self
                .global(library, name)
                .is_none()
                .then(|| format!("unknown constant `{library}::{name}`")),
            _ => None,
        }
    }
}

fn assemble_from(
    ws: &Workspace,
    mut classpath: Classpath,
    overrides: &Overrides,
) -> Result<ResolvedProgram, ResolveError> {
    for (lib, ver) in &overrides.libraries {
        if ws.package(lib, ver).is_none() {
            return Err(ResolveError::MissingArchive {
                name: lib.clone(),
                version: ver.clone(),
            });
        }
        let Some(prev) = classpath.loaded.insert(lib.clone(), ver.clone()) else {
            return Err(ResolveError::UnknownOverride(lib.clone()));
        };
        let sh = classpath.shadowed.entry(lib.clone()).or_default();
        sh.remove(ver);
        if prev != *ver {
            sh.insert(prev);
        }
        if sh.is_empty() {
            classpath.shadowed.remove(lib);
        }
    }
    let classes_of = |lib: &str| {
        let ver = &classpath.loaded[lib];
        ws.package(lib, ver)
            .map(|p| p.unit.classes.iter().map(|c| c.name.clone()).collect())
            .unwrap_or_default()
    };
    let (class_index, shadowed_classes) =
        index_classes(&classpath.order, &classpath.loaded, classes_of, &overrides.classes);
    classpath.class_index = class_index;
    classpath.shadowed_classes = shadowed_classes;
    let units = classpath
        .order
        .iter()
        .map(|lib| {
            let ver = &classpath.loaded[lib];
            let pkg = ws.package(lib, ver).expect("loaded package present");
            LoadedUnit {
                library: lib.clone(),
                version: ver.clone(),
                unit: Arc::new(pkg.unit.clone()),
            }
        })
        .collect();
    let program = ResolvedProgram::assemble(ws.project.manifest.name.clone(), units, classpath)?;
    let diags = program.check();
    if diags.is_empty() {
        Ok(program)
    } else {
        Err(ResolveError::Link(diags))
    }
}

pub fn link(ws: &Workspace, classpath: &Classpath) -> Result<ResolvedProgram, ResolveError> {
    assemble_from(ws, classpath.clone(), &Overrides::default())
}

/// Links with the given libraries pinned to specific versions.
pub fn force_load(
    ws: &Workspace,
    overrides: &BTreeMap<String, String>,
) -> Result<ResolvedProgram, ResolveError> {
    force_load_with(
        ws,
        &Overrides {
            libraries: overrides.clone(),
            classes: BTreeMap::new(),
        },
    )
}

pub fn force_load_with(ws: &Workspace, overrides: &Overrides) -> Result<ResolvedProgram, ResolveError> {
    let cp = mediate(&build_tree(ws)?);
    assemble_from(ws, cp, overrides)
}

/// `link(ws, mediate(build_tree(ws)))`.
pub fn resolve(ws: &Workspace) -> Result<ResolvedProgram, ResolveError> {
    let cp = mediate(&build_tree(ws)?);
    link(ws, &cp)
}
