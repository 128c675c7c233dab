//! Constructor invocation contexts mined from project code and the class
//! instance pool built from them.
//!
//! Arguments are recovered in three ways: literals reached through the
//! latest dominating assignment (case 1), parameters of the calling method
//! traced to its own call sites (case 2) and results of other calls whose
//! receiver and arguments are mined recursively (case 3). Anything else
//! becomes a random fallback of the parameter's type.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lang::ast::*;
use crate::lang::interp::{literal_value, Halt};
use crate::lang::{Bag, Machine, RuntimeError, Value};
use crate::resolver::typing::{infer, static_class, TypeEnv};
use crate::resolver::{ApiRef, Callable, ClassId, CtorHandle, ResolvedProgram};
use crate::testgen::random_value;

pub const DEFAULT_DN: usize = 5;
/// Case-2 recursion follows at most this many calling methods.
pub const MAX_CALLER_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum ArgBinding {
    /// Case 1: a value written in the source.
    Literal { value: Value },
    /// Case 2: a parameter of `caller`, resolved at one of its call sites.
    CallerParam {
        caller: ApiRef,
        param: String,
        binding: Box<ArgBinding>,
    },
    /// Case 3: the result of calling `method`.
    CallResult {
        method: ApiRef,
        receiver: Box<ArgBinding>,
        args: Vec<ArgBinding>,
    },
    /// An argument that is itself a constructed instance.
    Construct { context: Box<InvocationContext> },
    Random { ty: TypeTag },
}

impl ArgBinding {
    pub fn depth(&self) -> usize {
        match self {
            ArgBinding::Literal { .. } | ArgBinding::Random { .. } => 0,
            ArgBinding::CallerParam { binding, .. } => 1 + binding.depth(),
            ArgBinding::CallResult { receiver, args, .. } => {
                1 + args.iter().map(ArgBinding::depth).chain([receiver.depth()]).max().unwrap_or(0)
            }
            ArgBinding::Construct { context } => context.depth,
        }
    }

    pub fn case_tag(&self) -> &'static str {
        match self {
            ArgBinding::Literal { .. } => "literal",
            ArgBinding::CallerParam { .. } => "caller-param",
            ArgBinding::CallResult { .. } => "call-result",
            ArgBinding::Construct { .. } => "construct",
            ArgBinding::Random { .. } => "random",
        }
    }

    pub fn from_source(&self) -> bool {
        !matches!(self, ArgBinding::Random { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub caller: ApiRef,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvocationContext {
    pub class: String,
    pub constructor: ApiRef,
    pub bindings: Vec<ArgBinding>,
    /// Depth_arg: 1 plus the deepest recursive binding.
    pub depth: usize,
    pub provenance: Vec<Provenance>,
}

/// Structural equality; provenance is bookkeeping and does not count.
impl PartialEq for InvocationContext {
    fn eq(&self, other: &Self) -> bool {
        self.class == other.class && self.constructor == other.constructor && self.bindings == other.bindings
    }
}

impl InvocationContext {
    fn new(class: &str, constructor: ApiRef, bindings: Vec<ArgBinding>, provenance: Vec<Provenance>) -> Self {
        let depth = 1 + bindings.iter().map(ArgBinding::depth).max().unwrap_or(0);
        InvocationContext {
            class: class.to_string(),
            constructor,
            bindings,
            depth,
            provenance,
        }
    }

    /// Argu_s / Argu_t, or `None` for a constructor without parameters.
    pub fn argu_ratio(&self) -> Option<f64> {
        if self.bindings.is_empty() {
            return None;
        }
        let found = self.bindings.iter().filter(|b| b.from_source()).count();
        Some(found as f64 / self.bindings.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructorSet {
    pub class: String,
    pub constructors: Vec<ApiRef>,
}

pub(crate) fn instantiable_ctors(program: &ResolvedProgram, id: ClassId) -> Vec<CtorHandle> {
    if program.class_decl(id).visibility == Visibility::Internal {
        return Vec::new();
    }
    program
        .ctors(id)
        .filter(|h| program.ctor_decl(*h).visibility == Visibility::Public)
        .collect()
}

/// Constructors a test may call; empty for internal classes.
pub fn collect_constructors(class: &str, program: &ResolvedProgram) -> ConstructorSet {
    let constructors = program
        .class_id(class)
        .map(|id| instantiable_ctors(program, id).into_iter().map(|h| program.ctor_ref(h)).collect())
        .unwrap_or_default();
    ConstructorSet {
        class: class.to_string(),
        constructors,
    }
}

/// Assignment in effect at a program point; `None` marks a binding whose
/// value is not an expression (fold variables).
type Assigns<'p> = Vec<(String, Option<&'p Expr>)>;

struct Site<'p> {
    caller: Callable,
    expr: &'p Expr,
    assigns: Assigns<'p>,
    types: TypeEnv,
    targets: Vec<Callable>,
}

/// Every call and construction site in project code with the dominating
/// assignments and static types in effect there.
pub struct SiteIndex<'p> {
    program: &'p ResolvedProgram,
    sites: Vec<Site<'p>>,
    entries: Vec<Callable>,
}

impl<'p> SiteIndex<'p> {
    pub fn new(program: &'p ResolvedProgram) -> Self {
        let mut idx = SiteIndex {
            program,
            sites: Vec::new(),
            entries: program.entry_methods().into_iter().map(Callable::Method).collect(),
        };
        for class in program.class_ids().filter(|c| program.is_project_class(*c)) {
            let callables: Vec<Callable> = program
                .methods(class)
                .map(Callable::Method)
                .chain(program.ctors(class).map(Callable::Ctor))
                .collect();
            for c in callables {
                let (params, body) = program.callable_body(c);
                let mut types: TypeEnv = params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
                let mut assigns = Vec::new();
                idx.block(c, body, &mut assigns, &mut types);
            }
        }
        idx
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn block(&mut self, c: Callable, body: &'p [Stmt], assigns: &mut Assigns<'p>, types: &mut TypeEnv) {
        let mark = assigns.len();
        let saved = types.clone();
        for s in body {
            match &s.kind {
                StmtKind::Let { name, init } => {
                    self.expr(c, init, assigns, types);
                    match infer(self.program, Some(c.class()), types, init) {
                        Some(t) => types.insert(name.clone(), t),
                        None => types.remove(name),
                    };
                    assigns.push((name.clone(), Some(init)));
                }
                StmtKind::Assign { target, value } => {
                    if let LValue::Field { object, .. } = target {
                        self.expr(c, object, assigns, types);
                    }
                    self.expr(c, value, assigns, types);
                    if let LValue::Var(v) = target {
                        assigns.push((v.clone(), Some(value)));
                    }
                }
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => {
                    self.expr(c, cond, assigns, types);
                    self.block(c, then_block, assigns, types);
                    if let Some(b) = else_block {
                        self.block(c, b, assigns, types);
                    }
                }
                StmtKind::While { cond, body, .. } => {
                    self.expr(c, cond, assigns, types);
                    self.block(c, body, assigns, types);
                }
                StmtKind::Return(Some(e)) | StmtKind::Expr(e) | StmtKind::Require(e) => {
                    self.expr(c, e, assigns, types)
                }
                StmtKind::Return(None) => {}
            }
        }
        assigns.truncate(mark);
        *types = saved;
    }

    fn expr(&mut self, c: Callable, e: &'p Expr, assigns: &mut Assigns<'p>, types: &TypeEnv) {
        let p = self.program;
        match &e.kind {
            ExprKind::Call {
                receiver,
                method,
                args,
            } => {
                self.expr(c, receiver, assigns, types);
                args.iter().for_each(|a| self.expr(c, a, assigns, types));
                let classes = match static_class(p, Some(c.class()), types, receiver) {
                    Some(st) => p.subclasses(st),
                    None => p.class_ids().collect(),
                };
                let mut targets: Vec<Callable> = classes
                    .into_iter()
                    .flat_map(|k| p.dispatch_candidates(k, method, args.len()).iter().map(|h| Callable::Method(*h)))
                    .collect();
                targets.sort();
                targets.dedup();
                self.push(c, e, assigns, types, targets);
            }
            ExprKind::New { class, args } => {
                args.iter().for_each(|a| self.expr(c, a, assigns, types));
                let targets = p
                    .class_id(class)
                    .map(|id| {
                        p.ctors(id)
                            .filter(|h| {
                                let k = p.ctor_decl(*h);
                                k.params.len() == args.len()
                                    && k.param_types().zip(args).all(|(t, a)| {
                                        infer(p, Some(c.class()), types, a).is_none_or(|at| compatible(p, t, &at))
                                    })
                            })
                            .map(Callable::Ctor)
                            .collect()
                    })
                    .unwrap_or_default();
                self.push(c, e, assigns, types, targets);
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(c, lhs, assigns, types);
                self.expr(c, rhs, assigns, types);
            }
            ExprKind::Unary { operand, .. } => self.expr(c, operand, assigns, types),
            ExprKind::Field { object, .. } => self.expr(c, object, assigns, types),
            ExprKind::BagLit(items) => items.iter().for_each(|a| self.expr(c, a, assigns, types)),
            ExprKind::BagInsert { bag, item } => {
                self.expr(c, bag, assigns, types);
                self.expr(c, item, assigns, types);
            }
            ExprKind::Fold {
                bag,
                init,
                acc,
                item,
                body,
            } => {
                self.expr(c, bag, assigns, types);
                self.expr(c, init, assigns, types);
                let mark = assigns.len();
                assigns.push((acc.clone(), None));
                assigns.push((item.clone(), None));
                let mut inner = types.clone();
                inner.remove(acc);
                inner.remove(item);
                self.expr(c, body, assigns, &inner);
                assigns.truncate(mark);
            }
            _ => {}
        }
    }

    fn push(&mut self, c: Callable, e: &'p Expr, assigns: &Assigns<'p>, types: &TypeEnv, targets: Vec<Callable>) {
        self.sites.push(Site {
            caller: c,
            expr: e,
            assigns: assigns.clone(),
            types: types.clone(),
            targets,
        });
    }
}

fn compatible(p: &ResolvedProgram, want: &TypeTag, have: &TypeTag) -> bool {
    match (want, have) {
        (TypeTag::Class(w), TypeTag::Class(h)) => match (p.class_id(h), p.class_id(w)) {
            (Some(h), Some(w)) => p.is_subclass(h, w),
            _ => false,
        },
        (w, h) => w == h,
    }
}

fn site_args(e: &Expr) -> &[Expr] {
    match &e.kind {
        ExprKind::Call { args, .. } | ExprKind::New { args, .. } => args,
        _ => &[],
    }
}

struct Miner<'a, 'p> {
    index: &'a SiteIndex<'p>,
    dn: usize,
}

impl<'a, 'p> Miner<'a, 'p> {
    fn program(&self) -> &'p ResolvedProgram {
        self.index.program
    }

    fn provenance(&self, site: &Site<'_>) -> Provenance {
        Provenance {
            caller: self.program().callable_ref(site.caller),
            line: site.expr.span.line,
            col: site.expr.span.col,
        }
    }

    /// Context for one construction site of `ctor` at recursion `level`.
    fn context_at(&self, ctor: CtorHandle, site: &Site<'p>, level: usize) -> InvocationContext {
        let p = self.program();
        let decl = p.ctor_decl(ctor);
        let bindings = site_args(site.expr)
            .iter()
            .zip(&decl.params)
            .map(|(a, param)| self.resolve(a, &param.ty, site, &site.assigns, level, 0))
            .collect();
        InvocationContext::new(p.class_name(ctor.class), p.ctor_ref(ctor), bindings, vec![self.provenance(site)])
    }

    fn resolve(
        &self,
        e: &'p Expr,
        ty: &TypeTag,
        site: &Site<'p>,
        assigns: &[(String, Option<&'p Expr>)],
        level: usize,
        hops: usize,
    ) -> ArgBinding {
        let p = self.program();
        let random = || ArgBinding::Random { ty: ty.clone() };
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Null => {
                ArgBinding::Literal { value: literal_value(e) }
            }
            ExprKind::Global { library, name } => match p.global(library, name) {
                Some(g) => ArgBinding::Literal {
                    value: literal_value(&g.value),
                },
                None => random(),
            },
            ExprKind::BagLit(items) if items.iter().all(|i| i.is_literal()) => ArgBinding::Literal {
                value: Value::Bag(Bag {
                    items: items.iter().map(literal_value).collect(),
                }),
            },
            ExprKind::Var(v) => match assigns.iter().rposition(|(n, _)| n == v) {
                Some(i) => match assigns[i].1 {
                    Some(init) => self.resolve(init, ty, site, &assigns[..i], level, hops),
                    None => random(),
                },
                None => {
                    let (params, _) = p.callable_body(site.caller);
                    match params.iter().position(|q| &q.name == v) {
                        Some(j) => self.caller_param(site.caller, j, ty, level, hops).unwrap_or_else(random),
                        None => random(),
                    }
                }
            },
            ExprKind::New { class, args } => {
                if level + 1 > self.dn {
                    return random();
                }
                let Some(id) = p.class_id(class) else { return random() };
                let ctor = instantiable_ctors(p, id).into_iter().find(|h| {
                    let k = p.ctor_decl(*h);
                    k.params.len() == args.len()
                        && k.param_types()
                            .zip(args)
                            .all(|(t, a)| infer(p, Some(site.caller.class()), &site.types, a).is_none_or(|at| compatible(p, t, &at)))
                });
                let Some(ctor) = ctor else { return random() };
                let bindings = args
                    .iter()
                    .zip(&p.ctor_decl(ctor).params)
                    .map(|(a, q)| self.resolve(a, &q.ty, site, assigns, level + 1, hops))
                    .collect();
                ArgBinding::Construct {
                    context: Box::new(InvocationContext::new(
                        class,
                        p.ctor_ref(ctor),
                        bindings,
                        vec![Provenance {
                            caller: p.callable_ref(site.caller),
                            line: e.span.line,
                            col: e.span.col,
                        }],
                    )),
                }
            }
            ExprKind::Call {
                receiver,
                method,
                args,
            } => {
                if level + 1 > self.dn {
                    return random();
                }
                let Some(st) = static_class(p, Some(site.caller.class()), &site.types, receiver) else {
                    return random();
                };
                let Some(h) = p.dispatch_candidates(st, method, args.len()).first().copied() else {
                    return random();
                };
                let m = p.method_decl(h);
                let recv_ty = TypeTag::Class(p.class_name(st).to_string());
                ArgBinding::CallResult {
                    method: p.api_ref(h),
                    receiver: Box::new(self.resolve(receiver, &recv_ty, site, assigns, level + 1, hops)),
                    args: args
                        .iter()
                        .zip(&m.params)
                        .map(|(a, q)| self.resolve(a, &q.ty, site, assigns, level + 1, hops))
                        .collect(),
                }
            }
            _ => random(),
        }
    }

    /// Case 2: trace parameter `j` of `caller` to the first call site that
    /// yields a source-derived binding.
    fn caller_param(&self, caller: Callable, j: usize, ty: &TypeTag, level: usize, hops: usize) -> Option<ArgBinding> {
        if hops >= MAX_CALLER_LEVELS || level + 1 > self.dn || self.index.entries.contains(&caller) {
            return None;
        }
        let p = self.program();
        let (params, _) = p.callable_body(caller);
        for site in self.index.sites.iter().filter(|s| s.targets.contains(&caller)) {
            let Some(arg) = site_args(site.expr).get(j) else { continue };
            let b = self.resolve(arg, ty, site, &site.assigns, level + 1, hops + 1);
            if b.from_source() {
                return Some(ArgBinding::CallerParam {
                    caller: p.callable_ref(caller),
                    param: params[j].name.clone(),
                    binding: Box::new(b),
                });
            }
        }
        None
    }
}

/// One context per project construction site of `ctor`, plus the trivial
/// context of a parameterless constructor.
pub fn mine_contexts(ctor: CtorHandle, index: &SiteIndex<'_>, dn: usize) -> Vec<InvocationContext> {
    let miner = Miner { index, dn: dn.max(1) };
    let p = index.program;
    let mut out = Vec::new();
    if p.ctor_decl(ctor).params.is_empty() {
        out.push(InvocationContext::new(p.class_name(ctor.class), p.ctor_ref(ctor), Vec::new(), Vec::new()));
    }
    for site in index.sites.iter().filter(|s| s.targets.contains(&Callable::Ctor(ctor))) {
        out.push(miner.context_at(ctor, site, 1));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub context: InvocationContext,
    /// Times this entry has been seeded into a test.
    pub t_s: u64,
}

/// CIP: per-class invocation contexts with seeding counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstancePool {
    pub entries: BTreeMap<String, Vec<PoolEntry>>,
    pub total_classes: usize,
    /// Contexts found before deduplication.
    pub mined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolCoverage {
    pub n_c: usize,
    pub n_t: usize,
    pub n_i: f64,
    /// Mean Argu_s / Argu_t over parameterized contexts.
    pub argu_ratio: Option<f64>,
}

impl InstancePool {
    pub fn contexts(&self, class: &str) -> &[PoolEntry] {
        self.entries.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn coverage(&self) -> PoolCoverage {
        let covered: Vec<_> = self.entries.values().filter(|v| !v.is_empty()).collect();
        let n_c = covered.len();
        let n_i = if n_c == 0 {
            0.0
        } else {
            covered.iter().map(|v| v.len()).sum::<usize>() as f64 / n_c as f64
        };
        let ratios: Vec<f64> = self
            .entries
            .values()
            .flatten()
            .filter_map(|e| e.context.argu_ratio())
            .collect();
        PoolCoverage {
            n_c,
            n_t: self.total_classes,
            n_i,
            argu_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        }
    }

    pub fn total_seeded(&self) -> u64 {
        self.entries.values().flatten().map(|e| e.t_s).sum()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            coverage: PoolCoverage,
            mined: usize,
            classes: &'a BTreeMap<String, Vec<PoolEntry>>,
        }
        serde_json::to_string_pretty(&Dump {
            coverage: self.coverage(),
            mined: self.mined,
            classes: &self.entries,
        })
        .expect("pool serializes")
    }
}

/// Mines contexts for every instantiable project class.
pub fn build_pool(program: &ResolvedProgram, dn: usize) -> InstancePool {
    let index = SiteIndex::new(program);
    let mut pool = InstancePool::default();
    for id in program.class_ids().filter(|c| program.is_project_class(*c)) {
        pool.total_classes += 1;
        let mut list: Vec<PoolEntry> = Vec::new();
        for ctor in instantiable_ctors(program, id) {
            for ctx in mine_contexts(ctor, &index, dn) {
                pool.mined += 1;
                match list.iter_mut().find(|e| e.context == ctx) {
                    Some(e) => e.context.provenance.extend(ctx.provenance),
                    None => list.push(PoolEntry { context: ctx, t_s: 0 }),
                }
            }
        }
        pool.entries.insert(program.class_name(id).to_string(), list);
    }
    pool
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("constructing {class} failed: {reason}")]
pub struct ConstructionFailure {
    pub class: String,
    pub reason: String,
    pub error: Option<RuntimeError>,
}

fn failure(class: &str, h: Halt) -> ConstructionFailure {
    ConstructionFailure {
        class: class.to_string(),
        reason: h.to_string(),
        error: match h {
            Halt::Error(e) => Some(e),
            Halt::StepLimit => None,
        },
    }
}

/// Realizes a context in `machine`; random fallbacks draw from `rng`.
pub fn instantiate<R: Rng + ?Sized>(
    context: &InvocationContext,
    machine: &mut Machine<'_>,
    rng: &mut R,
) -> Result<Value, ConstructionFailure> {
    let args = context
        .bindings
        .iter()
        .map(|b| binding_value(b, machine, rng))
        .collect::<Result<Vec<_>, _>>()?;
    machine
        .construct(&context.class, args)
        .map_err(|h| failure(&context.class, h))
}

fn binding_value<R: Rng + ?Sized>(
    b: &ArgBinding,
    machine: &mut Machine<'_>,
    rng: &mut R,
) -> Result<Value, ConstructionFailure> {
    match b {
        ArgBinding::Literal { value } => Ok(value.clone()),
        ArgBinding::Random { ty } => Ok(random_value(ty, rng)),
        ArgBinding::CallerParam { binding, .. } => binding_value(binding, machine, rng),
        ArgBinding::Construct { context } => instantiate(context, machine, rng),
        ArgBinding::CallResult {
            method,
            receiver,
            args,
        } => {
            let r = binding_value(receiver, machine, rng)?;
            let a = args
                .iter()
                .map(|x| binding_value(x, machine, rng))
                .collect::<Result<Vec<_>, _>>()?;
            machine
                .call(r, &method.signature.name, a)
                .map_err(|h| failure(&method.class, h))
        }
    }
}
