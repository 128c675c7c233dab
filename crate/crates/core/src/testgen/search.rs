//! The genetic search over statement sequences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{find_callable, CallGraph, Configs, PairRecord};
use crate::lang::ast::{TypeTag, Visibility};
use crate::lang::{Status, Value};
use crate::miner::{instantiable_ctors, ArgBinding, InstancePool, InvocationContext};
use crate::resolver::{ApiRef, Callable, ResolvedProgram};

use super::case::{EntryCall, Origin, Statement, TestCase};
use super::fitness::{FitnessScore, FitnessTarget};
use super::random::{random_char, random_value};
use super::{seeding_probability, GAConfig};

/// Object nesting beyond this depth is filled with `null`.
const MAX_BUILD_DEPTH: usize = 4;
const REUSE_PROBABILITY: f64 = 0.2;
const TOURNAMENT: usize = 3;
const ELITES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub seed: u64,
    pub generations: usize,
    pub evaluations: usize,
    pub covered: bool,
    pub best_fitness: f64,
    /// Pool seedings performed (sum of T_s increments).
    pub seeded: u64,
    /// Covering individuals discarded because they fail in the original
    /// configuration.
    pub filtered_failing: usize,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub target: ApiRef,
    pub tests: Vec<TestCase>,
    pub repetitions: Vec<RepetitionReport>,
    pub diagnostics: Vec<String>,
}

/// Runs RN independent searches for one pair in its original configuration.
pub fn generate(
    configs: &Configs,
    record: &PairRecord,
    pool: &InstancePool,
    config: &GAConfig,
    seed: u64,
) -> GenerationReport {
    let program = &configs.original;
    let target_api = &record.pair.shadowed;
    let Some(target) = find_callable(program, target_api) else {
        return GenerationReport {
            target: target_api.clone(),
            tests: Vec::new(),
            repetitions: Vec::new(),
            diagnostics: vec![format!("{target_api} is not loaded in the original configuration")],
        };
    };
    let paths: Vec<Vec<Callable>> = record
        .original_paths
        .iter()
        .filter_map(|p| p.chain.iter().map(|r| find_callable(program, r)).collect())
        .collect();
    generate_for(program, &configs.ep_graph, target, &paths, pool, config, seed)
}

/// Same as [`generate`] for an explicit program, target and path set.
pub fn generate_for(
    program: &ResolvedProgram,
    graph: &CallGraph,
    target: Callable,
    paths: &[Vec<Callable>],
    pool: &InstancePool,
    config: &GAConfig,
    seed: u64,
) -> GenerationReport {
    let target_api = program.callable_ref(target);
    let fitness = FitnessTarget::new(program, graph, target, paths);
    let mut report = GenerationReport {
        target: target_api.clone(),
        tests: Vec::new(),
        repetitions: Vec::new(),
        diagnostics: Vec::new(),
    };
    if let Err(e) = config.validate() {
        report.diagnostics.push(e.to_string());
        return report;
    }
    let entries: Vec<ApiRef> = fitness
        .entries()
        .into_iter()
        .filter(|e| program.find_api(e).is_some())
        .collect();
    if entries.is_empty() {
        report.diagnostics.push(format!("{target_api}: no dependency path to search along"));
        return report;
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.repetitions {
        let rep_seed: u64 = seeds.gen();
        let mut search = Search {
            program,
            fitness: &fitness,
            entries: &entries,
            pool: pool.clone(),
            config,
            rng: ChaCha8Rng::seed_from_u64(rep_seed),
            seed: rep_seed,
            seeded: 0,
        };
        let (test, rep) = search.run();
        if rep.budget_exhausted && test.is_none() {
            report
                .diagnostics
                .push(format!("repetition seeded {rep_seed} exhausted its budget without a covering test"));
        }
        report.tests.extend(test);
        report.repetitions.push(rep);
    }
    report
}

#[derive(Clone)]
struct Individual {
    test: TestCase,
    score: FitnessScore,
    passes: bool,
}

struct Search<'a> {
    program: &'a ResolvedProgram,
    fitness: &'a FitnessTarget,
    entries: &'a [ApiRef],
    pool: InstancePool,
    config: &'a GAConfig,
    rng: ChaCha8Rng,
    seed: u64,
    seeded: u64,
}

impl Search<'_> {
    fn run(&mut self) -> (Option<TestCase>, RepetitionReport) {
        let started = budget_clock();
        let mut evaluations = 0;
        let mut filtered = 0;
        let mut pop: Vec<Individual> = (0..self.config.population_size)
            .map(|_| {
                let t = self.random_test();
                self.evaluate(t)
            })
            .collect();
        evaluations += pop.len();
        let mut generations = 0;
        let mut budget_exhausted = false;
        loop {
            filtered += pop.iter().filter(|i| i.score.covered && !i.passes).count();
            if let Some(found) = pop.iter().find(|i| i.passes) {
                let rep = self.report(generations, evaluations, true, 0.0, filtered, false);
                return (Some(found.test.clone()), rep);
            }
            if generations >= self.config.max_generations {
                break;
            }
            if over_budget(started, self.config.budget_ms) {
                budget_exhausted = true;
                break;
            }
            generations += 1;
            pop = self.next_generation(pop);
            evaluations += self.config.population_size - ELITES.min(self.config.population_size);
        }
        let best = pop.iter().map(|i| i.score.total()).fold(f64::INFINITY, f64::min);
        let rep = self.report(generations, evaluations, false, best, filtered, budget_exhausted);
        (None, rep)
    }

    fn report(
        &self,
        generations: usize,
        evaluations: usize,
        covered: bool,
        best_fitness: f64,
        filtered_failing: usize,
        budget_exhausted: bool,
    ) -> RepetitionReport {
        debug_assert_eq!(self.seeded, self.pool.total_seeded());
        RepetitionReport {
            seed: self.seed,
            generations,
            evaluations,
            covered,
            best_fitness,
            seeded: self.seeded,
            filtered_failing,
            budget_exhausted,
        }
    }

    fn evaluate(&self, test: TestCase) -> Individual {
        let run = test.execute(self.program, self.config.step_limit, true);
        let score = self.fitness.score(&test.entry.api, &run);
        let passes = score.covered && run.outcome.status == Status::Returned;
        Individual { test, score, passes }
    }

    fn next_generation(&mut self, mut pop: Vec<Individual>) -> Vec<Individual> {
        pop.sort_by(|a, b| a.score.total().total_cmp(&b.score.total()));
        let n = self.config.population_size;
        let mut next: Vec<Individual> = pop.iter().take(ELITES.min(n)).cloned().collect();
        while next.len() < n {
            let p1 = self.tournament(&pop);
            let p2 = self.tournament(&pop);
            let mut child = if self.rng.gen_bool(self.config.crossover_rate)
                && pop[p1].test.entry.api == pop[p2].test.entry.api
            {
                self.crossover(&pop[p1].test, &pop[p2].test)
            } else {
                pop[p1].test.clone()
            };
            if self.rng.gen_bool(self.config.mutation_rate) {
                self.mutate(&mut child);
                while self.rng.gen_bool(1.0 / 3.0) {
                    self.mutate(&mut child);
                }
            }
            next.push(self.evaluate(child));
        }
        next
    }

    /// Index of the fittest of a few sampled individuals; `pop` is sorted.
    fn tournament(&mut self, pop: &[Individual]) -> usize {
        (0..TOURNAMENT).map(|_| self.rng.gen_range(0..pop.len())).min().unwrap_or(0)
    }

    fn random_test(&mut self) -> TestCase {
        let api = self.entries.choose(&mut self.rng).expect("entries nonempty").clone();
        let mut stmts = Vec::new();
        let receiver = self.instance(&mut stmts, &api.class, 0);
        let args = api
            .signature
            .params
            .clone()
            .iter()
            .map(|ty| self.value(&mut stmts, ty, 0))
            .collect();
        TestCase {
            statements: stmts,
            entry: EntryCall { api, receiver, args },
            rng_seed: self.seed,
        }
    }

    fn compatible(&self, have: &TypeTag, want: &TypeTag) -> bool {
        match (have, want) {
            (TypeTag::Class(h), TypeTag::Class(w)) => {
                match (self.program.class_id(h), self.program.class_id(w)) {
                    (Some(h), Some(w)) => self.program.is_subclass(h, w),
                    _ => false,
                }
            }
            _ => have == want,
        }
    }

    /// Latest earlier variable whose type fits `ty`.
    fn reusable(&self, stmts: &[Statement], ty: &TypeTag) -> Option<usize> {
        stmts.iter().rposition(|s| self.compatible(&s.ty(), ty))
    }

    /// Defines (or reuses) a variable of type `ty`.
    fn value(&mut self, stmts: &mut Vec<Statement>, ty: &TypeTag, depth: usize) -> usize {
        if let Some(v) = self.reusable(stmts, ty) {
            if self.rng.gen_bool(REUSE_PROBABILITY) {
                return v;
            }
        }
        match ty {
            TypeTag::Class(c) => self.instance(stmts, c, depth),
            TypeTag::Void => push(stmts, Statement::Literal { value: Value::Null }),
            prim => {
                let value = random_value(prim, &mut self.rng);
                push(stmts, Statement::Literal { value })
            }
        }
    }

    /// A new instance of `class`: seeded from the pool with probability
    /// P_OC, otherwise built randomly.
    fn instance(&mut self, stmts: &mut Vec<Statement>, class: &str, depth: usize) -> usize {
        if let Some(v) = self.seed_from_pool(stmts, class, depth) {
            return v;
        }
        self.random_instance(stmts, class, depth)
    }

    /// Pool candidate of `class`: minimal Depth_arg, then lowest T_s, then
    /// declaration order.
    fn candidate(&self, class: &str) -> Option<usize> {
        let entries = self.pool.contexts(class);
        (0..entries.len()).min_by_key(|i| (entries[*i].context.depth, entries[*i].t_s, *i))
    }

    fn seed_from_pool(&mut self, stmts: &mut Vec<Statement>, class: &str, depth: usize) -> Option<usize> {
        if !self.config.seeding_enabled || depth > MAX_BUILD_DEPTH {
            return None;
        }
        let i = self.candidate(class)?;
        let e = &self.pool.contexts(class)[i];
        let p = seeding_probability(e.context.depth, e.t_s).expect("context depth is at least 1");
        if !self.rng.gen_bool(p) {
            return None;
        }
        let context = e.context.clone();
        self.pool.entries.get_mut(class).expect("class has entries")[i].t_s += 1;
        self.seeded += 1;
        Some(self.flatten_context(stmts, &context, depth))
    }

    fn flatten_context(&mut self, stmts: &mut Vec<Statement>, ctx: &InvocationContext, depth: usize) -> usize {
        let args = ctx
            .bindings
            .iter()
            .zip(ctx.constructor.signature.params.iter())
            .map(|(b, ty)| self.flatten_binding(stmts, b, ty, depth + 1))
            .collect();
        push(
            stmts,
            Statement::Construct {
                class: ctx.class.clone(),
                args,
                origin: Origin::Pool,
            },
        )
    }

    fn flatten_binding(&mut self, stmts: &mut Vec<Statement>, b: &ArgBinding, ty: &TypeTag, depth: usize) -> usize {
        match b {
            ArgBinding::Literal { value: Value::Null } => match ty {
                TypeTag::Class(c) => push(stmts, Statement::Null { class: c.clone() }),
                _ => push(stmts, Statement::Literal { value: Value::Null }),
            },
            ArgBinding::Literal { value } => push(stmts, Statement::Literal { value: value.clone() }),
            ArgBinding::Random { ty } => self.value(stmts, ty, depth),
            ArgBinding::CallerParam { binding, .. } => self.flatten_binding(stmts, binding, ty, depth),
            ArgBinding::Construct { context } => self.flatten_context(stmts, context, depth),
            ArgBinding::CallResult {
                method,
                receiver,
                args,
            } => {
                let r = self.flatten_binding(stmts, receiver, &TypeTag::Class(method.class.clone()), depth);
                let a = args
                    .iter()
                    .zip(method.signature.params.iter())
                    .map(|(x, t)| self.flatten_binding(stmts, x, t, depth))
                    .collect();
                push(
                    stmts,
                    Statement::Call {
                        receiver: r,
                        method: method.signature.name.clone(),
                        args: a,
                        ret: method.signature.ret.clone(),
                    },
                )
            }
        }
    }

    fn random_instance(&mut self, stmts: &mut Vec<Statement>, class: &str, depth: usize) -> usize {
        let null = |stmts: &mut Vec<Statement>| push(stmts, Statement::Null { class: class.to_string() });
        let Some(id) = self.program.class_id(class) else {
            return null(stmts);
        };
        if depth > MAX_BUILD_DEPTH {
            return null(stmts);
        }
        let mut choices: Vec<_> = std::iter::once(id)
            .chain(self.program.subclasses(id))
            .flat_map(|c| instantiable_ctors(self.program, c))
            .collect();
        choices.dedup();
        let Some(&ctor) = choices.choose(&mut self.rng) else {
            return null(stmts);
        };
        let params: Vec<TypeTag> = self.program.ctor_decl(ctor).param_types().cloned().collect();
        let args = params.iter().map(|t| self.value(stmts, t, depth + 1)).collect();
        push(
            stmts,
            Statement::Construct {
                class: self.program.class_name(ctor.class).to_string(),
                args,
                origin: Origin::Random,
            },
        )
    }

    fn crossover(&mut self, p1: &TestCase, p2: &TestCase) -> TestCase {
        let a = self.rng.gen_range(0..=p1.statements.len());
        let b = self.rng.gen_range(0..=p2.statements.len());
        let mut stmts: Vec<Statement> = p1.statements[..a].to_vec();
        let mut map: Vec<Option<usize>> = vec![None; p2.statements.len()];
        for j in b..p2.statements.len() {
            let mut s = p2.statements[j].clone();
            for u in s.uses_mut() {
                *u = self.repair(&mut stmts, &map, p2, *u);
            }
            map[j] = Some(push(&mut stmts, s));
        }
        let receiver = self.repair(&mut stmts, &map, p2, p2.entry.receiver);
        let args = p2
            .entry
            .args
            .iter()
            .map(|u| self.repair(&mut stmts, &map, p2, *u))
            .collect();
        let mut t = TestCase {
            statements: stmts,
            entry: EntryCall {
                api: p2.entry.api.clone(),
                receiver,
                args,
            },
            rng_seed: self.seed,
        };
        collect_garbage(&mut t);
        t
    }

    /// Def-use repair: a reference into the dropped part of `p2` is bound to
    /// a fitting earlier variable or a fresh value.
    fn repair(&mut self, stmts: &mut Vec<Statement>, map: &[Option<usize>], p2: &TestCase, u: usize) -> usize {
        if let Some(m) = map[u] {
            return m;
        }
        let ty = p2.statements[u].ty();
        match self.reusable(stmts, &ty) {
            Some(v) => v,
            None => self.value(stmts, &ty, 1),
        }
    }

    fn mutate(&mut self, t: &mut TestCase) {
        match self.rng.gen_range(0..10) {
            0..=3 => self.mutate_literal(t),
            4 | 5 => self.replace_source(t),
            6 => self.insert_call(t),
            7 => self.delete_call(t),
            _ => self.rebind_entry(t),
        }
        collect_garbage(t);
    }

    fn mutate_literal(&mut self, t: &mut TestCase) {
        let lits: Vec<usize> = (0..t.statements.len())
            .filter(|i| matches!(t.statements[*i], Statement::Literal { .. }))
            .collect();
        let Some(&i) = lits.choose(&mut self.rng) else {
            return self.rebind_entry(t);
        };
        let Statement::Literal { value } = &mut t.statements[i] else {
            unreachable!()
        };
        let rng = &mut self.rng;
        *value = match value.clone() {
            Value::Int(x) if rng.gen_bool(0.7) => {
                let scale = [1, 10, 100][rng.gen_range(0..3)];
                let delta = rng.gen_range(1..=10) * scale * if rng.gen_bool(0.5) { 1 } else { -1 };
                Value::Int(x.wrapping_add(delta))
            }
            Value::Int(_) => random_value(&TypeTag::Int, rng),
            Value::Str(s) if rng.gen_bool(0.6) => Value::Str(edit_string(&s, rng)),
            Value::Str(_) => random_value(&TypeTag::Str, rng),
            Value::Bool(b) => Value::Bool(!b),
            Value::Bag(_) => random_value(&TypeTag::Bag, rng),
            v => v,
        };
    }

    /// Rebuilds one instance from the other source (pool or random).
    fn replace_source(&mut self, t: &mut TestCase) {
        let objs: Vec<usize> = (0..t.statements.len())
            .filter(|i| matches!(t.statements[*i], Statement::Construct { .. } | Statement::Null { .. }))
            .collect();
        let Some(&i) = objs.choose(&mut self.rng) else {
            return self.rebind_entry(t);
        };
        let (class, was_pool) = match &t.statements[i] {
            Statement::Construct { class, origin, .. } => (class.clone(), *origin == Origin::Pool),
            Statement::Null { class } => (class.clone(), false),
            _ => unreachable!(),
        };
        let mut prefix = t.statements[..i].to_vec();
        let fresh = if was_pool {
            None
        } else {
            self.seed_from_pool(&mut prefix, &class, 0)
        };
        let nv = match fresh {
            Some(v) => v,
            None => self.random_instance(&mut prefix, &class, 0),
        };
        let added = prefix.len() - i;
        let remap = |u: usize| {
            if u < i {
                u
            } else if u == i {
                nv
            } else {
                u + added
            }
        };
        let old = t.statements[i].clone();
        prefix.push(old);
        for s in &t.statements[i + 1..] {
            let mut s = s.clone();
            for u in s.uses_mut() {
                *u = remap(*u);
            }
            prefix.push(s);
        }
        t.statements = prefix;
        t.entry.receiver = remap(t.entry.receiver);
        for a in &mut t.entry.args {
            *a = remap(*a);
        }
    }

    fn insert_call(&mut self, t: &mut TestCase) {
        let objs: Vec<(usize, String)> = t
            .statements
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Statement::Construct { class, .. } => Some((i, class.clone())),
                _ => None,
            })
            .collect();
        let Some((recv, class)) = objs.choose(&mut self.rng).cloned() else {
            return self.rebind_entry(t);
        };
        let methods = self.public_methods(&class);
        let Some((name, params, ret)) = methods.choose(&mut self.rng).cloned() else {
            return;
        };
        let args = params.iter().map(|p| self.value(&mut t.statements, p, 1)).collect();
        t.statements.push(Statement::Call {
            receiver: recv,
            method: name,
            args,
            ret,
        });
    }

    fn public_methods(&self, class: &str) -> Vec<(String, Vec<TypeTag>, TypeTag)> {
        let mut out = Vec::new();
        let mut cur = self.program.class_id(class);
        while let Some(id) = cur {
            for h in self.program.methods(id) {
                let m = self.program.method_decl(h);
                if m.visibility == Visibility::Public {
                    out.push((m.name.clone(), m.param_types().cloned().collect(), m.ret.clone()));
                }
            }
            cur = self.program.superclass(id);
        }
        out
    }

    fn delete_call(&mut self, t: &mut TestCase) {
        let used = used_vars(t);
        let calls: Vec<usize> = (0..t.statements.len())
            .filter(|i| matches!(t.statements[*i], Statement::Call { .. }) && !used[*i])
            .collect();
        if let Some(&i) = calls.choose(&mut self.rng) {
            let keep: Vec<bool> = (0..t.statements.len()).map(|j| j != i).collect();
            compact(t, &keep);
        }
    }

    fn rebind_entry(&mut self, t: &mut TestCase) {
        let n = t.entry.args.len();
        let k = self.rng.gen_range(0..=n);
        if k == n {
            let class = t.entry.api.class.clone();
            t.entry.receiver = self.instance(&mut t.statements, &class, 0);
        } else {
            let ty = t.entry.api.signature.params[k].clone();
            t.entry.args[k] = self.value(&mut t.statements, &ty, 0);
        }
    }
}

fn push(stmts: &mut Vec<Statement>, s: Statement) -> usize {
    stmts.push(s);
    stmts.len() - 1
}

fn edit_string<R: Rng + ?Sized>(s: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    match rng.gen_range(0..3) {
        0 if !chars.is_empty() => {
            let i = rng.gen_range(0..chars.len());
            chars.remove(i);
        }
        1 if !chars.is_empty() => {
            let i = rng.gen_range(0..chars.len());
            chars[i] = random_char(rng);
        }
        _ => {
            let i = rng.gen_range(0..=chars.len());
            chars.insert(i, random_char(rng));
        }
    }
    chars.into_iter().collect()
}

fn used_vars(t: &TestCase) -> Vec<bool> {
    let mut used = vec![false; t.statements.len()];
    for s in &t.statements {
        for u in s.uses() {
            used[u] = true;
        }
    }
    used[t.entry.receiver] = true;
    for a in &t.entry.args {
        used[*a] = true;
    }
    used
}

/// Drops value statements nothing depends on; calls are kept for their
/// side effects.
fn collect_garbage(t: &mut TestCase) {
    let n = t.statements.len();
    let mut live = vec![false; n];
    live[t.entry.receiver] = true;
    for a in &t.entry.args {
        live[*a] = true;
    }
    for i in (0..n).rev() {
        if matches!(t.statements[i], Statement::Call { .. }) {
            live[i] = true;
        }
        if live[i] {
            for u in t.statements[i].uses() {
                live[u] = true;
            }
        }
    }
    compact(t, &live);
}

fn compact(t: &mut TestCase, keep: &[bool]) {
    let mut index = vec![usize::MAX; keep.len()];
    let mut out = Vec::new();
    for (i, s) in t.statements.iter().enumerate() {
        if keep[i] {
            index[i] = out.len();
            let mut s = s.clone();
            for u in s.uses_mut() {
                *u = index[*u];
            }
            out.push(s);
        }
    }
    t.statements = out;
    t.entry.receiver = index[t.entry.receiver];
    for a in &mut t.entry.args {
        *a = index[*a];
    }
}

#[cfg(not(target_arch = "wasm32"))]
type Clock = Option<std::time::Instant>;
#[cfg(target_arch = "wasm32")]
type Clock = Option<()>;

#[cfg(not(target_arch = "wasm32"))]
fn budget_clock() -> Clock {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn budget_clock() -> Clock {
    None
}

#[cfg(not(target_arch = "wasm32"))]
fn over_budget(started: Clock, budget_ms: Option<u64>) -> bool {
    match (started, budget_ms) {
        (Some(t), Some(ms)) => t.elapsed().as_millis() as u64 >= ms,
        _ => false,
    }
}

#[cfg(target_arch = "wasm32")]
fn over_budget(_: Clock, _: Option<u64>) -> bool {
    false
}
