//! Executable statements of the metatheorems over single programs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gen::{lower_vec, GenConfig, Levels};
use super::gen_cbpv::value_for;
use super::{Counterexample, Theorem, TheoremReport};
use crate::attrs::{Attr, AttrVec, Fresh, Mode, VarId};
use crate::cbn::{cbn_wf_type, CbnCtx, CbnJudgment, CbnTerm};
use crate::cbpv::{cbpv_synth_comp, Comp, CompType, ElabComp, ElabValue, ValType, Value};
use crate::eval::{
    drop_binding, eq_mod_gamma, semantic_fails, Env, Missing, Outcome, TerminalComp,
};
use crate::parse::{CbpvDecl, CbpvProgram};
use crate::program::{
    build_env, build_env_from, check_cbpv_program, translate_program, CheckedCbn, CheckedCbpv,
};
use crate::translate::translate_type;

/// Programs with at most this many attribute-choice nodes are also run
/// through the exhaustive validator.
pub const VALIDATOR_MAX_CHOICES: usize = 3;
/// Assignment budget of the validator; above it assignments are sampled.
pub const VALIDATOR_BUDGET: u64 = 1024;
/// Rounds of argument application and forcing when observing a result.
const OBSERVE_ROUNDS: usize = 4;

fn cx(
    c: &CheckedCbpv,
    env: &Env,
    expected: impl Into<String>,
    actual: impl Into<String>,
) -> Counterexample {
    Counterexample {
        program: c.program.to_string(),
        env: env.to_string(),
        expected: expected.into(),
        actual: actual.into(),
    }
}

fn outcome_str(o: &Outcome<TerminalComp>) -> String {
    match o {
        Outcome::Success(t, g) => match g {
            Some(g) => format!("success {t} with effect {g}"),
            None => format!("success {t}"),
        },
        Outcome::FailMissing(x) => format!("missing binding: {x}"),
        Outcome::FailStuck(m) => format!("stuck: {m}"),
    }
}

fn full_env(c: &CheckedCbpv) -> Result<Env, Counterexample> {
    let built = build_env(c, &mut c.instrumented(), &BTreeSet::new());
    if built.cascaded.is_empty() {
        Ok(built.env)
    } else {
        let names: Vec<String> = built.cascaded.iter().map(|x| x.to_string()).collect();
        Err(cx(
            c,
            &built.env,
            "every declaration evaluates",
            format!("failed: {}", names.join(", ")),
        ))
    }
}

/// Runs `main` with instrumentation and compares the derivation's vector
/// with the checker's.
fn run_agreeing(
    c: &CheckedCbpv,
    env: &Env,
    m: &ElabComp,
    effect: &AttrVec,
) -> Result<TerminalComp, Counterexample> {
    let out = c.instrumented().eval_comp(env, m);
    match &out {
        Outcome::Success(t, Some(g)) if g == effect => Ok(t.clone()),
        _ => Err(cx(
            c,
            env,
            format!("success with effect {effect}"),
            outcome_str(&out),
        )),
    }
}

/// Soundness with effect agreement, including function-type soundness:
/// arrow results are applied to generated arguments and returned thunks are
/// forced, each step checked again.
pub fn check_soundness(c: &CheckedCbpv) -> TheoremReport {
    check_soundness_seeded(c, 0)
}

pub fn check_soundness_seeded(c: &CheckedCbpv, seed: u64) -> TheoremReport {
    let mut report = TheoremReport::new(Theorem::Soundness);
    let r = soundness(c, seed, &mut report.cases);
    report.record(r);
    report
}

fn soundness(c: &CheckedCbpv, seed: u64, cases: &mut u64) -> Result<(), Counterexample> {
    let env = full_env(c)?;
    let mut ev = c.instrumented();
    let mut prefix = Env::new();
    for (d, j) in c.program.decls.iter().zip(&c.decls) {
        *cases += 1;
        match ev.eval_value(&prefix, &j.elab) {
            Outcome::Success(_, Some(g)) if g == j.effect => {}
            other => {
                let actual = match other {
                    Outcome::Success(w, g) => format!("success {w} with effect {g:?}"),
                    Outcome::FailMissing(x) => format!("missing binding: {x}"),
                    Outcome::FailStuck(m) => format!("stuck: {m}"),
                };
                return Err(cx(
                    c,
                    &prefix,
                    format!("{} evaluates with effect {}", d.x, j.effect),
                    actual,
                ));
            }
        }
        prefix = push_from(prefix, &env, &d.x);
    }
    *cases += 1;
    run_agreeing(c, &env, &c.main.elab, &c.main.effect)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig {
        max_depth: 3,
        ..GenConfig::new(seed, c.mode())
    };
    let mut term = c.program.main.clone();
    let mut ty = c.main.ty.clone();
    let mut fresh = Fresh::above(c.max_id());
    for _ in 0..OBSERVE_ROUNDS {
        let next = match &ty {
            CompType::Arrow(a, _, _) => {
                let Ok(v) = value_for(&mut rng, &cfg, &c.ctx, fresh.clone(), a) else {
                    break;
                };
                fresh = Fresh::above(fresh.peek().max(v.max_var_id()));
                Comp::App(Box::new(term.clone()), Box::new(v))
            }
            CompType::F(a) if matches!(**a, ValType::U(..)) => {
                let z = fresh.fresh("z");
                Comp::Let {
                    x: z.clone(),
                    bound: Box::new(term.clone()),
                    body: Box::new(Comp::force(Value::Var(z))),
                }
            }
            CompType::F(_) => break,
        };
        let j = cbpv_synth_comp(&c.ctx, &next, c.mode())
            .map_err(|e| cx(c, &env, format!("observation {next} checks"), e.to_string()))?;
        *cases += 1;
        run_agreeing(c, &env, &j.elab, &j.effect)?;
        term = next;
        ty = j.ty;
    }
    Ok(())
}

fn push_from(mut prefix: Env, full: &Env, x: &VarId) -> Env {
    prefix.push(x.clone(), full.get(x).cloned());
    prefix
}

fn lazy_attr(a: Attr) -> bool {
    matches!(a, Attr::Lazy | Attr::Unused)
}

/// Lazy soundness: removing the binding of a variable with attribute `L`
/// (or `U`) keeps evaluation successful with an equivalent result. Checked
/// for `main` and for every declaration as a value judgment.
pub fn check_lazy_soundness(c: &CheckedCbpv) -> TheoremReport {
    let mut report = TheoremReport::new(Theorem::LazySoundness);
    let r = lazy_soundness(c, &mut report.cases);
    report.record(r);
    report
}

fn lazy_soundness(c: &CheckedCbpv, cases: &mut u64) -> Result<(), Counterexample> {
    let env = full_env(c)?;
    let mut prefix = Env::new();
    for (d, j) in c.program.decls.iter().zip(&c.decls) {
        for x in j
            .effect
            .scope()
            .iter()
            .filter(|x| lazy_attr(j.effect.get(x)))
        {
            *cases += 1;
            let dropped = drop_binding(&prefix, x).expect("declared variables are bound");
            if !c.erased().eval_value(&dropped, &j.elab).is_success() {
                return Err(cx(
                    c,
                    &dropped,
                    format!("{} evaluates without {x}", d.x),
                    "failure",
                ));
            }
        }
        prefix = push_from(prefix, &env, &d.x);
    }
    let full = c.instrumented().eval_comp(&env, &c.main.elab);
    let Outcome::Success(base, _) = &full else {
        return Err(cx(c, &env, "main evaluates", outcome_str(&full)));
    };
    for x in c
        .main
        .effect
        .scope()
        .iter()
        .filter(|x| lazy_attr(c.main.effect.get(x)))
    {
        *cases += 1;
        let dropped = drop_binding(&env, x).expect("declared variables are bound");
        let out = c.instrumented().eval_comp(&dropped, &c.main.elab);
        match &out {
            Outcome::Success(t, _) if eq_mod_gamma(t, base, Missing::Wildcard) => {}
            _ => {
                return Err(cx(
                    c,
                    &dropped,
                    format!("a result equivalent to {base}"),
                    outcome_str(&out),
                ))
            }
        }
    }
    Ok(())
}

/// Strict failure at returner types: evaluation fails once the binding of
/// a variable with attribute `S` is removed and the declarations after it
/// are re-evaluated without it. Declarations are checked as value
/// judgments. Small programs are also run through the exhaustive validator.
pub fn check_strict_failure(c: &CheckedCbpv) -> TheoremReport {
    check_strict_failure_seeded(c, 0)
}

pub fn check_strict_failure_seeded(c: &CheckedCbpv, seed: u64) -> TheoremReport {
    let mut report = TheoremReport::new(Theorem::StrictFailure);
    if !matches!(c.main.ty, CompType::F(_)) {
        report.trials = 0;
        return report;
    }
    let mut logs = Vec::new();
    let r = strict_failure(c, seed, &mut report.cases, &mut logs);
    report.record(r);
    report.logs.extend(logs);
    report
}

fn strict_failure(
    c: &CheckedCbpv,
    seed: u64,
    cases: &mut u64,
    logs: &mut Vec<String>,
) -> Result<(), Counterexample> {
    full_env(c)?;
    let (mode, max_id, fuel) = (c.mode(), c.max_id(), c.fuel());
    let small = choice_count(c) <= VALIDATOR_MAX_CHOICES;
    for d in &c.program.decls {
        let x = &d.x;
        let missing = BTreeSet::from([x.clone()]);
        let cascade = build_env(c, &mut c.erased(), &missing).env;
        for (i, (e, j)) in c.program.decls.iter().zip(&c.decls).enumerate() {
            if j.effect.scope().contains(x) && j.effect.get(x) == Attr::Strict {
                *cases += 1;
                let prefix = cascade.prefix(i);
                if c.erased().eval_value(&prefix, &j.elab).is_success() {
                    return Err(cx(
                        c,
                        &prefix,
                        format!("{} fails without {x}", e.x),
                        "success",
                    ));
                }
            }
        }
        if c.main.effect.get(x) != Attr::Strict {
            continue;
        }
        *cases += 1;
        if !semantic_fails(&cascade, &c.main.elab, mode, max_id, fuel) {
            return Err(cx(c, &cascade, format!("failure without {x}"), "success"));
        }
        if small {
            let v = validate_failure(c, &missing, seed);
            if let Some(cex) = v.success {
                return Err(cex);
            }
            if v.sites.len() > 1 {
                let sites: Vec<String> = v.sites.iter().map(|s| s.to_string()).collect();
                logs.push(format!(
                    "failure site diverges without {x}: {}",
                    sites.join(", ")
                ));
            }
        }
    }
    Ok(())
}

/// An attribute-choice node: a thunk annotation, a subsumption target or a
/// closure's vector and argument attribute.
#[derive(Clone, Debug)]
enum Choice {
    Thunk(AttrVec),
    Sub(AttrVec),
    Lam(AttrVec, Attr),
}

impl Choice {
    fn options(&self, mode: Mode) -> u64 {
        let n = mode.attrs().len() as u64;
        let (g, extra) = match self {
            Choice::Thunk(g) | Choice::Sub(g) => (g, 0),
            Choice::Lam(g, _) => (g, 1),
        };
        n.saturating_pow(g.scope().len() as u32 + extra)
    }

    /// The `k`-th assignment of this node, `k < options`.
    fn nth(&self, mode: Mode, mut k: u64) -> Choice {
        let attrs = mode.attrs();
        let n = attrs.len() as u64;
        let mut digit = || {
            let a = attrs[(k % n) as usize];
            k /= n;
            a
        };
        let vector = |g: &AttrVec, digit: &mut dyn FnMut() -> Attr| {
            let mut out = AttrVec::default_over(mode, g.scope().clone());
            for x in g.scope() {
                out.set(x, digit());
            }
            out
        };
        match self {
            Choice::Thunk(g) => Choice::Thunk(vector(g, &mut digit)),
            Choice::Sub(g) => Choice::Sub(vector(g, &mut digit)),
            Choice::Lam(g, _) => {
                let v = vector(g, &mut digit);
                Choice::Lam(v, digit())
            }
        }
    }
}

/// Rewrites every choice node in preorder through `f`.
struct Rewriter<'f> {
    f: &'f mut dyn FnMut(Choice) -> Choice,
}

impl Rewriter<'_> {
    fn value(&mut self, v: &ElabValue) -> ElabValue {
        match v {
            ElabValue::Unit | ElabValue::Var(_) => v.clone(),
            ElabValue::Thunk { gamma, body } => {
                let Choice::Thunk(gamma) = (self.f)(Choice::Thunk(gamma.clone())) else {
                    unreachable!()
                };
                ElabValue::Thunk {
                    gamma,
                    body: Arc::new(self.comp(body)),
                }
            }
            ElabValue::Inl(w, t) => ElabValue::Inl(Box::new(self.value(w)), t.clone()),
            ElabValue::Inr(w, t) => ElabValue::Inr(Box::new(self.value(w)), t.clone()),
            ElabValue::Pair(a, b) => {
                ElabValue::Pair(Box::new(self.value(a)), Box::new(self.value(b)))
            }
        }
    }

    fn comp(&mut self, m: &ElabComp) -> ElabComp {
        match m {
            ElabComp::Lam {
                x,
                arg,
                gamma,
                attr,
                body,
            } => {
                let Choice::Lam(gamma, attr) = (self.f)(Choice::Lam(gamma.clone(), *attr)) else {
                    unreachable!()
                };
                ElabComp::Lam {
                    x: x.clone(),
                    arg: arg.clone(),
                    gamma,
                    attr,
                    body: Arc::new(self.comp(body)),
                }
            }
            ElabComp::App(f, v) => ElabComp::App(Box::new(self.comp(f)), Box::new(self.value(v))),
            ElabComp::Force(v) => ElabComp::Force(Box::new(self.value(v))),
            ElabComp::Ret(v) => ElabComp::Ret(Box::new(self.value(v))),
            ElabComp::Let { x, bound, body } => ElabComp::Let {
                x: x.clone(),
                bound: Box::new(self.comp(bound)),
                body: Box::new(self.comp(body)),
            },
            ElabComp::Split {
                x1,
                x2,
                scrut,
                body,
            } => ElabComp::Split {
                x1: x1.clone(),
                x2: x2.clone(),
                scrut: Box::new(self.value(scrut)),
                body: Box::new(self.comp(body)),
            },
            ElabComp::Sub {
                target,
                inferred,
                body,
            } => {
                let Choice::Sub(target) = (self.f)(Choice::Sub(target.clone())) else {
                    unreachable!()
                };
                ElabComp::Sub {
                    target,
                    inferred: inferred.clone(),
                    body: Box::new(self.comp(body)),
                }
            }
            ElabComp::Seq(v, body) => {
                ElabComp::Seq(Box::new(self.value(v)), Box::new(self.comp(body)))
            }
            ElabComp::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => ElabComp::Case {
                scrut: Box::new(self.value(scrut)),
                x1: x1.clone(),
                left: Box::new(self.comp(left)),
                x2: x2.clone(),
                right: Box::new(self.comp(right)),
            },
        }
    }
}

fn choices(c: &CheckedCbpv) -> Vec<Choice> {
    let mut out = Vec::new();
    let mut f = |ch: Choice| {
        out.push(ch.clone());
        ch
    };
    let mut r = Rewriter { f: &mut f };
    for j in &c.decls {
        r.value(&j.elab);
    }
    r.comp(&c.main.elab);
    out
}

/// Number of attribute-choice nodes in the declarations and `main`.
pub fn choice_count(c: &CheckedCbpv) -> usize {
    choices(c).len()
}

/// The result of running every (or, above the budget, a sample of)
/// attribute assignment with some bindings missing.
#[derive(Debug, Default)]
pub struct Validation {
    pub assignments: u64,
    /// A successful derivation, which refutes semantic failure.
    pub success: Option<Counterexample>,
    /// Distinct variables at which evaluation failed.
    pub sites: BTreeSet<String>,
}

/// Brute-force validation of semantic failure: under every assignment of
/// the choice nodes no instrumented derivation succeeds.
pub fn validate_failure(c: &CheckedCbpv, missing: &BTreeSet<VarId>, seed: u64) -> Validation {
    let mode = c.mode();
    let nodes = choices(c);
    let radices: Vec<u64> = nodes.iter().map(|n| n.options(mode)).collect();
    let total = radices.iter().try_fold(1u64, |acc, r| acc.checked_mul(*r));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Vec<u64>> = match total {
        Some(t) if t <= VALIDATOR_BUDGET => (0..t)
            .map(|mut k| {
                radices
                    .iter()
                    .map(|r| {
                        let d = k % r;
                        k /= r;
                        d
                    })
                    .collect()
            })
            .collect(),
        _ => (0..VALIDATOR_BUDGET)
            .map(|_| radices.iter().map(|r| rng.gen_range(0..*r)).collect())
            .collect(),
    };
    let mut v = Validation::default();
    for pick in picks {
        v.assignments += 1;
        let mut it = nodes.iter().zip(pick).map(|(n, k)| n.nth(mode, k));
        let mut f = |_: Choice| it.next().expect("one assignment per node");
        let mut r = Rewriter { f: &mut f };
        let decls: Vec<(VarId, ElabValue)> = c
            .program
            .decls
            .iter()
            .zip(&c.decls)
            .map(|(d, j)| (d.x.clone(), r.value(&j.elab)))
            .collect();
        let main = r.comp(&c.main.elab);
        let mut ev = c.instrumented();
        let Ok(built) = build_env_from(decls.iter().map(|(x, v)| (x, v)), &mut ev, missing) else {
            continue;
        };
        match ev.eval_comp(&built.env, &main) {
            Outcome::Success(t, _) => {
                v.success = Some(cx(
                    c,
                    &built.env,
                    "no derivation succeeds",
                    format!("derivation of {main} gives {t}"),
                ));
                return v;
            }
            Outcome::FailMissing(x) => {
                v.sites.insert(x.to_string());
            }
            Outcome::FailStuck(_) => {}
        }
    }
    v
}

/// Determinism modulo vectors: re-elaborations with lowered subsumption
/// targets, run in their own and in the original environment, give
/// equivalent results.
pub fn check_determinism(c: &CheckedCbpv, variants: usize) -> TheoremReport {
    check_determinism_seeded(c, variants, 0)
}

pub fn check_determinism_seeded(c: &CheckedCbpv, variants: usize, seed: u64) -> TheoremReport {
    let mut report = TheoremReport::new(Theorem::Determinism);
    let r = determinism(c, variants, seed, &mut report.cases);
    report.record(r);
    report
}

fn lower_subs(rng: &mut ChaCha8Rng, m: &Comp) -> Comp {
    let mut out = m.clone();
    lower_subs_mut(rng, &mut out);
    out
}

fn lower_subs_mut(rng: &mut ChaCha8Rng, m: &mut Comp) {
    match m {
        Comp::Sub { target, body } => {
            *target = lower_vec(rng, target, &Levels::default());
            lower_subs_mut(rng, body);
        }
        Comp::Lam { body, .. } => lower_subs_mut(rng, body),
        Comp::App(f, v) => {
            lower_subs_mut(rng, f);
            lower_subs_value(rng, v);
        }
        Comp::Force(v) | Comp::Ret(v) => lower_subs_value(rng, v),
        Comp::Let { bound, body, .. } => {
            lower_subs_mut(rng, bound);
            lower_subs_mut(rng, body);
        }
        Comp::Split { scrut, body, .. } | Comp::Seq(scrut, body) => {
            lower_subs_value(rng, scrut);
            lower_subs_mut(rng, body);
        }
        Comp::Case {
            scrut, left, right, ..
        } => {
            lower_subs_value(rng, scrut);
            lower_subs_mut(rng, left);
            lower_subs_mut(rng, right);
        }
    }
}

fn lower_subs_value(rng: &mut ChaCha8Rng, v: &mut Value) {
    match v {
        Value::Unit | Value::Var(_) => {}
        Value::Thunk(m) => lower_subs_mut(rng, m),
        Value::Inl(w, _) | Value::Inr(w, _) => lower_subs_value(rng, w),
        Value::Pair(a, b) => {
            lower_subs_value(rng, a);
            lower_subs_value(rng, b);
        }
    }
}

fn determinism(
    c: &CheckedCbpv,
    variants: usize,
    seed: u64,
    cases: &mut u64,
) -> Result<(), Counterexample> {
    let env = full_env(c)?;
    let base = run_agreeing(c, &env, &c.main.elab, &c.main.effect)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = 0;
    for _ in 0..variants * 4 {
        if found == variants {
            break;
        }
        let p = CbpvProgram {
            mode: c.program.mode,
            decls: c
                .program
                .decls
                .iter()
                .map(|d| CbpvDecl {
                    x: d.x.clone(),
                    ty: d.ty.clone(),
                    value: lower_value(&mut rng, &d.value),
                })
                .collect(),
            main: lower_subs(&mut rng, &c.program.main),
            lambdas: BTreeMap::new(),
        };
        if p.decls == c.program.decls && p.main == c.program.main {
            continue;
        }
        let Ok(v) = check_cbpv_program(&p) else {
            continue;
        };
        found += 1;
        *cases += 1;
        let venv = full_env(&v)?;
        for (e, m, label) in [
            (&venv, &v.main.elab, "variant"),
            (&venv, &c.main.elab, "original in variant env"),
        ] {
            let out = v.instrumented().eval_comp(e, m);
            match &out {
                Outcome::Success(t, _) if eq_mod_gamma(t, &base, Missing::Exact) => {}
                _ => {
                    return Err(cx(
                        &v,
                        e,
                        format!("{label}: a result equivalent to {base}"),
                        outcome_str(&out),
                    ))
                }
            }
        }
    }
    Ok(())
}

fn lower_value(rng: &mut ChaCha8Rng, v: &Value) -> Value {
    let mut out = v.clone();
    lower_subs_value(rng, &mut out);
    out
}

/// Translation correctness: the translated program checks, the effect of
/// `main` is the source effect plus the residual of its type (exactly the
/// source effect at returner types), and a returner evaluates to `ret W`.
pub fn check_translation(c: &CheckedCbn) -> TheoremReport {
    let mut report = TheoremReport::new(Theorem::Translation);
    report.cases = 1;
    report.record(translation(c));
    report
}

fn translation(c: &CheckedCbn) -> Result<(), Counterexample> {
    let fail = |expected: String, actual: String| Counterexample {
        program: c.program.to_string(),
        env: String::new(),
        expected,
        actual,
    };
    let p = translate_program(c).map_err(|e| fail("translation succeeds".into(), e.to_string()))?;
    let t = check_cbpv_program(&p)
        .map_err(|e| fail(format!("translation checks:\n{p}"), e.to_string()))?;
    let tr = translate_type(&c.main.ty, c.program.mode, &c.ctx.scope());
    let want = c
        .main
        .effect
        .plus(&tr.residual)
        .expect("vectors over the context scope");
    if t.main.effect != want {
        return Err(fail(
            format!("effect {want}"),
            format!("effect {}", t.main.effect),
        ));
    }
    if !crate::cbpv::comp_type_equal(&t.main.ty, &tr.target) {
        return Err(fail(
            format!("type {}", tr.target),
            format!("type {}", t.main.ty),
        ));
    }
    if matches!(tr.target, CompType::F(_)) && t.main.effect != c.main.effect {
        return Err(fail(
            format!("effect {} at a returner type", c.main.effect),
            format!("effect {}", t.main.effect),
        ));
    }
    let env = full_env(&t)?;
    let out = t.instrumented().eval_comp(&env, &t.main.elab);
    match (&out, &tr.target) {
        (Outcome::Success(TerminalComp::Ret(_), _), CompType::F(_)) => Ok(()),
        (Outcome::Success(TerminalComp::Lam(_), _), CompType::Arrow(..)) => Ok(()),
        _ => Err(cx(
            &t,
            &env,
            "a terminal of the translated type",
            outcome_str(&out),
        )),
    }
}

/// Variables a term names directly or through annotations, closed under the
/// types and latent effects of the context entries it reaches.
pub fn mentioned(ctx: &CbnCtx, e: &CbnTerm) -> BTreeSet<VarId> {
    let mut out = BTreeSet::new();
    e.for_each_subterm(&mut |t| match t {
        CbnTerm::Var(x) => {
            out.insert(x.clone());
        }
        CbnTerm::Inl(_, ty) | CbnTerm::Inr(_, ty) => out.extend(ty.mentions()),
        CbnTerm::Lam {
            arg, arg_latent, ..
        } => {
            out.extend(arg.mentions());
            out.extend(arg_latent.support().cloned());
        }
        CbnTerm::Sub { target, .. } => out.extend(target.support().cloned()),
        _ => {}
    });
    let mut work: Vec<VarId> = out.iter().cloned().collect();
    while let Some(y) = work.pop() {
        let Some(en) = ctx.lookup(&y) else { continue };
        for z in en
            .ty
            .mentions()
            .into_iter()
            .chain(en.latent.support().cloned())
        {
            if out.insert(z.clone()) {
                work.push(z);
            }
        }
    }
    out
}

/// Validity of extended-mode judgments: every synthesized judgment is
/// well-formed, and context variables that are never mentioned get `U`.
pub fn ext_validity(c: &CheckedCbn) -> Result<(), Counterexample> {
    if c.program.mode != Mode::Extended {
        return Ok(());
    }
    let fail = |expected: String, actual: String| Counterexample {
        program: c.program.to_string(),
        env: String::new(),
        expected,
        actual,
    };
    let mut prefix = CbnCtx::new();
    let judged = c
        .program
        .decls
        .iter()
        .map(|d| (&d.term, &d.x))
        .zip(&c.decls);
    for ((term, x), j) in judged {
        validity_of(&prefix, term, j, &x.to_string(), &fail)?;
        let en = c.ctx.lookup(x).expect("declared");
        prefix.push(en.x.clone(), en.ty.clone(), en.latent.clone());
    }
    validity_of(&c.ctx, &c.program.main, &c.main, "main", &fail)
}

fn validity_of(
    ctx: &CbnCtx,
    e: &CbnTerm,
    j: &CbnJudgment,
    what: &str,
    fail: &dyn Fn(String, String) -> Counterexample,
) -> Result<(), Counterexample> {
    if !cbn_wf_type(&j.effect, &j.ty, Mode::Extended) {
        return Err(fail(
            format!("{what}: {} well-formed for {}", j.effect, j.ty),
            "ill-formed".into(),
        ));
    }
    let seen = mentioned(ctx, e);
    for en in ctx.entries() {
        if !seen.contains(&en.x) && j.effect.get(&en.x) != Attr::Unused {
            return Err(fail(
                format!("{what}: unmentioned {} is U", en.x),
                format!("effect {}", j.effect),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, Lang, Program};
    use crate::program::{check_cbn_program, check_cbpv_program};

    fn cbpv(src: &str) -> CheckedCbpv {
        match parse_program(src, Some(Lang::Cbpv), Mode::Base).unwrap() {
            Program::Cbpv(p) => check_cbpv_program(&p).unwrap(),
            Program::Cbn(_) => unreachable!(),
        }
    }

    fn cbn(src: &str, mode: Mode) -> CheckedCbn {
        match parse_program(src, Some(Lang::Cbn), mode).unwrap() {
            Program::Cbn(p) => check_cbn_program(&p).unwrap(),
            Program::Cbpv(_) => unreachable!(),
        }
    }

    const FORCE: &str =
        "var y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nmain = force t";

    #[test]
    fn theorems_hold_on_a_forced_thunk() {
        let c = cbpv(FORCE);
        for r in [
            check_soundness(&c),
            check_lazy_soundness(&c),
            check_strict_failure(&c),
            check_determinism(&c, 3),
        ] {
            assert!(r.passed(), "{r}");
        }
        assert!(check_strict_failure(&c).cases > 0);
    }

    #[test]
    fn one_choice_per_thunk() {
        assert_eq!(choice_count(&cbpv(FORCE)), 1);
        assert_eq!(choice_count(&cbpv("main = ret ()")), 0);
    }

    #[test]
    fn missing_strict_binding_has_no_successful_derivation() {
        let c = cbpv(FORCE);
        let y: BTreeSet<VarId> = c
            .program
            .decls
            .iter()
            .filter(|d| d.x.name() == "y")
            .map(|d| d.x.clone())
            .collect();
        let v = validate_failure(&c, &y, 0);
        assert!(v.assignments > 0);
        assert!(v.success.is_none());
        assert!(v.sites.contains("y"), "{:?}", v.sites);
    }

    #[test]
    fn missing_unused_binding_has_a_successful_derivation() {
        let c = cbpv("var y : unit = ()\nmain = ret ()");
        let y: BTreeSet<VarId> = c.program.decls.iter().map(|d| d.x.clone()).collect();
        assert!(validate_failure(&c, &y, 0).success.is_some());
    }

    #[test]
    fn mentioned_follows_context_latents() {
        let c = cbn(
            "var y : Bool = true\nvar x : Bool^{y:S} = y\nvar z : unit = ()\nmain = x",
            Mode::Base,
        );
        let m = mentioned(&c.ctx, &c.program.main);
        let names: BTreeSet<&str> = m.iter().map(|x| x.name()).collect();
        let names: Vec<&str> = names.into_iter().collect();
        assert_eq!(names, ["x", "y"]);
    }

    #[test]
    fn translation_and_validity_hold() {
        let c = cbn(
            "var y : Bool = true\nvar z : unit = ()\nmain = if y then true else false",
            Mode::Extended,
        );
        assert!(check_translation(&c).passed());
        ext_validity(&c).unwrap();
        assert_eq!(c.main.effect.get(&c.program.decls[1].x), Attr::Unused);
    }
}
