//! Big-step evaluation of elaborated CBPV terms.
//!
//! One evaluator serves both purposes: with tracking on it computes the
//! attribute vector of every derivation and checks the stored annotations;
//! with tracking off it skips all vector work and only decides success or
//! failure. Every binder activation gets a fresh runtime key so that the
//! vectors captured by closures never confuse two activations of the same
//! syntactic binder.

use std::sync::Arc;

use thiserror::Error;

use crate::attrs::{Attr, AttrVec, Fresh, Mode, Scope, VarId};
use crate::cbpv::{comp_shape_eq, ElabComp, ElabValue};

#[derive(Clone, Debug)]
pub enum TerminalValue {
    Unit,
    Pair(Box<TerminalValue>, Box<TerminalValue>),
    Inl(Box<TerminalValue>),
    Inr(Box<TerminalValue>),
    Thunk(Arc<ThunkClosure>),
}

/// `{γ, ρ, M}`; `gamma` is over the keys of `env`.
#[derive(Clone, Debug)]
pub struct ThunkClosure {
    pub gamma: AttrVec,
    pub env: Env,
    pub body: Arc<ElabComp>,
}

/// `⟪γ, ρ, λx.M⟫`.
#[derive(Clone, Debug)]
pub struct LamClosure {
    pub gamma: AttrVec,
    pub env: Env,
    pub x: VarId,
    pub attr: Attr,
    pub body: Arc<ElabComp>,
}

#[derive(Clone, Debug)]
pub enum TerminalComp {
    Ret(TerminalValue),
    Lam(Arc<LamClosure>),
}

#[derive(Clone, Debug)]
pub struct EnvEntry {
    /// The binder as written in the program.
    pub name: VarId,
    /// The runtime key vectors refer to.
    pub key: VarId,
    /// `None` models a missing binding.
    pub value: Option<TerminalValue>,
}

/// A partial environment, outermost binding first.
#[derive(Clone, Debug, Default)]
pub struct Env {
    entries: Vec<EnvEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn entries(&self) -> &[EnvEntry] {
        &self.entries
    }

    /// Adds a binding whose runtime key is the binder itself.
    pub fn push(&mut self, x: VarId, value: Option<TerminalValue>) {
        self.entries.push(EnvEntry {
            name: x.clone(),
            key: x,
            value,
        });
    }

    fn extended(&self, name: &VarId, key: VarId, value: TerminalValue) -> Env {
        let mut e = self.clone();
        e.entries.push(EnvEntry {
            name: name.clone(),
            key,
            value: Some(value),
        });
        e
    }

    /// The runtime keys in scope.
    pub fn scope(&self) -> Scope {
        self.entries.iter().map(|e| e.key.clone()).collect()
    }

    fn lookup(&self, x: &VarId) -> Option<&EnvEntry> {
        self.entries.iter().rev().find(|e| &e.name == x)
    }

    pub fn get(&self, x: &VarId) -> Option<&TerminalValue> {
        self.lookup(x).and_then(|e| e.value.as_ref())
    }

    pub fn is_missing(&self, x: &VarId) -> bool {
        self.lookup(x).is_some_and(|e| e.value.is_none())
    }

    /// The first `n` bindings.
    pub fn prefix(&self, n: usize) -> Env {
        Env {
            entries: self.entries[..n.min(self.entries.len())].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Removes the binding for `x`, keeping `x` in scope as a missing variable.
pub fn drop_binding(env: &Env, x: &VarId) -> Result<Env, EvalError> {
    let mut out = env.clone();
    match out.entries.iter_mut().rev().find(|e| &e.name == x) {
        Some(e) => {
            e.value = None;
            Ok(out)
        }
        None => Err(EvalError::UnknownVariable(x.to_string())),
    }
}

#[derive(Clone, Debug)]
pub enum Outcome<T> {
    /// The terminal and, when tracking, the vector of the derivation.
    Success(T, Option<AttrVec>),
    FailMissing(VarId),
    FailStuck(String),
}

impl<T> Outcome<T> {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success(..))
    }

    pub fn terminal(&self) -> Option<&T> {
        match self {
            Outcome::Success(t, _) => Some(t),
            _ => None,
        }
    }

    pub fn effect(&self) -> Option<&AttrVec> {
        match self {
            Outcome::Success(_, g) => g.as_ref(),
            _ => None,
        }
    }
}

enum Fail {
    Missing(VarId),
    Stuck(String),
}

type Step<T> = Result<(T, Option<AttrVec>), Fail>;

fn stuck<T>(msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail::Stuck(msg.into()))
}

/// Evaluation settings. `fuel` bounds the number of rule applications; the
/// calculus terminates, so running out is a bug and panics.
#[derive(Clone, Debug)]
pub struct Evaluator {
    mode: Mode,
    track: bool,
    keys: Fresh,
    fuel: u64,
}

/// Fuel for a program of the given total size and maximum depth.
pub fn fuel_for(size: usize, depth: usize) -> u64 {
    (size.max(1) as u64).saturating_mul(1u64.checked_shl(depth.min(62) as u32).unwrap_or(u64::MAX))
}

impl Evaluator {
    /// `max_id` must bound every id in the program and environment.
    pub fn instrumented(mode: Mode, max_id: u32, fuel: u64) -> Evaluator {
        Evaluator {
            mode,
            track: true,
            keys: Fresh::above(max_id),
            fuel,
        }
    }

    pub fn erased(mode: Mode, max_id: u32, fuel: u64) -> Evaluator {
        Evaluator {
            mode,
            track: false,
            keys: Fresh::above(max_id),
            fuel,
        }
    }

    pub fn eval_value(&mut self, env: &Env, v: &ElabValue) -> Outcome<TerminalValue> {
        finish(self.value(env, v))
    }

    pub fn eval_comp(&mut self, env: &Env, m: &ElabComp) -> Outcome<TerminalComp> {
        finish(self.comp(env, m))
    }

    fn tick(&mut self) {
        assert!(
            self.fuel > 0,
            "evaluation fuel exhausted: the terminating calculus looped"
        );
        self.fuel -= 1;
    }

    fn default_vec(&self, env: &Env) -> Option<AttrVec> {
        self.track
            .then(|| AttrVec::default_over(self.mode, env.scope()))
    }

    fn plus(&self, a: Option<AttrVec>, b: Option<AttrVec>) -> Option<AttrVec> {
        match (a, b) {
            (Some(a), Some(b)) => Some(a.plus(&b).expect("vectors over one environment")),
            _ => None,
        }
    }

    /// Maps an annotation over syntactic binders onto the runtime keys of
    /// `env`.
    fn runtime(&self, env: &Env, g: &AttrVec) -> Result<AttrVec, Fail> {
        let mut out = AttrVec::default_over(self.mode, env.scope());
        for (x, a) in g.entries() {
            match env.lookup(x) {
                Some(e) => out.set(&e.key, *a),
                None => {
                    return stuck(format!(
                        "annotation mentions {x}, which is not in the environment"
                    ))
                }
            }
        }
        Ok(out)
    }

    fn value(&mut self, env: &Env, v: &ElabValue) -> Step<TerminalValue> {
        self.tick();
        match v {
            ElabValue::Unit => Ok((TerminalValue::Unit, self.default_vec(env))),
            ElabValue::Var(x) => match env.lookup(x) {
                None => stuck(format!("unbound variable {x}")),
                Some(EnvEntry { value: None, .. }) => Err(Fail::Missing(x.clone())),
                Some(EnvEntry {
                    key,
                    value: Some(w),
                    ..
                }) => {
                    let g = self
                        .track
                        .then(|| AttrVec::single(self.mode, env.scope(), key, Attr::Strict));
                    Ok((w.clone(), g))
                }
            },
            ElabValue::Thunk { gamma, body } => {
                let (gamma, effect) = if self.track {
                    let g = self.runtime(env, gamma)?;
                    let eff = match self.mode {
                        Mode::Base => AttrVec::default_over(self.mode, env.scope()),
                        Mode::Extended => g.lazify(),
                    };
                    (g, Some(eff))
                } else {
                    (gamma.clone(), None)
                };
                let clo = ThunkClosure {
                    gamma,
                    env: env.clone(),
                    body: body.clone(),
                };
                Ok((TerminalValue::Thunk(Arc::new(clo)), effect))
            }
            ElabValue::Inl(w, _) => {
                let (w, g) = self.value(env, w)?;
                Ok((TerminalValue::Inl(Box::new(w)), g))
            }
            ElabValue::Inr(w, _) => {
                let (w, g) = self.value(env, w)?;
                Ok((TerminalValue::Inr(Box::new(w)), g))
            }
            ElabValue::Pair(a, b) => {
                let (wa, ga) = self.value(env, a)?;
                let (wb, gb) = self.value(env, b)?;
                Ok((
                    TerminalValue::Pair(Box::new(wa), Box::new(wb)),
                    self.plus(ga, gb),
                ))
            }
        }
    }

    fn fresh_key(&mut self, x: &VarId) -> VarId {
        self.keys.fresh(x.name())
    }

    fn comp(&mut self, env: &Env, m: &ElabComp) -> Step<TerminalComp> {
        self.tick();
        match m {
            ElabComp::Ret(v) => {
                let (w, g) = self.value(env, v)?;
                Ok((TerminalComp::Ret(w), g))
            }
            ElabComp::Force(v) => {
                let (w, g1) = self.value(env, v)?;
                let TerminalValue::Thunk(clo) = w else {
                    return stuck("force of a non-thunk");
                };
                let (t, gb) = self.comp(&clo.env, &clo.body)?;
                if let Some(gb) = &gb {
                    if *gb != clo.gamma {
                        return stuck(format!(
                            "forced body used {gb}, thunk captured {}",
                            clo.gamma
                        ));
                    }
                }
                let g = self.track.then(|| clo.gamma.restrict(&env.scope()));
                Ok((t, self.plus(g1, g)))
            }
            ElabComp::Lam {
                x,
                gamma,
                attr,
                body,
                ..
            } => {
                let gamma = if self.track {
                    self.runtime(env, gamma)?
                } else {
                    gamma.clone()
                };
                let effect = self.track.then(|| gamma.clone());
                let clo = LamClosure {
                    gamma,
                    env: env.clone(),
                    x: x.clone(),
                    attr: *attr,
                    body: body.clone(),
                };
                Ok((TerminalComp::Lam(Arc::new(clo)), effect))
            }
            ElabComp::App(f, v) => {
                let (t, g1) = self.comp(env, f)?;
                let TerminalComp::Lam(clo) = t else {
                    return stuck("application of a non-function");
                };
                let (w, g2) = self.value(env, v)?;
                let key = self.fresh_key(&clo.x);
                let inner = clo.env.extended(&clo.x, key.clone(), w);
                let (t, gb) = self.comp(&inner, &clo.body)?;
                if let Some(gb) = &gb {
                    if gb.downshift(&key) != clo.gamma || gb.get(&key) != clo.attr {
                        return stuck(format!(
                            "function body used {gb}, closure captured {} with argument {}",
                            clo.gamma, clo.attr
                        ));
                    }
                }
                Ok((t, self.plus(g1, g2)))
            }
            ElabComp::Let { x, bound, body } => {
                let (t, g1) = self.comp(env, bound)?;
                let TerminalComp::Ret(w) = t else {
                    return stuck("let-binding of a function closure");
                };
                let key = self.fresh_key(x);
                let (t, g2) = self.comp(&env.extended(x, key.clone(), w), body)?;
                Ok((t, self.plus(g1, g2.map(|g| g.downshift(&key)))))
            }
            ElabComp::Split {
                x1,
                x2,
                scrut,
                body,
            } => {
                let (w, g1) = self.value(env, scrut)?;
                let TerminalValue::Pair(w1, w2) = w else {
                    return stuck("split of a non-pair");
                };
                let (k1, k2) = (self.fresh_key(x1), self.fresh_key(x2));
                let inner = env
                    .extended(x1, k1.clone(), *w1)
                    .extended(x2, k2.clone(), *w2);
                let (t, g2) = self.comp(&inner, body)?;
                Ok((
                    t,
                    self.plus(g1, g2.map(|g| g.downshift(&k1).downshift(&k2))),
                ))
            }
            ElabComp::Sub { target, body, .. } => {
                let (t, g) = self.comp(env, body)?;
                if let Some(g) = g {
                    let target = self.runtime(env, target)?;
                    if !target.leq(&g).expect("one environment") {
                        return stuck(format!("subsumption target {target} is not below {g}"));
                    }
                    return Ok((t, Some(target)));
                }
                Ok((t, None))
            }
            ElabComp::Seq(v, body) => {
                let (w, g1) = self.value(env, v)?;
                if !matches!(w, TerminalValue::Unit) {
                    return stuck("sequencing a non-unit value");
                }
                let (t, g2) = self.comp(env, body)?;
                Ok((t, self.plus(g1, g2)))
            }
            ElabComp::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => {
                let (w, g1) = self.value(env, scrut)?;
                let (x, w, branch) = match w {
                    TerminalValue::Inl(w) => (x1, *w, left),
                    TerminalValue::Inr(w) => (x2, *w, right),
                    _ => return stuck("case on a non-injection"),
                };
                let key = self.fresh_key(x);
                let (t, g2) = self.comp(&env.extended(x, key.clone(), w), branch)?;
                Ok((t, self.plus(g1, g2.map(|g| g.downshift(&key)))))
            }
        }
    }
}

fn finish<T>(r: Step<T>) -> Outcome<T> {
    match r {
        Ok((t, g)) => Outcome::Success(t, g),
        Err(Fail::Missing(x)) => Outcome::FailMissing(x),
        Err(Fail::Stuck(s)) => Outcome::FailStuck(s),
    }
}

/// How missing bindings compare under [`env_eq_mod_gamma`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Missing {
    /// A missing binding equals only another missing binding.
    Exact,
    /// A missing binding on either side matches anything.
    Wildcard,
}

/// `≡` on terminal values: structural equality ignoring every stored vector.
pub fn value_eq_mod_gamma(a: &TerminalValue, b: &TerminalValue, missing: Missing) -> bool {
    use TerminalValue as W;
    match (a, b) {
        (W::Unit, W::Unit) => true,
        (W::Pair(a1, a2), W::Pair(b1, b2)) => {
            value_eq_mod_gamma(a1, b1, missing) && value_eq_mod_gamma(a2, b2, missing)
        }
        (W::Inl(a), W::Inl(b)) | (W::Inr(a), W::Inr(b)) => value_eq_mod_gamma(a, b, missing),
        (W::Thunk(p), W::Thunk(q)) => {
            Arc::ptr_eq(p, q)
                || (comp_shape_eq(&p.body, &q.body) && env_eq_mod_gamma(&p.env, &q.env, missing))
        }
        _ => false,
    }
}

/// `≡` on terminal computations.
pub fn eq_mod_gamma(a: &TerminalComp, b: &TerminalComp, missing: Missing) -> bool {
    match (a, b) {
        (TerminalComp::Ret(v), TerminalComp::Ret(w)) => value_eq_mod_gamma(v, w, missing),
        (TerminalComp::Lam(p), TerminalComp::Lam(q)) => {
            Arc::ptr_eq(p, q)
                || (p.x == q.x
                    && comp_shape_eq(&p.body, &q.body)
                    && env_eq_mod_gamma(&p.env, &q.env, missing))
        }
        _ => false,
    }
}

/// `≡` on environments: same binders in the same order, related values.
pub fn env_eq_mod_gamma(a: &Env, b: &Env, missing: Missing) -> bool {
    a.entries.len() == b.entries.len()
        && a.entries.iter().zip(&b.entries).all(|(p, q)| {
            p.name == q.name
                && match (&p.value, &q.value) {
                    (Some(v), Some(w)) => value_eq_mod_gamma(v, w, missing),
                    (None, None) => true,
                    _ => missing == Missing::Wildcard,
                }
        })
}

/// Semantic failure, decided by attribute-erased evaluation.
pub fn semantic_fails(env: &Env, m: &ElabComp, mode: Mode, max_id: u32, fuel: u64) -> bool {
    !Evaluator::erased(mode, max_id, fuel)
        .eval_comp(env, m)
        .is_success()
}

impl std::fmt::Display for TerminalValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalValue::Unit => f.write_str("()"),
            TerminalValue::Pair(a, b) => write!(f, "({a}, {b})"),
            TerminalValue::Inl(w) => write!(f, "inl {w}"),
            TerminalValue::Inr(w) => write!(f, "inr {w}"),
            TerminalValue::Thunk(c) => write!(f, "{{{}, {}, {}}}", c.gamma, c.env, c.body),
        }
    }
}

impl std::fmt::Display for TerminalComp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalComp::Ret(w) => write!(f, "ret {w}"),
            TerminalComp::Lam(c) => {
                write!(f, "<<{}, {}, fn {} . {}>>", c.gamma, c.env, c.x, c.body)
            }
        }
    }
}

impl std::fmt::Display for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("[")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match &e.value {
                Some(w) => write!(f, "{} |-> {w}", e.name)?,
                None => write!(f, "{} missing", e.name)?,
            }
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, Lang, Program};
    use crate::program::{build_env, check_cbpv_program, decl_by_name, CheckedCbpv};
    use std::collections::BTreeSet;

    fn checked(src: &str) -> CheckedCbpv {
        let Program::Cbpv(p) = parse_program(src, Some(Lang::Cbpv), Mode::Base).unwrap() else {
            unreachable!()
        };
        check_cbpv_program(&p).unwrap()
    }

    fn run(c: &CheckedCbpv, drop: &[&str], erased: bool) -> Outcome<TerminalComp> {
        let missing: BTreeSet<VarId> = drop
            .iter()
            .map(|n| decl_by_name(c, n).unwrap().clone())
            .collect();
        let mut ev = if erased { c.erased() } else { c.instrumented() };
        let built = build_env(c, &mut ev, &missing);
        ev.eval_comp(&built.env, &c.main.elab)
    }

    const FORCE: &str =
        "var y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nmain = force t";
    const LAZY: &str = "var y : unit = ()\nmain = ret thunk { y; ret () }";

    #[test]
    fn instrumented_effect_matches_the_checker() {
        let c = checked(FORCE);
        let out = run(&c, &[], false);
        assert_eq!(out.effect(), Some(&c.main.effect));
        assert!(matches!(
            out.terminal(),
            Some(TerminalComp::Ret(TerminalValue::Unit))
        ));
    }

    #[test]
    fn strict_variable_missing_fails() {
        let c = checked(FORCE);
        assert!(matches!(run(&c, &["y"], true), Outcome::FailMissing(x) if x.name() == "y"));
        assert!(matches!(run(&c, &["y"], false), Outcome::FailMissing(_)));
    }

    #[test]
    fn lazy_variable_missing_succeeds_up_to_missing_bindings() {
        let c = checked(LAZY);
        let full = run(&c, &[], false);
        let dropped = run(&c, &["y"], false);
        let (a, b) = (full.terminal().unwrap(), dropped.terminal().unwrap());
        assert!(eq_mod_gamma(a, b, Missing::Wildcard));
        assert!(!eq_mod_gamma(a, b, Missing::Exact));
    }

    #[test]
    fn erased_evaluation_tracks_nothing() {
        let c = checked(FORCE);
        let out = run(&c, &[], true);
        assert!(out.is_success());
        assert_eq!(out.effect(), None);
        assert!(eq_mod_gamma(
            out.terminal().unwrap(),
            run(&c, &[], false).terminal().unwrap(),
            Missing::Exact
        ));
    }

    #[test]
    fn dropping_an_unknown_binding_is_an_error() {
        let env = Env::new();
        assert!(matches!(
            drop_binding(&env, &VarId::new(7, "q")),
            Err(EvalError::UnknownVariable(_))
        ));
    }

    #[test]
    fn fuel_grows_with_depth() {
        assert!(fuel_for(10, 3) > fuel_for(10, 2));
        assert_eq!(fuel_for(0, 0), 1);
        assert_eq!(fuel_for(4, 100), u64::MAX);
    }
}
