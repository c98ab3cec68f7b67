//! The call-by-name calculus: types, terms, contexts and the checker.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::attrs::{Attr, AttrVec, Fresh, Mode, Scope, VarId};
use crate::error::TypeError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CbnType {
    Unit,
    Prod(Box<CbnType>, AttrVec, Box<CbnType>, AttrVec),
    Sum(Box<CbnType>, AttrVec, Box<CbnType>, AttrVec),
    Arrow(Box<CbnArrow>),
}

/// `(x :α arg^arg_latent) -[latent]-> ret`. Only `ret` may mention `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CbnArrow {
    pub x: VarId,
    pub attr: Attr,
    pub arg: CbnType,
    pub arg_latent: AttrVec,
    pub latent: AttrVec,
    pub ret: CbnType,
}

fn with(scope: &Scope, x: &VarId) -> Scope {
    let mut s = scope.clone();
    s.insert(x.clone());
    s
}

impl CbnType {
    pub fn prod(t1: CbnType, g1: AttrVec, t2: CbnType, g2: AttrVec) -> CbnType {
        CbnType::Prod(Box::new(t1), g1, Box::new(t2), g2)
    }

    pub fn sum(t1: CbnType, g1: AttrVec, t2: CbnType, g2: AttrVec) -> CbnType {
        CbnType::Sum(Box::new(t1), g1, Box::new(t2), g2)
    }

    /// `unit + unit` with default vectors.
    pub fn bool_over(mode: Mode, scope: &Scope) -> CbnType {
        let d = AttrVec::default_over(mode, scope.clone());
        CbnType::sum(CbnType::Unit, d.clone(), CbnType::Unit, d)
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, CbnType::Sum(a, g1, b, g2)
            if **a == CbnType::Unit && **b == CbnType::Unit && g1.is_default() && g2.is_default())
    }

    /// Restricts every vector to `scope` (plus the arrow binder inside
    /// return types).
    pub fn widen(&self, scope: &Scope) -> CbnType {
        match self {
            CbnType::Unit => CbnType::Unit,
            CbnType::Prod(a, g1, b, g2) => CbnType::prod(
                a.widen(scope),
                g1.restrict(scope),
                b.widen(scope),
                g2.restrict(scope),
            ),
            CbnType::Sum(a, g1, b, g2) => CbnType::sum(
                a.widen(scope),
                g1.restrict(scope),
                b.widen(scope),
                g2.restrict(scope),
            ),
            CbnType::Arrow(ar) => CbnType::Arrow(Box::new(CbnArrow {
                x: ar.x.clone(),
                attr: ar.attr,
                arg: ar.arg.widen(scope),
                arg_latent: ar.arg_latent.restrict(scope),
                latent: ar.latent.restrict(scope),
                ret: ar.ret.widen(&with(scope, &ar.x)),
            })),
        }
    }

    pub fn downshift(&self, x: &VarId) -> CbnType {
        match self {
            CbnType::Unit => CbnType::Unit,
            CbnType::Prod(a, g1, b, g2) => CbnType::prod(
                a.downshift(x),
                g1.downshift(x),
                b.downshift(x),
                g2.downshift(x),
            ),
            CbnType::Sum(a, g1, b, g2) => CbnType::sum(
                a.downshift(x),
                g1.downshift(x),
                b.downshift(x),
                g2.downshift(x),
            ),
            CbnType::Arrow(ar) => CbnType::Arrow(Box::new(CbnArrow {
                x: ar.x.clone(),
                attr: ar.attr,
                arg: ar.arg.downshift(x),
                arg_latent: ar.arg_latent.downshift(x),
                latent: ar.latent.downshift(x),
                ret: ar.ret.downshift(x),
            })),
        }
    }

    /// Applies a variable renaming to every vector.
    pub fn rename_map(&self, map: &HashMap<VarId, VarId>) -> CbnType {
        let rv = |g: &AttrVec| rename_vec(g, map);
        match self {
            CbnType::Unit => CbnType::Unit,
            CbnType::Prod(a, g1, b, g2) => {
                CbnType::prod(a.rename_map(map), rv(g1), b.rename_map(map), rv(g2))
            }
            CbnType::Sum(a, g1, b, g2) => {
                CbnType::sum(a.rename_map(map), rv(g1), b.rename_map(map), rv(g2))
            }
            CbnType::Arrow(ar) => CbnType::Arrow(Box::new(CbnArrow {
                x: map.get(&ar.x).cloned().unwrap_or_else(|| ar.x.clone()),
                attr: ar.attr,
                arg: ar.arg.rename_map(map),
                arg_latent: rv(&ar.arg_latent),
                latent: rv(&ar.latent),
                ret: ar.ret.rename_map(map),
            })),
        }
    }

    /// Variables with a non-default attribute somewhere in the type (free
    /// ones only).
    pub fn mentions(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_mentions(&mut out);
        out
    }

    fn collect_mentions(&self, out: &mut BTreeSet<VarId>) {
        match self {
            CbnType::Unit => {}
            CbnType::Prod(a, g1, b, g2) | CbnType::Sum(a, g1, b, g2) => {
                a.collect_mentions(out);
                b.collect_mentions(out);
                out.extend(g1.support().cloned());
                out.extend(g2.support().cloned());
            }
            CbnType::Arrow(ar) => {
                ar.arg.collect_mentions(out);
                out.extend(ar.arg_latent.support().cloned());
                out.extend(ar.latent.support().cloned());
                let mut inner = BTreeSet::new();
                ar.ret.collect_mentions(&mut inner);
                inner.remove(&ar.x);
                out.extend(inner);
            }
        }
    }

    /// True iff every vector is scoped exactly over `scope` (plus arrow
    /// binders in return types).
    pub fn scoped_exactly(&self, scope: &Scope) -> bool {
        match self {
            CbnType::Unit => true,
            CbnType::Prod(a, g1, b, g2) | CbnType::Sum(a, g1, b, g2) => {
                g1.scope() == scope
                    && g2.scope() == scope
                    && a.scoped_exactly(scope)
                    && b.scoped_exactly(scope)
            }
            CbnType::Arrow(ar) => {
                ar.arg_latent.scope() == scope
                    && ar.latent.scope() == scope
                    && ar.arg.scoped_exactly(scope)
                    && ar.ret.scoped_exactly(&with(scope, &ar.x))
            }
        }
    }

    /// Every attribute in the type is legal in `mode`.
    pub fn legal_in(&self, mode: Mode) -> bool {
        let ok = |g: &AttrVec| g.mode() == mode;
        match self {
            CbnType::Unit => true,
            CbnType::Prod(a, g1, b, g2) | CbnType::Sum(a, g1, b, g2) => {
                ok(g1) && ok(g2) && a.legal_in(mode) && b.legal_in(mode)
            }
            CbnType::Arrow(ar) => {
                ar.attr.legal_in(mode)
                    && ok(&ar.arg_latent)
                    && ok(&ar.latent)
                    && ar.arg.legal_in(mode)
                    && ar.ret.legal_in(mode)
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            CbnType::Unit => 1,
            CbnType::Prod(a, _, b, _) | CbnType::Sum(a, _, b, _) => 1 + a.size() + b.size(),
            CbnType::Arrow(ar) => 1 + ar.arg.size() + ar.ret.size(),
        }
    }
}

pub(crate) fn rename_vec(g: &AttrVec, map: &HashMap<VarId, VarId>) -> AttrVec {
    if map.is_empty() || !g.scope().iter().any(|x| map.contains_key(x)) {
        return g.clone();
    }
    let scope: Scope = g
        .scope()
        .iter()
        .map(|x| map.get(x).cloned().unwrap_or_else(|| x.clone()))
        .collect();
    let entries = g
        .entries()
        .iter()
        .map(|(x, a)| (map.get(x).cloned().unwrap_or_else(|| x.clone()), *a));
    AttrVec::from_entries(g.mode(), scope, entries).expect("renaming preserves legality")
}

/// Defaulted-lookup agreement, regardless of scope.
pub fn vec_agree(a: &AttrVec, b: &AttrVec) -> bool {
    a.entries() == b.entries()
}

/// Structural equality with defaulted vectors, up to renaming of arrow
/// binders.
pub fn cbn_type_equal(a: &CbnType, b: &CbnType) -> bool {
    match (a, b) {
        (CbnType::Unit, CbnType::Unit) => true,
        (CbnType::Prod(a1, g1, a2, g2), CbnType::Prod(b1, h1, b2, h2))
        | (CbnType::Sum(a1, g1, a2, g2), CbnType::Sum(b1, h1, b2, h2)) => {
            vec_agree(g1, h1)
                && vec_agree(g2, h2)
                && cbn_type_equal(a1, b1)
                && cbn_type_equal(a2, b2)
        }
        (CbnType::Arrow(p), CbnType::Arrow(q)) => {
            if p.attr != q.attr
                || !vec_agree(&p.arg_latent, &q.arg_latent)
                || !vec_agree(&p.latent, &q.latent)
                || !cbn_type_equal(&p.arg, &q.arg)
            {
                return false;
            }
            if p.x == q.x {
                cbn_type_equal(&p.ret, &q.ret)
            } else {
                let map = HashMap::from([(q.x.clone(), p.x.clone())]);
                cbn_type_equal(&p.ret, &q.ret.rename_map(&map))
            }
        }
        _ => false,
    }
}

/// E(τ): the latent effects in positive positions, over `scope`.
pub fn cbn_effects_of(t: &CbnType, mode: Mode, scope: &Scope) -> AttrVec {
    let plus = |a: AttrVec, b: &AttrVec| a.plus(&b.restrict(scope)).expect("same scope");
    match t {
        CbnType::Unit => AttrVec::default_over(mode, scope.clone()),
        CbnType::Prod(a, g1, b, g2) | CbnType::Sum(a, g1, b, g2) => {
            let e = plus(g1.restrict(scope), g2);
            let e = plus(e, &cbn_effects_of(a, mode, scope));
            plus(e, &cbn_effects_of(b, mode, scope))
        }
        CbnType::Arrow(ar) => {
            let inner = cbn_effects_of(&ar.ret, mode, &with(scope, &ar.x)).downshift(&ar.x);
            let e = plus(
                ar.latent.restrict(scope),
                &cbn_effects_of(&ar.arg, mode, scope),
            );
            plus(e, &inner)
        }
    }
}

fn wf_struct(t: &CbnType, mode: Mode, scope: &Scope) -> bool {
    match t {
        CbnType::Unit => true,
        CbnType::Prod(a, g1, b, g2) | CbnType::Sum(a, g1, b, g2) => {
            wf_in(&g1.restrict(scope), a, mode, scope) && wf_in(&g2.restrict(scope), b, mode, scope)
        }
        CbnType::Arrow(ar) => {
            wf_in(&ar.arg_latent.restrict(scope), &ar.arg, mode, scope)
                && wf_in(
                    &ar.latent.restrict(scope),
                    &ar.ret.downshift(&ar.x),
                    mode,
                    scope,
                )
        }
    }
}

fn wf_in(g: &AttrVec, t: &CbnType, mode: Mode, scope: &Scope) -> bool {
    if !wf_struct(t, mode, scope) {
        return false;
    }
    let e = cbn_effects_of(t, mode, scope);
    g.lazify() == g.plus(&e).expect("same scope").lazify()
}

/// `γ ⊢WF τ`. Always true in base mode.
pub fn cbn_wf_type(g: &AttrVec, t: &CbnType, mode: Mode) -> bool {
    match mode {
        Mode::Base => true,
        Mode::Extended => wf_in(g, t, mode, g.scope()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CbnTerm {
    Unit,
    Var(VarId),
    Inl(Box<CbnTerm>, CbnType),
    Inr(Box<CbnTerm>, CbnType),
    Pair(Box<CbnTerm>, Box<CbnTerm>),
    Lam {
        x: VarId,
        arg: CbnType,
        arg_latent: AttrVec,
        body: Box<CbnTerm>,
    },
    App(Box<CbnTerm>, Box<CbnTerm>),
    Let {
        x: VarId,
        bound: Box<CbnTerm>,
        body: Box<CbnTerm>,
    },
    Sub {
        target: AttrVec,
        body: Box<CbnTerm>,
    },
    Seq(Box<CbnTerm>, Box<CbnTerm>),
    Split {
        x1: VarId,
        x2: VarId,
        scrut: Box<CbnTerm>,
        body: Box<CbnTerm>,
    },
    Case {
        scrut: Box<CbnTerm>,
        x1: VarId,
        left: Box<CbnTerm>,
        x2: VarId,
        right: Box<CbnTerm>,
    },
}

impl CbnTerm {
    pub fn size(&self) -> usize {
        match self {
            CbnTerm::Unit | CbnTerm::Var(_) => 1,
            CbnTerm::Inl(e, _) | CbnTerm::Inr(e, _) => 1 + e.size(),
            CbnTerm::Lam { body, .. } | CbnTerm::Sub { body, .. } => 1 + body.size(),
            CbnTerm::Pair(a, b) | CbnTerm::App(a, b) | CbnTerm::Seq(a, b) => {
                1 + a.size() + b.size()
            }
            CbnTerm::Let { bound, body, .. } => 1 + bound.size() + body.size(),
            CbnTerm::Split { scrut, body, .. } => 1 + scrut.size() + body.size(),
            CbnTerm::Case {
                scrut, left, right, ..
            } => 1 + scrut.size() + left.size() + right.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            CbnTerm::Unit | CbnTerm::Var(_) => 1,
            CbnTerm::Inl(e, _) | CbnTerm::Inr(e, _) => 1 + e.depth(),
            CbnTerm::Lam { body, .. } | CbnTerm::Sub { body, .. } => 1 + body.depth(),
            CbnTerm::Pair(a, b) | CbnTerm::App(a, b) | CbnTerm::Seq(a, b) => {
                1 + a.depth().max(b.depth())
            }
            CbnTerm::Let { bound, body, .. } => 1 + bound.depth().max(body.depth()),
            CbnTerm::Split { scrut, body, .. } => 1 + scrut.depth().max(body.depth()),
            CbnTerm::Case {
                scrut, left, right, ..
            } => 1 + scrut.depth().max(left.depth()).max(right.depth()),
        }
    }

    /// Short tag of the outermost syntax form.
    pub fn form(&self) -> &'static str {
        match self {
            CbnTerm::Unit => "unit",
            CbnTerm::Var(_) => "var",
            CbnTerm::Inl(..) => "inl",
            CbnTerm::Inr(..) => "inr",
            CbnTerm::Pair(..) => "pair",
            CbnTerm::Lam { .. } => "lam",
            CbnTerm::App(..) => "app",
            CbnTerm::Let { .. } => "let",
            CbnTerm::Sub { .. } => "sub",
            CbnTerm::Seq(..) => "seq",
            CbnTerm::Split { .. } => "split",
            CbnTerm::Case { .. } => "case",
        }
    }

    pub fn for_each_subterm(&self, f: &mut impl FnMut(&CbnTerm)) {
        f(self);
        match self {
            CbnTerm::Unit | CbnTerm::Var(_) => {}
            CbnTerm::Inl(e, _) | CbnTerm::Inr(e, _) => e.for_each_subterm(f),
            CbnTerm::Lam { body, .. } | CbnTerm::Sub { body, .. } => body.for_each_subterm(f),
            CbnTerm::Pair(a, b) | CbnTerm::App(a, b) | CbnTerm::Seq(a, b) => {
                a.for_each_subterm(f);
                b.for_each_subterm(f)
            }
            CbnTerm::Let { bound, body, .. } => {
                bound.for_each_subterm(f);
                body.for_each_subterm(f)
            }
            CbnTerm::Split { scrut, body, .. } => {
                scrut.for_each_subterm(f);
                body.for_each_subterm(f)
            }
            CbnTerm::Case {
                scrut, left, right, ..
            } => {
                scrut.for_each_subterm(f);
                left.for_each_subterm(f);
                right.for_each_subterm(f)
            }
        }
    }

    /// Copies the term giving every binder a fresh id (annotations follow).
    pub fn freshen(&self, fresh: &mut Fresh) -> CbnTerm {
        self.freshen_with(fresh, &mut HashMap::new())
    }

    fn freshen_with(&self, fresh: &mut Fresh, map: &mut HashMap<VarId, VarId>) -> CbnTerm {
        let bind = |x: &VarId, fresh: &mut Fresh, map: &mut HashMap<VarId, VarId>| {
            let y = fresh.fresh(x.name());
            map.insert(x.clone(), y.clone());
            y
        };
        match self {
            CbnTerm::Unit => CbnTerm::Unit,
            CbnTerm::Var(x) => CbnTerm::Var(map.get(x).cloned().unwrap_or_else(|| x.clone())),
            CbnTerm::Inl(e, t) => {
                CbnTerm::Inl(Box::new(e.freshen_with(fresh, map)), t.rename_map(map))
            }
            CbnTerm::Inr(e, t) => {
                CbnTerm::Inr(Box::new(e.freshen_with(fresh, map)), t.rename_map(map))
            }
            CbnTerm::Pair(a, b) => CbnTerm::Pair(
                Box::new(a.freshen_with(fresh, map)),
                Box::new(b.freshen_with(fresh, map)),
            ),
            CbnTerm::App(a, b) => CbnTerm::App(
                Box::new(a.freshen_with(fresh, map)),
                Box::new(b.freshen_with(fresh, map)),
            ),
            CbnTerm::Seq(a, b) => CbnTerm::Seq(
                Box::new(a.freshen_with(fresh, map)),
                Box::new(b.freshen_with(fresh, map)),
            ),
            CbnTerm::Lam {
                x,
                arg,
                arg_latent,
                body,
            } => {
                let arg = arg.rename_map(map);
                let arg_latent = rename_vec(arg_latent, map);
                let y = bind(x, fresh, map);
                CbnTerm::Lam {
                    x: y,
                    arg,
                    arg_latent,
                    body: Box::new(body.freshen_with(fresh, map)),
                }
            }
            CbnTerm::Let { x, bound, body } => {
                let bound = Box::new(bound.freshen_with(fresh, map));
                let y = bind(x, fresh, map);
                CbnTerm::Let {
                    x: y,
                    bound,
                    body: Box::new(body.freshen_with(fresh, map)),
                }
            }
            CbnTerm::Sub { target, body } => CbnTerm::Sub {
                target: rename_vec(target, map),
                body: Box::new(body.freshen_with(fresh, map)),
            },
            CbnTerm::Split {
                x1,
                x2,
                scrut,
                body,
            } => {
                let scrut = Box::new(scrut.freshen_with(fresh, map));
                let y1 = bind(x1, fresh, map);
                let y2 = bind(x2, fresh, map);
                CbnTerm::Split {
                    x1: y1,
                    x2: y2,
                    scrut,
                    body: Box::new(body.freshen_with(fresh, map)),
                }
            }
            CbnTerm::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => {
                let scrut = Box::new(scrut.freshen_with(fresh, map));
                let y1 = bind(x1, fresh, map);
                let left = Box::new(left.freshen_with(fresh, map));
                let y2 = bind(x2, fresh, map);
                let right = Box::new(right.freshen_with(fresh, map));
                CbnTerm::Case {
                    scrut,
                    x1: y1,
                    left,
                    x2: y2,
                    right,
                }
            }
        }
    }

    /// Largest variable id occurring anywhere (binders, uses, annotations).
    pub fn max_var_id(&self) -> u32 {
        let mut m = 0;
        self.for_each_subterm(&mut |e| {
            let ids: Vec<u32> = match e {
                CbnTerm::Var(x) => vec![x.id()],
                CbnTerm::Lam {
                    x, arg, arg_latent, ..
                } => {
                    let mut v = vec![x.id()];
                    v.extend(arg_latent.scope().iter().map(|y| y.id()));
                    v.push(type_max_id(arg));
                    v
                }
                CbnTerm::Let { x, .. } => vec![x.id()],
                CbnTerm::Split { x1, x2, .. } | CbnTerm::Case { x1, x2, .. } => {
                    vec![x1.id(), x2.id()]
                }
                CbnTerm::Sub { target, .. } => target.scope().iter().map(|y| y.id()).collect(),
                CbnTerm::Inl(_, t) | CbnTerm::Inr(_, t) => vec![type_max_id(t)],
                _ => vec![],
            };
            m = ids.into_iter().fold(m, u32::max);
        });
        m
    }
}

pub(crate) fn type_max_id(t: &CbnType) -> u32 {
    let vm = |g: &AttrVec| g.scope().iter().map(|x| x.id()).max().unwrap_or(0);
    match t {
        CbnType::Unit => 0,
        CbnType::Prod(a, g1, b, g2) | CbnType::Sum(a, g1, b, g2) => {
            type_max_id(a).max(type_max_id(b)).max(vm(g1)).max(vm(g2))
        }
        CbnType::Arrow(ar) => {
            ar.x.id()
                .max(type_max_id(&ar.arg))
                .max(type_max_id(&ar.ret))
                .max(vm(&ar.arg_latent))
                .max(vm(&ar.latent))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CbnEntry {
    pub x: VarId,
    pub ty: CbnType,
    pub latent: AttrVec,
}

/// `Γ`: each entry is scoped over the preceding ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CbnCtx {
    entries: Vec<CbnEntry>,
}

impl CbnCtx {
    pub fn new() -> CbnCtx {
        CbnCtx::default()
    }

    pub fn push(&mut self, x: VarId, ty: CbnType, latent: AttrVec) {
        self.entries.push(CbnEntry { x, ty, latent });
    }

    pub fn entries(&self) -> &[CbnEntry] {
        &self.entries
    }

    pub fn scope(&self) -> Scope {
        self.entries.iter().map(|e| e.x.clone()).collect()
    }

    pub fn lookup(&self, x: &VarId) -> Option<&CbnEntry> {
        self.entries.iter().rev().find(|e| &e.x == x)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_var_id(&self) -> u32 {
        self.entries
            .iter()
            .map(|e| e.x.id().max(type_max_id(&e.ty)))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CbnJudgment {
    pub effect: AttrVec,
    pub ty: CbnType,
}

struct Checker {
    mode: Mode,
    ctx: Vec<CbnEntry>,
    scope: Scope,
    lambdas: BTreeMap<VarId, Attr>,
}

fn mismatch(what: &str, expected: &CbnType, got: &CbnType) -> TypeError {
    TypeError::TypeMismatch(format!("{what}: expected {expected}, found {got}"))
}

impl Checker {
    fn default_vec(&self) -> AttrVec {
        AttrVec::default_over(self.mode, self.scope.clone())
    }

    fn push(&mut self, x: &VarId, ty: CbnType, latent: AttrVec) {
        self.scope.insert(x.clone());
        self.ctx.push(CbnEntry {
            x: x.clone(),
            ty,
            latent,
        });
    }

    fn pop(&mut self) {
        let e = self.ctx.pop().expect("balanced push/pop");
        self.scope.remove(&e.x);
    }

    fn plus(&self, a: &AttrVec, b: &AttrVec) -> AttrVec {
        a.plus(b).expect("judgment vectors share the context scope")
    }

    fn in_scope_vec(&self, g: &AttrVec, what: &str) -> Result<AttrVec, TypeError> {
        if g.mode() != self.mode {
            return Err(TypeError::Attr(crate::attrs::AttrError::IllegalAttribute));
        }
        if let Some(x) = g.support().find(|x| !self.scope.contains(*x)) {
            return Err(TypeError::ScopeEscape(format!(
                "{what} mentions {x}, which is not in scope"
            )));
        }
        Ok(g.restrict(&self.scope))
    }

    fn in_scope_type(&self, t: &CbnType, what: &str) -> Result<CbnType, TypeError> {
        if !t.legal_in(self.mode) {
            return Err(TypeError::Attr(crate::attrs::AttrError::IllegalAttribute));
        }
        if let Some(x) = t.mentions().into_iter().find(|x| !self.scope.contains(x)) {
            return Err(TypeError::ScopeEscape(format!(
                "{what} mentions {x}, which is not in scope"
            )));
        }
        Ok(t.widen(&self.scope))
    }

    fn effects_of(&self, t: &CbnType) -> AttrVec {
        cbn_effects_of(t, self.mode, &self.scope)
    }

    fn wf(&self, g: &AttrVec, t: &CbnType) -> bool {
        cbn_wf_type(g, t, self.mode)
    }

    fn ext(&self) -> bool {
        self.mode == Mode::Extended
    }

    fn synth(&mut self, e: &CbnTerm) -> Result<CbnJudgment, TypeError> {
        let j = self.synth_node(e)?;
        if j.effect.scope() != &self.scope || !j.ty.scoped_exactly(&self.scope) {
            return Err(TypeError::ScopeEscape(format!(
                "judgment for {e} is not scoped over the context"
            )));
        }
        Ok(j)
    }

    fn synth_node(&mut self, e: &CbnTerm) -> Result<CbnJudgment, TypeError> {
        match e {
            CbnTerm::Unit => Ok(CbnJudgment {
                effect: self.default_vec(),
                ty: CbnType::Unit,
            }),
            CbnTerm::Var(x) => {
                let entry = self
                    .ctx
                    .iter()
                    .rev()
                    .find(|en| &en.x == x)
                    .ok_or_else(|| TypeError::UnboundVariable(x.to_string()))?;
                // x never occurs in its own latent vector, so `γ + {x:S}`
                // and `γ, x:S` coincide.
                let mut effect = entry.latent.restrict(&self.scope);
                effect.set(x, Attr::Strict);
                let ty = entry.ty.widen(&self.scope);
                Ok(CbnJudgment { effect, ty })
            }
            CbnTerm::Inl(body, annot) | CbnTerm::Inr(body, annot) => {
                let left = matches!(e, CbnTerm::Inl(..));
                let annot = self.in_scope_type(annot, "injection annotation")?;
                let CbnType::Sum(t1, g1, t2, g2) = &annot else {
                    return Err(TypeError::TypeMismatch(format!(
                        "injection annotated with non-sum {annot}"
                    )));
                };
                let (mine_t, mine_g, other_t, other_g) = if left {
                    (t1, g1, t2, g2)
                } else {
                    (t2, g2, t1, g1)
                };
                let j = self.synth(body)?;
                if !cbn_type_equal(&j.ty, mine_t) {
                    return Err(mismatch("injected term", mine_t, &j.ty));
                }
                if j.effect != *mine_g {
                    return Err(TypeError::TypeMismatch(format!(
                        "injected term has effect {}, annotation declares {}",
                        j.effect, mine_g
                    )));
                }
                let effect = if self.ext() {
                    if g1.lazify() != g2.lazify() {
                        return Err(TypeError::IllFormedType(format!(
                            "sum components {g1} and {g2} do not agree after lazify"
                        )));
                    }
                    if !self.wf(other_g, other_t) {
                        return Err(TypeError::IllFormedType(format!(
                            "{other_t} with {other_g}"
                        )));
                    }
                    let s = self.plus(&self.plus(g1, g2), &self.effects_of(other_t));
                    s.lazify()
                } else {
                    self.default_vec()
                };
                Ok(CbnJudgment {
                    effect,
                    ty: annot.clone(),
                })
            }
            CbnTerm::Pair(a, b) => {
                let j1 = self.synth(a)?;
                let j2 = self.synth(b)?;
                let effect = if self.ext() {
                    self.plus(&j1.effect, &j2.effect).lazify()
                } else {
                    self.default_vec()
                };
                Ok(CbnJudgment {
                    effect,
                    ty: CbnType::prod(j1.ty, j1.effect, j2.ty, j2.effect),
                })
            }
            CbnTerm::Lam {
                x,
                arg,
                arg_latent,
                body,
            } => {
                let arg = self.in_scope_type(arg, "argument type")?;
                let arg_latent = self.in_scope_vec(arg_latent, "argument latent effect")?;
                if !self.wf(&arg_latent, &arg) {
                    return Err(TypeError::IllFormedType(format!(
                        "argument {arg} with {arg_latent}"
                    )));
                }
                self.push(x, arg.clone(), arg_latent.clone());
                let jb = self.synth(body);
                self.pop();
                let jb = jb?;
                let attr = jb.effect.get(x);
                self.lambdas.insert(x.clone(), attr);
                let latent = jb.effect.downshift(x);
                let effect = if self.ext() {
                    let inner =
                        cbn_effects_of(&jb.ty, self.mode, &with(&self.scope, x)).downshift(x);
                    if inner.lazify() != self.plus(&arg_latent, &inner).lazify() {
                        return Err(TypeError::IllFormedType(format!(
                            "argument latent {arg_latent} uses variables the result type does not"
                        )));
                    }
                    self.plus(&arg_latent, &latent).lazify()
                } else {
                    self.default_vec()
                };
                let ty = CbnType::Arrow(Box::new(CbnArrow {
                    x: x.clone(),
                    attr,
                    arg,
                    arg_latent,
                    latent,
                    ret: jb.ty,
                }));
                Ok(CbnJudgment { effect, ty })
            }
            CbnTerm::App(f, a) => {
                let jf = self.synth(f)?;
                let CbnType::Arrow(ar) = &jf.ty else {
                    return Err(TypeError::NotAFunction(format!("{f} has type {}", jf.ty)));
                };
                let ja = self.synth(a)?;
                if !cbn_type_equal(&ja.ty, &ar.arg) {
                    return Err(mismatch("argument", &ar.arg, &ja.ty));
                }
                if ja.effect != ar.arg_latent {
                    return Err(TypeError::TypeMismatch(format!(
                        "argument has effect {}, function declares {}",
                        ja.effect, ar.arg_latent
                    )));
                }
                let mut effect = self.plus(&ar.latent, &jf.effect);
                if self.ext() {
                    effect = self.plus(&effect, &ja.effect.lazify());
                }
                Ok(CbnJudgment {
                    effect,
                    ty: ar.ret.downshift(&ar.x),
                })
            }
            CbnTerm::Let { x, bound, body } => {
                let j1 = self.synth(bound)?;
                self.push(x, j1.ty.clone(), j1.effect.clone());
                let j2 = self.synth(body);
                self.pop();
                let j2 = j2?;
                let mut effect = j2.effect.downshift(x);
                if self.ext() {
                    effect = self.plus(&j1.effect.lazify(), &effect);
                }
                Ok(CbnJudgment {
                    effect,
                    ty: j2.ty.downshift(x),
                })
            }
            CbnTerm::Sub { target, body } => {
                let target = self.in_scope_vec(target, "subsumption target")?;
                let j = self.synth(body)?;
                if !target.leq(&j.effect)? {
                    return Err(TypeError::SubsumptionNotBelow {
                        target: target.to_string(),
                        inferred: j.effect.to_string(),
                    });
                }
                Ok(CbnJudgment {
                    effect: target,
                    ty: j.ty,
                })
            }
            CbnTerm::Seq(a, b) => {
                let j1 = self.synth(a)?;
                if j1.ty != CbnType::Unit {
                    return Err(mismatch("sequenced term", &CbnType::Unit, &j1.ty));
                }
                let j2 = self.synth(b)?;
                Ok(CbnJudgment {
                    effect: self.plus(&j1.effect, &j2.effect),
                    ty: j2.ty,
                })
            }
            CbnTerm::Split {
                x1,
                x2,
                scrut,
                body,
            } => {
                let j1 = self.synth(scrut)?;
                let CbnType::Prod(t1, g1, t2, g2) = &j1.ty else {
                    return Err(TypeError::TypeMismatch(format!(
                        "split of non-product {}",
                        j1.ty
                    )));
                };
                self.push(x1, (**t1).clone(), g1.clone());
                self.push(x2, (**t2).clone(), g2.clone());
                let jb = self.synth(body);
                self.pop();
                self.pop();
                let jb = jb?;
                let effect = self.plus(&j1.effect, &jb.effect.downshift(x1).downshift(x2));
                Ok(CbnJudgment {
                    effect,
                    ty: jb.ty.downshift(x1).downshift(x2),
                })
            }
            CbnTerm::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => {
                let j1 = self.synth(scrut)?;
                let CbnType::Sum(t1, g1, t2, g2) = &j1.ty else {
                    return Err(TypeError::TypeMismatch(format!(
                        "case on non-sum {}",
                        j1.ty
                    )));
                };
                self.push(x1, (**t1).clone(), g1.clone());
                let jl = self.synth(left);
                self.pop();
                let jl = jl?;
                self.push(x2, (**t2).clone(), g2.clone());
                let jr = self.synth(right);
                self.pop();
                let jr = jr?;
                let (el, er) = (jl.effect.downshift(x1), jr.effect.downshift(x2));
                if el != er {
                    return Err(TypeError::BranchTypeMismatch(format!(
                        "branch effects {el} and {er} differ"
                    )));
                }
                let (tl, tr) = (jl.ty.downshift(x1), jr.ty.downshift(x2));
                if !cbn_type_equal(&tl, &tr) {
                    return Err(TypeError::BranchTypeMismatch(format!(
                        "branch types {tl} and {tr} differ"
                    )));
                }
                Ok(CbnJudgment {
                    effect: self.plus(&j1.effect, &el),
                    ty: tl,
                })
            }
        }
    }
}

/// Checks that a context is well scoped and, in extended mode, well formed.
pub fn cbn_check_ctx(ctx: &CbnCtx, mode: Mode) -> Result<(), TypeError> {
    let mut scope = Scope::new();
    for en in ctx.entries() {
        if scope.contains(&en.x) {
            return Err(TypeError::TypeMismatch(format!(
                "duplicate context entry {}",
                en.x
            )));
        }
        if !en.ty.legal_in(mode) || en.latent.mode() != mode {
            return Err(TypeError::Attr(crate::attrs::AttrError::IllegalAttribute));
        }
        let ms = en.ty.mentions();
        if let Some(y) = ms
            .iter()
            .chain(en.latent.support())
            .find(|y| !scope.contains(*y))
        {
            return Err(TypeError::ScopeEscape(format!(
                "entry {} mentions {y}",
                en.x
            )));
        }
        let latent = en.latent.restrict(&scope);
        let ty = en.ty.widen(&scope);
        if !cbn_wf_type(&latent, &ty, mode) {
            return Err(TypeError::IllFormedType(format!(
                "context entry {} : {ty}^{latent}",
                en.x
            )));
        }
        scope.insert(en.x.clone());
    }
    Ok(())
}

/// Synthesizes the unique judgment `Γ ⊢ e :^γ τ`.
pub fn cbn_synth(ctx: &CbnCtx, e: &CbnTerm, mode: Mode) -> Result<CbnJudgment, TypeError> {
    cbn_synth_with_lambdas(ctx, e, mode).map(|(j, _)| j)
}

/// Like [`cbn_synth`], also returning the argument attribute each lambda
/// in `e` received, keyed by its binder.
pub fn cbn_synth_with_lambdas(
    ctx: &CbnCtx,
    e: &CbnTerm,
    mode: Mode,
) -> Result<(CbnJudgment, BTreeMap<VarId, Attr>), TypeError> {
    cbn_check_ctx(ctx, mode)?;
    let mut ch = Checker {
        mode,
        ctx: Vec::new(),
        scope: Scope::new(),
        lambdas: BTreeMap::new(),
    };
    for en in ctx.entries() {
        let ty = en.ty.widen(&ch.scope);
        let latent = en.latent.restrict(&ch.scope);
        ch.push(&en.x, ty, latent);
    }
    let j = ch.synth(e)?;
    Ok((j, ch.lambdas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, Program};
    use crate::program::check_cbn_program;

    fn synth(src: &str) -> Result<(CbnCtx, CbnJudgment), TypeError> {
        let Program::Cbn(p) =
            parse_program(src, Some(crate::parse::Lang::Cbn), Mode::Base).unwrap()
        else {
            panic!("not a cbn program")
        };
        let c = check_cbn_program(&p).map_err(|e| match e {
            crate::program::ProgramError::Main(e) => e,
            other => panic!("{other}"),
        })?;
        Ok((c.ctx, c.main))
    }

    fn var(ctx: &CbnCtx, name: &str) -> VarId {
        ctx.entries()
            .iter()
            .find(|e| e.x.name() == name)
            .unwrap()
            .x
            .clone()
    }

    #[test]
    fn variable_releases_its_latent_effect() {
        let (ctx, j) = synth("var y : Bool = true\nvar x : Bool^{y:S} = y\nmain = x").unwrap();
        assert_eq!(j.effect.get(&var(&ctx, "x")), Attr::Strict);
        assert_eq!(j.effect.get(&var(&ctx, "y")), Attr::Strict);
    }

    #[test]
    fn argument_effect_must_equal_the_declared_one() {
        let src = "var y : Bool = true\nmain = (fn x : Bool^{y:S} . x) true";
        assert!(matches!(synth(src), Err(TypeError::TypeMismatch(_))));
        assert!(synth("var y : Bool = true\nmain = (fn x : Bool^{y:S} . x) y").is_ok());
    }

    #[test]
    fn case_branches_must_agree_on_effects() {
        let src = "var y : unit = ()\nvar b : Bool = true\nmain = if b then (y; ()) else ()";
        assert!(matches!(synth(src), Err(TypeError::BranchTypeMismatch(_))));
        let fixed = "var y : unit = ()\nvar b : Bool = true\nmain = if b then sub[{y:?}] (y; ()) else sub[{y:?}] ()";
        let (ctx, j) = synth(fixed).unwrap();
        assert_eq!(j.effect.get(&var(&ctx, "y")), Attr::Unknown);
        assert_eq!(j.effect.get(&var(&ctx, "b")), Attr::Strict);
    }

    #[test]
    fn subsumption_only_moves_down() {
        let src = "var y : unit = ()\nmain = sub[{y:S}] ()";
        assert!(matches!(
            synth(src),
            Err(TypeError::SubsumptionNotBelow { .. })
        ));
    }

    #[test]
    fn sub_at_the_synthesized_effect_is_an_identity() {
        let (_, plain) =
            synth("var y : unit = ()\nvar z : unit = ()\nmain = y; fn w : unit . z").unwrap();
        let (_, wrapped) =
            synth("var y : unit = ()\nvar z : unit = ()\nmain = sub[{y:S}] (y; fn w : unit . z)")
                .unwrap();
        assert_eq!(plain, wrapped);
    }

    #[test]
    fn constructors_are_lazy() {
        let (ctx, j) = synth("var y : unit = ()\nmain = inl[unit^{y:S} + unit] y").unwrap();
        assert!(j.effect.is_default());
        match &j.ty {
            CbnType::Sum(_, g, _, _) => assert_eq!(g.get(&var(&ctx, "y")), Attr::Strict),
            t => panic!("{t}"),
        }
    }

    #[test]
    fn arrows_are_equal_up_to_renaming_the_argument() {
        let (_, a) = synth("main = fn x : unit . fn y : unit . sub[{x:?, y:?}] x").unwrap();
        let (_, b) = synth("main = fn p : unit . fn q : unit . sub[{p:?, q:?}] q").unwrap();
        assert!(cbn_type_equal(&a.ty, &b.ty));
    }

    #[test]
    fn extended_mode_marks_unmentioned_variables_unused() {
        let src = "mode extended\nvar y : unit = ()\nvar z : unit = ()\nmain = fn w : unit . y";
        let (ctx, j) = synth(src).unwrap();
        assert_eq!(j.effect.get(&var(&ctx, "z")), Attr::Unused);
        assert_eq!(j.effect.get(&var(&ctx, "y")), Attr::Lazy);
        assert!(cbn_wf_type(&j.effect, &j.ty, Mode::Extended));
    }

    #[test]
    fn effects_are_scoped_over_the_context() {
        let (ctx, j) = synth("var y : unit = ()\nmain = let (a, b) = ((), y) in b").unwrap();
        assert_eq!(j.effect.scope(), &ctx.scope());
        assert!(j.ty.scoped_exactly(&ctx.scope()));
    }
}
