//! Call-by-push-value: types, terms, the checker and elaborated terms.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::attrs::{Attr, AttrError, AttrVec, Fresh, Mode, Scope, VarId};
use crate::cbn::{rename_vec, vec_agree};
use crate::error::TypeError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValType {
    Unit,
    U(AttrVec, Box<CompType>),
    Prod(Box<ValType>, Box<ValType>),
    Sum(Box<ValType>, Box<ValType>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompType {
    F(Box<ValType>),
    /// `A^α → B`; `B` never mentions the argument.
    Arrow(Box<ValType>, Attr, Box<CompType>),
}

impl ValType {
    pub fn u(g: AttrVec, b: CompType) -> ValType {
        ValType::U(g, Box::new(b))
    }

    pub fn prod(a: ValType, b: ValType) -> ValType {
        ValType::Prod(Box::new(a), Box::new(b))
    }

    pub fn sum(a: ValType, b: ValType) -> ValType {
        ValType::Sum(Box::new(a), Box::new(b))
    }

    pub fn widen(&self, scope: &Scope) -> ValType {
        match self {
            ValType::Unit => ValType::Unit,
            ValType::U(g, b) => ValType::u(g.restrict(scope), b.widen(scope)),
            ValType::Prod(a, b) => ValType::prod(a.widen(scope), b.widen(scope)),
            ValType::Sum(a, b) => ValType::sum(a.widen(scope), b.widen(scope)),
        }
    }

    pub fn downshift(&self, x: &VarId) -> ValType {
        match self {
            ValType::Unit => ValType::Unit,
            ValType::U(g, b) => ValType::u(g.downshift(x), b.downshift(x)),
            ValType::Prod(a, b) => ValType::prod(a.downshift(x), b.downshift(x)),
            ValType::Sum(a, b) => ValType::sum(a.downshift(x), b.downshift(x)),
        }
    }

    pub fn rename_map(&self, map: &HashMap<VarId, VarId>) -> ValType {
        match self {
            ValType::Unit => ValType::Unit,
            ValType::U(g, b) => ValType::u(rename_vec(g, map), b.rename_map(map)),
            ValType::Prod(a, b) => ValType::prod(a.rename_map(map), b.rename_map(map)),
            ValType::Sum(a, b) => ValType::sum(a.rename_map(map), b.rename_map(map)),
        }
    }

    pub fn mentions(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<VarId>) {
        match self {
            ValType::Unit => {}
            ValType::U(g, b) => {
                out.extend(g.support().cloned());
                b.collect(out);
            }
            ValType::Prod(a, b) | ValType::Sum(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn scoped_exactly(&self, scope: &Scope) -> bool {
        match self {
            ValType::Unit => true,
            ValType::U(g, b) => g.scope() == scope && b.scoped_exactly(scope),
            ValType::Prod(a, b) | ValType::Sum(a, b) => {
                a.scoped_exactly(scope) && b.scoped_exactly(scope)
            }
        }
    }

    pub fn legal_in(&self, mode: Mode) -> bool {
        match self {
            ValType::Unit => true,
            ValType::U(g, b) => g.mode() == mode && b.legal_in(mode),
            ValType::Prod(a, b) | ValType::Sum(a, b) => a.legal_in(mode) && b.legal_in(mode),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ValType::Unit => 1,
            ValType::U(_, b) => 1 + b.size(),
            ValType::Prod(a, b) | ValType::Sum(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub(crate) fn max_id(&self) -> u32 {
        match self {
            ValType::Unit => 0,
            ValType::U(g, b) => g
                .scope()
                .iter()
                .map(|x| x.id())
                .max()
                .unwrap_or(0)
                .max(b.max_id()),
            ValType::Prod(a, b) | ValType::Sum(a, b) => a.max_id().max(b.max_id()),
        }
    }
}

impl CompType {
    pub fn f(a: ValType) -> CompType {
        CompType::F(Box::new(a))
    }

    pub fn arrow(a: ValType, attr: Attr, b: CompType) -> CompType {
        CompType::Arrow(Box::new(a), attr, Box::new(b))
    }

    pub fn widen(&self, scope: &Scope) -> CompType {
        match self {
            CompType::F(a) => CompType::f(a.widen(scope)),
            CompType::Arrow(a, at, b) => CompType::arrow(a.widen(scope), *at, b.widen(scope)),
        }
    }

    pub fn downshift(&self, x: &VarId) -> CompType {
        match self {
            CompType::F(a) => CompType::f(a.downshift(x)),
            CompType::Arrow(a, at, b) => CompType::arrow(a.downshift(x), *at, b.downshift(x)),
        }
    }

    pub fn rename_map(&self, map: &HashMap<VarId, VarId>) -> CompType {
        match self {
            CompType::F(a) => CompType::f(a.rename_map(map)),
            CompType::Arrow(a, at, b) => CompType::arrow(a.rename_map(map), *at, b.rename_map(map)),
        }
    }

    fn collect(&self, out: &mut BTreeSet<VarId>) {
        match self {
            CompType::F(a) => a.collect(out),
            CompType::Arrow(a, _, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn mentions(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    pub fn scoped_exactly(&self, scope: &Scope) -> bool {
        match self {
            CompType::F(a) => a.scoped_exactly(scope),
            CompType::Arrow(a, _, b) => a.scoped_exactly(scope) && b.scoped_exactly(scope),
        }
    }

    pub fn legal_in(&self, mode: Mode) -> bool {
        match self {
            CompType::F(a) => a.legal_in(mode),
            CompType::Arrow(a, at, b) => at.legal_in(mode) && a.legal_in(mode) && b.legal_in(mode),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            CompType::F(a) => 1 + a.size(),
            CompType::Arrow(a, _, b) => 1 + a.size() + b.size(),
        }
    }

    pub(crate) fn max_id(&self) -> u32 {
        match self {
            CompType::F(a) => a.max_id(),
            CompType::Arrow(a, _, b) => a.max_id().max(b.max_id()),
        }
    }
}

/// Either kind of CBPV type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CbpvType {
    Val(ValType),
    Comp(CompType),
}

pub fn val_type_equal(a: &ValType, b: &ValType) -> bool {
    match (a, b) {
        (ValType::Unit, ValType::Unit) => true,
        (ValType::U(g, b1), ValType::U(h, b2)) => vec_agree(g, h) && comp_type_equal(b1, b2),
        (ValType::Prod(a1, a2), ValType::Prod(b1, b2))
        | (ValType::Sum(a1, a2), ValType::Sum(b1, b2)) => {
            val_type_equal(a1, b1) && val_type_equal(a2, b2)
        }
        _ => false,
    }
}

pub fn comp_type_equal(a: &CompType, b: &CompType) -> bool {
    match (a, b) {
        (CompType::F(a), CompType::F(b)) => val_type_equal(a, b),
        (CompType::Arrow(a1, p, b1), CompType::Arrow(a2, q, b2)) => {
            p == q && val_type_equal(a1, a2) && comp_type_equal(b1, b2)
        }
        _ => false,
    }
}

/// Structural equality with defaulted vectors.
pub fn cbpv_type_equal(a: &CbpvType, b: &CbpvType) -> bool {
    match (a, b) {
        (CbpvType::Val(a), CbpvType::Val(b)) => val_type_equal(a, b),
        (CbpvType::Comp(a), CbpvType::Comp(b)) => comp_type_equal(a, b),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Unit,
    Var(VarId),
    Thunk(Box<Comp>),
    Inl(Box<Value>, ValType),
    Inr(Box<Value>, ValType),
    Pair(Box<Value>, Box<Value>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Comp {
    Lam {
        x: VarId,
        arg: ValType,
        body: Box<Comp>,
    },
    App(Box<Comp>, Box<Value>),
    Force(Box<Value>),
    Let {
        x: VarId,
        bound: Box<Comp>,
        body: Box<Comp>,
    },
    Split {
        x1: VarId,
        x2: VarId,
        scrut: Box<Value>,
        body: Box<Comp>,
    },
    Sub {
        target: AttrVec,
        body: Box<Comp>,
    },
    Ret(Box<Value>),
    Seq(Box<Value>, Box<Comp>),
    Case {
        scrut: Box<Value>,
        x1: VarId,
        left: Box<Comp>,
        x2: VarId,
        right: Box<Comp>,
    },
}

impl Value {
    pub fn thunk(m: Comp) -> Value {
        Value::Thunk(Box::new(m))
    }

    pub fn size(&self) -> usize {
        match self {
            Value::Unit | Value::Var(_) => 1,
            Value::Thunk(m) => 1 + m.size(),
            Value::Inl(v, _) | Value::Inr(v, _) => 1 + v.size(),
            Value::Pair(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Value::Unit | Value::Var(_) => 1,
            Value::Thunk(m) => 1 + m.depth(),
            Value::Inl(v, _) | Value::Inr(v, _) => 1 + v.depth(),
            Value::Pair(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn form(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Var(_) => "var",
            Value::Thunk(_) => "thunk",
            Value::Inl(..) => "inl",
            Value::Inr(..) => "inr",
            Value::Pair(..) => "pair",
        }
    }

    pub fn max_var_id(&self) -> u32 {
        match self {
            Value::Unit => 0,
            Value::Var(x) => x.id(),
            Value::Thunk(m) => m.max_var_id(),
            Value::Inl(v, t) | Value::Inr(v, t) => v.max_var_id().max(t.max_id()),
            Value::Pair(a, b) => a.max_var_id().max(b.max_var_id()),
        }
    }

    pub fn rename_map(&self, map: &HashMap<VarId, VarId>) -> Value {
        match self {
            Value::Unit => Value::Unit,
            Value::Var(x) => Value::Var(map.get(x).cloned().unwrap_or_else(|| x.clone())),
            Value::Thunk(m) => Value::thunk(m.rename_map(map)),
            Value::Inl(v, t) => Value::Inl(Box::new(v.rename_map(map)), t.rename_map(map)),
            Value::Inr(v, t) => Value::Inr(Box::new(v.rename_map(map)), t.rename_map(map)),
            Value::Pair(a, b) => {
                Value::Pair(Box::new(a.rename_map(map)), Box::new(b.rename_map(map)))
            }
        }
    }
}

impl Comp {
    pub fn ret(v: Value) -> Comp {
        Comp::Ret(Box::new(v))
    }

    pub fn force(v: Value) -> Comp {
        Comp::Force(Box::new(v))
    }

    pub fn size(&self) -> usize {
        match self {
            Comp::Lam { body, .. } | Comp::Sub { body, .. } => 1 + body.size(),
            Comp::App(m, v) => 1 + m.size() + v.size(),
            Comp::Force(v) | Comp::Ret(v) => 1 + v.size(),
            Comp::Let { bound, body, .. } => 1 + bound.size() + body.size(),
            Comp::Split { scrut, body, .. } | Comp::Seq(scrut, body) => {
                1 + scrut.size() + body.size()
            }
            Comp::Case {
                scrut, left, right, ..
            } => 1 + scrut.size() + left.size() + right.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Comp::Lam { body, .. } | Comp::Sub { body, .. } => 1 + body.depth(),
            Comp::App(m, v) => 1 + m.depth().max(v.depth()),
            Comp::Force(v) | Comp::Ret(v) => 1 + v.depth(),
            Comp::Let { bound, body, .. } => 1 + bound.depth().max(body.depth()),
            Comp::Split { scrut, body, .. } | Comp::Seq(scrut, body) => {
                1 + scrut.depth().max(body.depth())
            }
            Comp::Case {
                scrut, left, right, ..
            } => 1 + scrut.depth().max(left.depth()).max(right.depth()),
        }
    }

    pub fn form(&self) -> &'static str {
        match self {
            Comp::Lam { .. } => "lam",
            Comp::App(..) => "app",
            Comp::Force(_) => "force",
            Comp::Let { .. } => "let",
            Comp::Split { .. } => "split",
            Comp::Sub { .. } => "sub",
            Comp::Ret(_) => "ret",
            Comp::Seq(..) => "seq",
            Comp::Case { .. } => "case",
        }
    }

    /// Visits every value and computation node, outermost first.
    pub fn for_each_node(&self, fc: &mut impl FnMut(&Comp), fv: &mut impl FnMut(&Value)) {
        fn val(v: &Value, fc: &mut impl FnMut(&Comp), fv: &mut impl FnMut(&Value)) {
            fv(v);
            match v {
                Value::Unit | Value::Var(_) => {}
                Value::Thunk(m) => m.for_each_node(fc, fv),
                Value::Inl(v, _) | Value::Inr(v, _) => val(v, fc, fv),
                Value::Pair(a, b) => {
                    val(a, fc, fv);
                    val(b, fc, fv)
                }
            }
        }
        fc(self);
        match self {
            Comp::Lam { body, .. } | Comp::Sub { body, .. } => body.for_each_node(fc, fv),
            Comp::App(m, v) => {
                m.for_each_node(fc, fv);
                val(v, fc, fv)
            }
            Comp::Force(v) | Comp::Ret(v) => val(v, fc, fv),
            Comp::Let { bound, body, .. } => {
                bound.for_each_node(fc, fv);
                body.for_each_node(fc, fv)
            }
            Comp::Split { scrut, body, .. } | Comp::Seq(scrut, body) => {
                val(scrut, fc, fv);
                body.for_each_node(fc, fv)
            }
            Comp::Case {
                scrut, left, right, ..
            } => {
                val(scrut, fc, fv);
                left.for_each_node(fc, fv);
                right.for_each_node(fc, fv)
            }
        }
    }

    pub fn max_var_id(&self) -> u32 {
        let mut m = 0u32;
        let mut vids = 0u32;
        self.for_each_node(
            &mut |c| {
                let ids = match c {
                    Comp::Lam { x, arg, .. } => x.id().max(arg.max_id()),
                    Comp::Let { x, .. } => x.id(),
                    Comp::Split { x1, x2, .. } | Comp::Case { x1, x2, .. } => x1.id().max(x2.id()),
                    Comp::Sub { target, .. } => {
                        target.scope().iter().map(|y| y.id()).max().unwrap_or(0)
                    }
                    _ => 0,
                };
                m = m.max(ids);
            },
            &mut |v| {
                let ids = match v {
                    Value::Var(x) => x.id(),
                    Value::Inl(_, t) | Value::Inr(_, t) => t.max_id(),
                    _ => 0,
                };
                vids = vids.max(ids);
            },
        );
        m.max(vids)
    }

    pub fn rename_map(&self, map: &HashMap<VarId, VarId>) -> Comp {
        let b = |m: &Comp| Box::new(m.rename_map(map));
        let bv = |v: &Value| Box::new(v.rename_map(map));
        let r = |x: &VarId| map.get(x).cloned().unwrap_or_else(|| x.clone());
        match self {
            Comp::Lam { x, arg, body } => Comp::Lam {
                x: r(x),
                arg: arg.rename_map(map),
                body: b(body),
            },
            Comp::App(m, v) => Comp::App(b(m), bv(v)),
            Comp::Force(v) => Comp::Force(bv(v)),
            Comp::Ret(v) => Comp::Ret(bv(v)),
            Comp::Let { x, bound, body } => Comp::Let {
                x: r(x),
                bound: b(bound),
                body: b(body),
            },
            Comp::Split {
                x1,
                x2,
                scrut,
                body,
            } => Comp::Split {
                x1: r(x1),
                x2: r(x2),
                scrut: bv(scrut),
                body: b(body),
            },
            Comp::Sub { target, body } => Comp::Sub {
                target: rename_vec(target, map),
                body: b(body),
            },
            Comp::Seq(v, m) => Comp::Seq(bv(v), b(m)),
            Comp::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => Comp::Case {
                scrut: bv(scrut),
                x1: r(x1),
                left: b(left),
                x2: r(x2),
                right: b(right),
            },
        }
    }

    /// Copies the term giving every binder a fresh id.
    pub fn freshen(&self, fresh: &mut Fresh) -> Comp {
        let mut map = HashMap::new();
        self.for_each_node(
            &mut |c| match c {
                Comp::Lam { x, .. } | Comp::Let { x, .. } => {
                    map.insert(x.clone(), fresh.fresh(x.name()));
                }
                Comp::Split { x1, x2, .. } | Comp::Case { x1, x2, .. } => {
                    map.insert(x1.clone(), fresh.fresh(x1.name()));
                    map.insert(x2.clone(), fresh.fresh(x2.name()));
                }
                _ => {}
            },
            &mut |_| {},
        );
        self.rename_map(&map)
    }
}

/// Elaborated values: thunks carry the vector their body was checked at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElabValue {
    Unit,
    Var(VarId),
    Thunk { gamma: AttrVec, body: Arc<ElabComp> },
    Inl(Box<ElabValue>, ValType),
    Inr(Box<ElabValue>, ValType),
    Pair(Box<ElabValue>, Box<ElabValue>),
}

/// Elaborated computations: abstractions carry their own effect and the
/// argument attribute; subsumptions keep target and inferred vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElabComp {
    Lam {
        x: VarId,
        arg: ValType,
        gamma: AttrVec,
        attr: Attr,
        body: Arc<ElabComp>,
    },
    App(Box<ElabComp>, Box<ElabValue>),
    Force(Box<ElabValue>),
    Let {
        x: VarId,
        bound: Box<ElabComp>,
        body: Box<ElabComp>,
    },
    Split {
        x1: VarId,
        x2: VarId,
        scrut: Box<ElabValue>,
        body: Box<ElabComp>,
    },
    Sub {
        target: AttrVec,
        inferred: AttrVec,
        body: Box<ElabComp>,
    },
    Ret(Box<ElabValue>),
    Seq(Box<ElabValue>, Box<ElabComp>),
    Case {
        scrut: Box<ElabValue>,
        x1: VarId,
        left: Box<ElabComp>,
        x2: VarId,
        right: Box<ElabComp>,
    },
}

impl ElabValue {
    pub fn erase(&self) -> Value {
        match self {
            ElabValue::Unit => Value::Unit,
            ElabValue::Var(x) => Value::Var(x.clone()),
            ElabValue::Thunk { body, .. } => Value::thunk(body.erase()),
            ElabValue::Inl(v, t) => Value::Inl(Box::new(v.erase()), t.clone()),
            ElabValue::Inr(v, t) => Value::Inr(Box::new(v.erase()), t.clone()),
            ElabValue::Pair(a, b) => Value::Pair(Box::new(a.erase()), Box::new(b.erase())),
        }
    }

    /// Wraps an unchecked value; every stored vector is a placeholder that
    /// only the attribute-erased evaluator may consume.
    pub fn unchecked(v: &Value, mode: Mode) -> ElabValue {
        match v {
            Value::Unit => ElabValue::Unit,
            Value::Var(x) => ElabValue::Var(x.clone()),
            Value::Thunk(m) => ElabValue::Thunk {
                gamma: AttrVec::default_over(mode, Scope::new()),
                body: Arc::new(ElabComp::unchecked(m, mode)),
            },
            Value::Inl(v, t) => ElabValue::Inl(Box::new(ElabValue::unchecked(v, mode)), t.clone()),
            Value::Inr(v, t) => ElabValue::Inr(Box::new(ElabValue::unchecked(v, mode)), t.clone()),
            Value::Pair(a, b) => ElabValue::Pair(
                Box::new(ElabValue::unchecked(a, mode)),
                Box::new(ElabValue::unchecked(b, mode)),
            ),
        }
    }
}

impl ElabComp {
    pub fn erase(&self) -> Comp {
        match self {
            ElabComp::Lam { x, arg, body, .. } => Comp::Lam {
                x: x.clone(),
                arg: arg.clone(),
                body: Box::new(body.erase()),
            },
            ElabComp::App(m, v) => Comp::App(Box::new(m.erase()), Box::new(v.erase())),
            ElabComp::Force(v) => Comp::Force(Box::new(v.erase())),
            ElabComp::Ret(v) => Comp::Ret(Box::new(v.erase())),
            ElabComp::Let { x, bound, body } => Comp::Let {
                x: x.clone(),
                bound: Box::new(bound.erase()),
                body: Box::new(body.erase()),
            },
            ElabComp::Split {
                x1,
                x2,
                scrut,
                body,
            } => Comp::Split {
                x1: x1.clone(),
                x2: x2.clone(),
                scrut: Box::new(scrut.erase()),
                body: Box::new(body.erase()),
            },
            ElabComp::Sub { target, body, .. } => Comp::Sub {
                target: target.clone(),
                body: Box::new(body.erase()),
            },
            ElabComp::Seq(v, m) => Comp::Seq(Box::new(v.erase()), Box::new(m.erase())),
            ElabComp::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => Comp::Case {
                scrut: Box::new(scrut.erase()),
                x1: x1.clone(),
                left: Box::new(left.erase()),
                x2: x2.clone(),
                right: Box::new(right.erase()),
            },
        }
    }

    pub fn unchecked(m: &Comp, mode: Mode) -> ElabComp {
        let blank = || AttrVec::default_over(mode, Scope::new());
        let c = |m: &Comp| Box::new(ElabComp::unchecked(m, mode));
        let v = |v: &Value| Box::new(ElabValue::unchecked(v, mode));
        match m {
            Comp::Lam { x, arg, body } => ElabComp::Lam {
                x: x.clone(),
                arg: arg.clone(),
                gamma: blank(),
                attr: mode.default_attr(),
                body: Arc::new(ElabComp::unchecked(body, mode)),
            },
            Comp::App(m, a) => ElabComp::App(c(m), v(a)),
            Comp::Force(a) => ElabComp::Force(v(a)),
            Comp::Ret(a) => ElabComp::Ret(v(a)),
            Comp::Let { x, bound, body } => ElabComp::Let {
                x: x.clone(),
                bound: c(bound),
                body: c(body),
            },
            Comp::Split {
                x1,
                x2,
                scrut,
                body,
            } => ElabComp::Split {
                x1: x1.clone(),
                x2: x2.clone(),
                scrut: v(scrut),
                body: c(body),
            },
            Comp::Sub { target, body } => ElabComp::Sub {
                target: target.clone(),
                inferred: target.clone(),
                body: c(body),
            },
            Comp::Seq(a, m) => ElabComp::Seq(v(a), c(m)),
            Comp::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => ElabComp::Case {
                scrut: v(scrut),
                x1: x1.clone(),
                left: c(left),
                x2: x2.clone(),
                right: c(right),
            },
        }
    }
}

/// Equality of term skeletons, ignoring every stored vector, attribute and
/// annotation type.
pub fn comp_shape_eq(a: &ElabComp, b: &ElabComp) -> bool {
    use ElabComp as C;
    match (a, b) {
        (C::Lam { x, body, .. }, C::Lam { x: y, body: c, .. }) => x == y && comp_shape_eq(body, c),
        (C::App(m, v), C::App(n, w)) => comp_shape_eq(m, n) && value_shape_eq(v, w),
        (C::Force(v), C::Force(w)) | (C::Ret(v), C::Ret(w)) => value_shape_eq(v, w),
        (
            C::Let { x, bound, body },
            C::Let {
                x: y,
                bound: b2,
                body: c2,
            },
        ) => x == y && comp_shape_eq(bound, b2) && comp_shape_eq(body, c2),
        (
            C::Split {
                x1,
                x2,
                scrut,
                body,
            },
            C::Split {
                x1: y1,
                x2: y2,
                scrut: s2,
                body: c2,
            },
        ) => x1 == y1 && x2 == y2 && value_shape_eq(scrut, s2) && comp_shape_eq(body, c2),
        (C::Sub { body, .. }, C::Sub { body: c, .. }) => comp_shape_eq(body, c),
        (C::Seq(v, m), C::Seq(w, n)) => value_shape_eq(v, w) && comp_shape_eq(m, n),
        (
            C::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            },
            C::Case {
                scrut: s2,
                x1: y1,
                left: l2,
                x2: y2,
                right: r2,
            },
        ) => {
            x1 == y1
                && x2 == y2
                && value_shape_eq(scrut, s2)
                && comp_shape_eq(left, l2)
                && comp_shape_eq(right, r2)
        }
        _ => false,
    }
}

pub fn value_shape_eq(a: &ElabValue, b: &ElabValue) -> bool {
    use ElabValue as V;
    match (a, b) {
        (V::Unit, V::Unit) => true,
        (V::Var(x), V::Var(y)) => x == y,
        (V::Thunk { body, .. }, V::Thunk { body: c, .. }) => comp_shape_eq(body, c),
        (V::Inl(v, _), V::Inl(w, _)) | (V::Inr(v, _), V::Inr(w, _)) => value_shape_eq(v, w),
        (V::Pair(a1, a2), V::Pair(b1, b2)) => value_shape_eq(a1, b1) && value_shape_eq(a2, b2),
        _ => false,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CbpvCtx {
    entries: Vec<(VarId, ValType)>,
}

impl CbpvCtx {
    pub fn new() -> CbpvCtx {
        CbpvCtx::default()
    }

    pub fn push(&mut self, x: VarId, a: ValType) {
        self.entries.push((x, a));
    }

    pub fn entries(&self) -> &[(VarId, ValType)] {
        &self.entries
    }

    pub fn scope(&self) -> Scope {
        self.entries.iter().map(|(x, _)| x.clone()).collect()
    }

    pub fn lookup(&self, x: &VarId) -> Option<&ValType> {
        self.entries
            .iter()
            .rev()
            .find(|(y, _)| y == x)
            .map(|(_, a)| a)
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
            .map(|(x, a)| x.id().max(a.max_id()))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueJudgment {
    pub effect: AttrVec,
    pub ty: ValType,
    pub elab: ElabValue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompJudgment {
    pub effect: AttrVec,
    pub ty: CompType,
    pub elab: ElabComp,
}

struct Checker {
    mode: Mode,
    ctx: Vec<(VarId, ValType)>,
    scope: Scope,
}

impl Checker {
    fn new(ctx: &CbpvCtx, mode: Mode) -> Result<Checker, TypeError> {
        let mut ch = Checker {
            mode,
            ctx: Vec::new(),
            scope: Scope::new(),
        };
        for (x, a) in ctx.entries() {
            if ch.scope.contains(x) {
                return Err(TypeError::TypeMismatch(format!(
                    "duplicate context entry {x}"
                )));
            }
            let a = ch.in_scope(a, "context entry type")?;
            ch.push(x, a);
        }
        Ok(ch)
    }

    fn default_vec(&self) -> AttrVec {
        AttrVec::default_over(self.mode, self.scope.clone())
    }

    fn push(&mut self, x: &VarId, a: ValType) {
        self.scope.insert(x.clone());
        self.ctx.push((x.clone(), a));
    }

    fn pop(&mut self) {
        let (x, _) = self.ctx.pop().expect("balanced push/pop");
        self.scope.remove(&x);
    }

    fn plus(&self, a: &AttrVec, b: &AttrVec) -> AttrVec {
        a.plus(b).expect("judgment vectors share the context scope")
    }

    fn in_scope(&self, a: &ValType, what: &str) -> Result<ValType, TypeError> {
        if !a.legal_in(self.mode) {
            return Err(TypeError::Attr(AttrError::IllegalAttribute));
        }
        if let Some(x) = a.mentions().into_iter().find(|x| !self.scope.contains(x)) {
            return Err(TypeError::ScopeEscape(format!(
                "{what} mentions {x}, which is not in scope"
            )));
        }
        Ok(a.widen(&self.scope))
    }

    fn check_scoped(
        &self,
        effect: &AttrVec,
        ok: bool,
        what: &dyn std::fmt::Display,
    ) -> Result<(), TypeError> {
        if effect.scope() != &self.scope || !ok {
            return Err(TypeError::ScopeEscape(format!(
                "judgment for {what} is not scoped over the context"
            )));
        }
        Ok(())
    }

    fn value(&mut self, v: &Value) -> Result<ValueJudgment, TypeError> {
        let j = self.value_node(v)?;
        self.check_scoped(&j.effect, j.ty.scoped_exactly(&self.scope), v)?;
        Ok(j)
    }

    fn comp(&mut self, m: &Comp) -> Result<CompJudgment, TypeError> {
        let j = self.comp_node(m)?;
        self.check_scoped(&j.effect, j.ty.scoped_exactly(&self.scope), m)?;
        Ok(j)
    }

    fn value_node(&mut self, v: &Value) -> Result<ValueJudgment, TypeError> {
        match v {
            Value::Unit => Ok(ValueJudgment {
                effect: self.default_vec(),
                ty: ValType::Unit,
                elab: ElabValue::Unit,
            }),
            Value::Var(x) => {
                let a = self
                    .ctx
                    .iter()
                    .rev()
                    .find(|(y, _)| y == x)
                    .map(|(_, a)| a.widen(&self.scope))
                    .ok_or_else(|| TypeError::UnboundVariable(x.to_string()))?;
                let effect = AttrVec::single(self.mode, self.scope.clone(), x, Attr::Strict);
                Ok(ValueJudgment {
                    effect,
                    ty: a,
                    elab: ElabValue::Var(x.clone()),
                })
            }
            Value::Thunk(m) => {
                let jm = self.comp(m)?;
                let effect = match self.mode {
                    Mode::Base => self.default_vec(),
                    Mode::Extended => jm.effect.lazify(),
                };
                Ok(ValueJudgment {
                    effect,
                    ty: ValType::u(jm.effect.clone(), jm.ty),
                    elab: ElabValue::Thunk {
                        gamma: jm.effect,
                        body: Arc::new(jm.elab),
                    },
                })
            }
            Value::Inl(w, annot) | Value::Inr(w, annot) => {
                let left = matches!(v, Value::Inl(..));
                let annot = self.in_scope(annot, "injection annotation")?;
                let ValType::Sum(a1, a2) = &annot else {
                    return Err(TypeError::TypeMismatch(format!(
                        "injection annotated with non-sum {annot}"
                    )));
                };
                let expect = if left { a1 } else { a2 };
                let jw = self.value(w)?;
                if !val_type_equal(&jw.ty, expect) {
                    return Err(TypeError::TypeMismatch(format!(
                        "injected value: expected {expect}, found {}",
                        jw.ty
                    )));
                }
                let elab = if left {
                    ElabValue::Inl(Box::new(jw.elab), annot.clone())
                } else {
                    ElabValue::Inr(Box::new(jw.elab), annot.clone())
                };
                Ok(ValueJudgment {
                    effect: jw.effect,
                    ty: annot,
                    elab,
                })
            }
            Value::Pair(a, b) => {
                let ja = self.value(a)?;
                let jb = self.value(b)?;
                Ok(ValueJudgment {
                    effect: self.plus(&ja.effect, &jb.effect),
                    ty: ValType::prod(ja.ty, jb.ty),
                    elab: ElabValue::Pair(Box::new(ja.elab), Box::new(jb.elab)),
                })
            }
        }
    }

    fn comp_node(&mut self, m: &Comp) -> Result<CompJudgment, TypeError> {
        match m {
            Comp::Ret(v) => {
                let jv = self.value(v)?;
                Ok(CompJudgment {
                    effect: jv.effect,
                    ty: CompType::f(jv.ty),
                    elab: ElabComp::Ret(Box::new(jv.elab)),
                })
            }
            Comp::Force(v) => {
                let jv = self.value(v)?;
                let ValType::U(g, b) = &jv.ty else {
                    return Err(TypeError::NotAThunk(format!("{v} has type {}", jv.ty)));
                };
                Ok(CompJudgment {
                    effect: self.plus(&jv.effect, g),
                    ty: (**b).clone(),
                    elab: ElabComp::Force(Box::new(jv.elab)),
                })
            }
            Comp::Lam { x, arg, body } => {
                let arg = self.in_scope(arg, "argument type")?;
                self.push(x, arg.clone());
                let jb = self.comp(body);
                self.pop();
                let jb = jb?;
                let attr = jb.effect.get(x);
                let gamma = jb.effect.downshift(x);
                Ok(CompJudgment {
                    effect: gamma.clone(),
                    ty: CompType::arrow(arg.clone(), attr, jb.ty.downshift(x)),
                    elab: ElabComp::Lam {
                        x: x.clone(),
                        arg,
                        gamma,
                        attr,
                        body: Arc::new(jb.elab),
                    },
                })
            }
            Comp::App(f, v) => {
                let jf = self.comp(f)?;
                let CompType::Arrow(a, _, b) = &jf.ty else {
                    return Err(TypeError::NotAFunction(format!("{f} has type {}", jf.ty)));
                };
                let jv = self.value(v)?;
                if !val_type_equal(&jv.ty, a) {
                    return Err(TypeError::TypeMismatch(format!(
                        "argument: expected {a}, found {}",
                        jv.ty
                    )));
                }
                Ok(CompJudgment {
                    effect: self.plus(&jf.effect, &jv.effect),
                    ty: (**b).clone(),
                    elab: ElabComp::App(Box::new(jf.elab), Box::new(jv.elab)),
                })
            }
            Comp::Let { x, bound, body } => {
                let j1 = self.comp(bound)?;
                let CompType::F(a) = &j1.ty else {
                    return Err(TypeError::NotAReturner(format!(
                        "{bound} has type {}",
                        j1.ty
                    )));
                };
                self.push(x, (**a).clone());
                let j2 = self.comp(body);
                self.pop();
                let j2 = j2?;
                Ok(CompJudgment {
                    effect: self.plus(&j1.effect, &j2.effect.downshift(x)),
                    ty: j2.ty.downshift(x),
                    elab: ElabComp::Let {
                        x: x.clone(),
                        bound: Box::new(j1.elab),
                        body: Box::new(j2.elab),
                    },
                })
            }
            Comp::Split {
                x1,
                x2,
                scrut,
                body,
            } => {
                let jv = self.value(scrut)?;
                let ValType::Prod(a1, a2) = &jv.ty else {
                    return Err(TypeError::TypeMismatch(format!(
                        "split of non-product {}",
                        jv.ty
                    )));
                };
                self.push(x1, (**a1).clone());
                self.push(x2, (**a2).clone());
                let jb = self.comp(body);
                self.pop();
                self.pop();
                let jb = jb?;
                Ok(CompJudgment {
                    effect: self.plus(&jv.effect, &jb.effect.downshift(x1).downshift(x2)),
                    ty: jb.ty.downshift(x1).downshift(x2),
                    elab: ElabComp::Split {
                        x1: x1.clone(),
                        x2: x2.clone(),
                        scrut: Box::new(jv.elab),
                        body: Box::new(jb.elab),
                    },
                })
            }
            Comp::Sub { target, body } => {
                if target.mode() != self.mode {
                    return Err(TypeError::Attr(AttrError::IllegalAttribute));
                }
                if let Some(x) = target.support().find(|x| !self.scope.contains(*x)) {
                    return Err(TypeError::ScopeEscape(format!(
                        "subsumption target mentions {x}"
                    )));
                }
                let target = target.restrict(&self.scope);
                let jb = self.comp(body)?;
                if !target.leq(&jb.effect)? {
                    return Err(TypeError::SubsumptionNotBelow {
                        target: target.to_string(),
                        inferred: jb.effect.to_string(),
                    });
                }
                Ok(CompJudgment {
                    effect: target.clone(),
                    ty: jb.ty,
                    elab: ElabComp::Sub {
                        target,
                        inferred: jb.effect,
                        body: Box::new(jb.elab),
                    },
                })
            }
            Comp::Seq(v, body) => {
                let jv = self.value(v)?;
                if jv.ty != ValType::Unit {
                    return Err(TypeError::TypeMismatch(format!(
                        "sequenced value has type {}",
                        jv.ty
                    )));
                }
                let jb = self.comp(body)?;
                Ok(CompJudgment {
                    effect: self.plus(&jv.effect, &jb.effect),
                    ty: jb.ty,
                    elab: ElabComp::Seq(Box::new(jv.elab), Box::new(jb.elab)),
                })
            }
            Comp::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => {
                let jv = self.value(scrut)?;
                let ValType::Sum(a1, a2) = &jv.ty else {
                    return Err(TypeError::TypeMismatch(format!(
                        "case on non-sum {}",
                        jv.ty
                    )));
                };
                self.push(x1, (**a1).clone());
                let jl = self.comp(left);
                self.pop();
                let jl = jl?;
                self.push(x2, (**a2).clone());
                let jr = self.comp(right);
                self.pop();
                let jr = jr?;
                let (el, er) = (jl.effect.downshift(x1), jr.effect.downshift(x2));
                if el != er {
                    return Err(TypeError::BranchTypeMismatch(format!(
                        "branch effects {el} and {er} differ"
                    )));
                }
                let (tl, tr) = (jl.ty.downshift(x1), jr.ty.downshift(x2));
                if !comp_type_equal(&tl, &tr) {
                    return Err(TypeError::BranchTypeMismatch(format!(
                        "branch types {tl} and {tr} differ"
                    )));
                }
                Ok(CompJudgment {
                    effect: self.plus(&jv.effect, &el),
                    ty: tl,
                    elab: ElabComp::Case {
                        scrut: Box::new(jv.elab),
                        x1: x1.clone(),
                        left: Box::new(jl.elab),
                        x2: x2.clone(),
                        right: Box::new(jr.elab),
                    },
                })
            }
        }
    }
}

pub fn cbpv_synth_value(ctx: &CbpvCtx, v: &Value, mode: Mode) -> Result<ValueJudgment, TypeError> {
    Checker::new(ctx, mode)?.value(v)
}

pub fn cbpv_synth_comp(ctx: &CbpvCtx, m: &Comp, mode: Mode) -> Result<CompJudgment, TypeError> {
    Checker::new(ctx, mode)?.comp(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_program, Lang, Program};
    use crate::program::{check_cbpv_program, ProgramError};

    fn synth(src: &str, mode: Mode) -> Result<(CbpvCtx, CompJudgment), TypeError> {
        let Program::Cbpv(p) = parse_program(src, Some(Lang::Cbpv), mode).unwrap() else {
            panic!("not a cbpv program")
        };
        let c = check_cbpv_program(&p).map_err(|e| match e {
            ProgramError::Main(e) => e,
            other => panic!("{other}"),
        })?;
        Ok((c.ctx, c.main))
    }

    fn var(ctx: &CbpvCtx, name: &str) -> VarId {
        ctx.entries()
            .iter()
            .find(|(x, _)| x.name() == name)
            .unwrap()
            .0
            .clone()
    }

    #[test]
    fn thunking_moves_a_strict_use_into_the_type() {
        let decl = "var x : U[{}] F unit = thunk { ret () }\n";
        let (ctx, direct) = synth(&format!("{decl}main = ret x"), Mode::Base).unwrap();
        let (_, wrapped) =
            synth(&format!("{decl}main = ret thunk {{ force x }}"), Mode::Base).unwrap();
        let x = var(&ctx, "x");
        assert_eq!(direct.effect.get(&x), Attr::Strict);
        assert_eq!(wrapped.effect.get(&x), Attr::Lazy);
        match &wrapped.ty {
            CompType::F(a) => match &**a {
                ValType::U(g, _) => assert_eq!(g.get(&x), Attr::Strict),
                t => panic!("{t}"),
            },
            t => panic!("{t}"),
        }
    }

    #[test]
    fn force_adds_the_thunk_latent_effect() {
        let src =
            "var y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nmain = force t";
        let (ctx, j) = synth(src, Mode::Base).unwrap();
        assert_eq!(j.effect.get(&var(&ctx, "t")), Attr::Strict);
        assert_eq!(j.effect.get(&var(&ctx, "y")), Attr::Strict);
    }

    #[test]
    fn lambda_passes_body_effects_through() {
        let (ctx, j) = synth("var y : unit = ()\nmain = fn x : unit . ret y", Mode::Base).unwrap();
        assert_eq!(j.effect.get(&var(&ctx, "y")), Attr::Strict);
        assert_eq!(j.ty.to_string(), "unit ^L -> F unit");
    }

    #[test]
    fn let_forgets_its_binder_in_the_result_type() {
        let src = "var y : unit = ()\nmain = x <- ret () in ret thunk { x; ret y }";
        let (ctx, j) = synth(src, Mode::Base).unwrap();
        assert!(j.ty.scoped_exactly(&ctx.scope()));
        assert_eq!(j.ty.to_string(), "F U[{y:S}] F unit");
    }

    #[test]
    fn application_requires_a_function() {
        assert!(matches!(
            synth("main = (ret ()) ()", Mode::Base),
            Err(TypeError::NotAFunction(_))
        ));
        assert!(matches!(
            synth("main = force ()", Mode::Base),
            Err(TypeError::NotAThunk(_))
        ));
    }

    #[test]
    fn extended_thunks_lazify_their_body() {
        let src =
            "mode extended\nvar y : unit = ()\nvar z : unit = ()\nmain = ret thunk { y; ret () }";
        let (ctx, j) = synth(src, Mode::Extended).unwrap();
        assert_eq!(j.effect.get(&var(&ctx, "y")), Attr::Lazy);
        assert_eq!(j.effect.get(&var(&ctx, "z")), Attr::Unused);
    }

    #[test]
    fn elaboration_records_thunk_effects() {
        let (_, j) = synth(
            "var y : unit = ()\nmain = ret thunk { y; ret () }",
            Mode::Base,
        )
        .unwrap();
        let ElabComp::Ret(v) = &j.elab else {
            panic!("{:?}", j.elab)
        };
        assert!(matches!(&**v, ElabValue::Thunk { gamma, .. } if !gamma.is_default()));
        assert_eq!(j.elab.erase().to_string(), "ret thunk { y; ret () }");
    }
}
