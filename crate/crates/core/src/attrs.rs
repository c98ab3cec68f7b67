//! Strictness attributes, attribute vectors and their algebra.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttrError {
    #[error("attribute U is only legal in extended mode")]
    IllegalAttribute,
    #[error("vector scopes differ: {0} vs {1}")]
    ScopeMismatch(String, String),
}

/// Checking/evaluation mode. `Extended` adds the `U` attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Base,
    Extended,
}

impl Mode {
    pub fn default_attr(self) -> Attr {
        match self {
            Mode::Base => Attr::Lazy,
            Mode::Extended => Attr::Unused,
        }
    }

    /// Attributes legal in this mode, in a fixed order.
    pub fn attrs(self) -> &'static [Attr] {
        match self {
            Mode::Base => &[Attr::Strict, Attr::Lazy, Attr::Unknown],
            Mode::Extended => &[Attr::Strict, Attr::Lazy, Attr::Unknown, Attr::Unused],
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "base" => Some(Mode::Base),
            "extended" | "ext" => Some(Mode::Extended),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Extended => "extended",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attr {
    Strict,
    Lazy,
    Unknown,
    Unused,
}

impl Attr {
    pub fn symbol(self) -> &'static str {
        match self {
            Attr::Strict => "S",
            Attr::Lazy => "L",
            Attr::Unknown => "?",
            Attr::Unused => "U",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Attr> {
        match s {
            "S" => Some(Attr::Strict),
            "L" => Some(Attr::Lazy),
            "?" => Some(Attr::Unknown),
            "U" => Some(Attr::Unused),
            _ => None,
        }
    }

    pub fn legal_in(self, mode: Mode) -> bool {
        self != Attr::Unused || mode == Mode::Extended
    }

    fn plus_unchecked(self, other: Attr) -> Attr {
        use Attr::*;
        match (self, other) {
            (Unused, a) | (a, Unused) => a,
            (Strict, _) | (_, Strict) => Strict,
            (Unknown, _) | (_, Unknown) => Unknown,
            (Lazy, Lazy) => Lazy,
        }
    }

    fn leq_unchecked(self, other: Attr) -> bool {
        use Attr::*;
        // `?` is the bottom; `L <= U` is the only other edge.
        self == other || self == Unknown || (self == Lazy && other == Unused)
    }

    fn lazify_unchecked(self) -> Attr {
        match self {
            Attr::Unused => Attr::Unused,
            _ => Attr::Lazy,
        }
    }

    /// Greatest lower bound in the information order. Always exists since
    /// `?` is below everything.
    pub fn meet(self, other: Attr) -> Attr {
        if self.leq_unchecked(other) {
            self
        } else if other.leq_unchecked(self) {
            other
        } else {
            Attr::Unknown
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn legal(a: Attr, mode: Mode) -> Result<(), AttrError> {
    if a.legal_in(mode) {
        Ok(())
    } else {
        Err(AttrError::IllegalAttribute)
    }
}

pub fn attr_plus(a: Attr, b: Attr, mode: Mode) -> Result<Attr, AttrError> {
    legal(a, mode)?;
    legal(b, mode)?;
    Ok(a.plus_unchecked(b))
}

pub fn attr_leq(a: Attr, b: Attr, mode: Mode) -> Result<bool, AttrError> {
    legal(a, mode)?;
    legal(b, mode)?;
    Ok(a.leq_unchecked(b))
}

pub fn attr_lazify(a: Attr, mode: Mode) -> Attr {
    match mode {
        Mode::Base => Attr::Lazy,
        Mode::Extended => a.lazify_unchecked(),
    }
}

/// A variable. Identity is the numeric id; the name is only a printing hint.
#[derive(Clone)]
pub struct VarId {
    id: u32,
    name: Arc<str>,
}

impl VarId {
    pub fn new(id: u32, name: &str) -> VarId {
        VarId {
            id,
            name: Arc::from(name),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl PartialEq for VarId {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for VarId {}

impl std::hash::Hash for VarId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl PartialOrd for VarId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VarId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Debug for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.name, self.id)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Deterministic supply of fresh variables.
#[derive(Debug, Clone, Default)]
pub struct Fresh {
    next: u32,
}

impl Fresh {
    pub fn new() -> Fresh {
        Fresh { next: 0 }
    }

    /// A supply that never hands out ids at or below `max`.
    pub fn above(max: u32) -> Fresh {
        Fresh { next: max + 1 }
    }

    pub fn fresh(&mut self, hint: &str) -> VarId {
        let v = VarId::new(self.next, hint);
        self.next += 1;
        v
    }

    pub fn peek(&self) -> u32 {
        self.next
    }
}

pub type Scope = BTreeSet<VarId>;

/// A scoped attribute vector. Entries equal to the mode default are never
/// stored, so derived equality is defaulted-lookup equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AttrVec {
    mode: Mode,
    scope: Scope,
    entries: BTreeMap<VarId, Attr>,
}

impl AttrVec {
    /// The default vector over `scope` (L̄ in base mode, Ū in extended mode).
    pub fn default_over(mode: Mode, scope: Scope) -> AttrVec {
        AttrVec {
            mode,
            scope,
            entries: BTreeMap::new(),
        }
    }

    pub fn uniform(mode: Mode, scope: Scope, a: Attr) -> AttrVec {
        let mut v = AttrVec::default_over(mode, scope);
        let vars: Vec<VarId> = v.scope.iter().cloned().collect();
        for x in vars {
            v.set(&x, a);
        }
        v
    }

    pub fn from_entries(
        mode: Mode,
        scope: Scope,
        entries: impl IntoIterator<Item = (VarId, Attr)>,
    ) -> Result<AttrVec, AttrError> {
        let mut v = AttrVec::default_over(mode, scope);
        for (x, a) in entries {
            legal(a, mode)?;
            if !v.scope.contains(&x) {
                return Err(AttrError::ScopeMismatch(format!("{x}"), v.scope_string()));
            }
            v.set(&x, a);
        }
        Ok(v)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    /// Explicitly stored (non-default) entries.
    pub fn entries(&self) -> &BTreeMap<VarId, Attr> {
        &self.entries
    }

    pub fn get(&self, x: &VarId) -> Attr {
        self.entries
            .get(x)
            .copied()
            .unwrap_or(self.mode.default_attr())
    }

    /// Sets an attribute for a variable already in scope.
    pub fn set(&mut self, x: &VarId, a: Attr) {
        debug_assert!(self.scope.contains(x), "set outside scope: {x:?}");
        if a == self.mode.default_attr() {
            self.entries.remove(x);
        } else {
            self.entries.insert(x.clone(), a);
        }
    }

    /// `γ, x:α`: extends the scope with a new variable.
    pub fn extend(&self, x: &VarId, a: Attr) -> AttrVec {
        let mut v = self.clone();
        v.scope.insert(x.clone());
        v.set(x, a);
        v
    }

    /// The vector with a single non-default entry.
    pub fn single(mode: Mode, scope: Scope, x: &VarId, a: Attr) -> AttrVec {
        let mut v = AttrVec::default_over(mode, scope);
        v.set(x, a);
        v
    }

    pub fn is_default(&self) -> bool {
        self.entries.is_empty()
    }

    fn same_scope(&self, other: &AttrVec) -> Result<(), AttrError> {
        if self.scope == other.scope {
            Ok(())
        } else {
            Err(AttrError::ScopeMismatch(
                self.scope_string(),
                other.scope_string(),
            ))
        }
    }

    fn scope_string(&self) -> String {
        let names: Vec<String> = self.scope.iter().map(|x| x.to_string()).collect();
        format!("[{}]", names.join(", "))
    }

    pub fn plus(&self, other: &AttrVec) -> Result<AttrVec, AttrError> {
        self.same_scope(other)?;
        let mut out = AttrVec::default_over(self.mode, self.scope.clone());
        for x in self.entries.keys().chain(other.entries.keys()) {
            out.set(x, self.get(x).plus_unchecked(other.get(x)));
        }
        Ok(out)
    }

    pub fn leq(&self, other: &AttrVec) -> Result<bool, AttrError> {
        self.same_scope(other)?;
        Ok(self
            .entries
            .keys()
            .chain(other.entries.keys())
            .all(|x| self.get(x).leq_unchecked(other.get(x))))
    }

    /// Pointwise meet; used to reconcile branch effects.
    pub fn meet(&self, other: &AttrVec) -> Result<AttrVec, AttrError> {
        self.same_scope(other)?;
        let mut out = AttrVec::default_over(self.mode, self.scope.clone());
        for x in self.entries.keys().chain(other.entries.keys()) {
            out.set(x, self.get(x).meet(other.get(x)));
        }
        Ok(out)
    }

    pub fn restrict(&self, dom: &Scope) -> AttrVec {
        let mut out = AttrVec::default_over(self.mode, dom.clone());
        for (x, a) in &self.entries {
            if dom.contains(x) {
                out.set(x, *a);
            }
        }
        out
    }

    pub fn downshift(&self, x: &VarId) -> AttrVec {
        let mut out = self.clone();
        out.scope.remove(x);
        out.entries.remove(x);
        out
    }

    pub fn lazify(&self) -> AttrVec {
        let mut out = AttrVec::default_over(self.mode, self.scope.clone());
        match self.mode {
            Mode::Base => {}
            Mode::Extended => {
                for (x, a) in &self.entries {
                    out.set(x, a.lazify_unchecked());
                }
            }
        }
        out
    }

    /// Renames a variable (scope and entries).
    pub fn rename(&self, from: &VarId, to: &VarId) -> AttrVec {
        if !self.scope.contains(from) {
            return self.clone();
        }
        let mut out = self.downshift(from);
        out.scope.insert(to.clone());
        out.set(to, self.get(from));
        out
    }

    /// Variables whose attribute is not the mode default.
    pub fn support(&self) -> impl Iterator<Item = &VarId> {
        self.entries.keys()
    }
}

impl fmt::Display for AttrVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (x, a)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}:{a}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for AttrVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} over {}", self.scope_string())
    }
}

pub fn vec_plus(g1: &AttrVec, g2: &AttrVec, mode: Mode) -> Result<AttrVec, AttrError> {
    debug_assert_eq!(g1.mode, mode);
    g1.plus(g2)
}

pub fn vec_leq(g1: &AttrVec, g2: &AttrVec, mode: Mode) -> Result<bool, AttrError> {
    debug_assert_eq!(g1.mode, mode);
    g1.leq(g2)
}

pub fn vec_restrict(g: &AttrVec, dom: &Scope) -> AttrVec {
    g.restrict(dom)
}

pub fn vec_downshift(g: &AttrVec, x: &VarId) -> AttrVec {
    g.downshift(x)
}

pub fn vec_lazify(g: &AttrVec, mode: Mode) -> AttrVec {
    debug_assert_eq!(g.mode, mode);
    g.lazify()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Attr::*;

    fn vars(n: u32) -> Vec<VarId> {
        (0..n).map(|i| VarId::new(i, &format!("v{i}"))).collect()
    }

    fn scope(vs: &[VarId]) -> Scope {
        vs.iter().cloned().collect()
    }

    #[test]
    fn base_rejects_unused() {
        assert_eq!(
            attr_plus(Unused, Strict, Mode::Base),
            Err(AttrError::IllegalAttribute)
        );
        assert!(attr_leq(Lazy, Unused, Mode::Base).is_err());
    }

    #[test]
    fn lazy_is_base_identity_unused_is_extended_identity() {
        for &a in Mode::Base.attrs() {
            assert_eq!(attr_plus(Lazy, a, Mode::Base).unwrap(), a);
        }
        for &a in Mode::Extended.attrs() {
            assert_eq!(attr_plus(Unused, a, Mode::Extended).unwrap(), a);
        }
    }

    #[test]
    fn meet_is_below_both() {
        for &a in Mode::Extended.attrs() {
            for &b in Mode::Extended.attrs() {
                let m = a.meet(b);
                assert!(m.leq_unchecked(a) && m.leq_unchecked(b));
            }
        }
    }

    #[test]
    fn mismatched_scopes_are_rejected() {
        let vs = vars(2);
        let g1 = AttrVec::default_over(Mode::Base, scope(&vs[..1]));
        let g2 = AttrVec::default_over(Mode::Base, scope(&vs));
        assert!(matches!(g1.plus(&g2), Err(AttrError::ScopeMismatch(..))));
        assert!(matches!(g1.leq(&g2), Err(AttrError::ScopeMismatch(..))));
    }

    #[test]
    fn restrict_fills_missing_with_default() {
        let vs = vars(3);
        let g = AttrVec::single(Mode::Base, scope(&vs[..1]), &vs[0], Strict);
        let r = g.restrict(&scope(&[vs[0].clone(), vs[2].clone()]));
        assert_eq!(r.get(&vs[0]), Strict);
        assert_eq!(r.get(&vs[2]), Lazy);
        assert_eq!(r.scope().len(), 2);
    }

    #[test]
    fn renders_without_defaults() {
        let vs = vars(3);
        let mut g = AttrVec::default_over(Mode::Base, scope(&vs));
        g.set(&vs[0], Strict);
        g.set(&vs[2], Unknown);
        assert_eq!(g.to_string(), "{v0:S, v2:?}");
        g.set(&vs[0], Lazy);
        assert_eq!(g.to_string(), "{v2:?}");
    }

    #[test]
    fn equality_ignores_explicit_defaults() {
        let vs = vars(2);
        let a = AttrVec::from_entries(Mode::Base, scope(&vs), [(vs[0].clone(), Lazy)]).unwrap();
        let b = AttrVec::default_over(Mode::Base, scope(&vs));
        assert_eq!(a, b);
    }

    #[test]
    fn plus_is_a_commutative_idempotent_monoid() {
        for mode in [Mode::Base, Mode::Extended] {
            let all = mode.attrs();
            for &a in all {
                assert_eq!(attr_plus(a, a, mode).unwrap(), a);
                for &b in all {
                    assert_eq!(attr_plus(a, b, mode), attr_plus(b, a, mode));
                    for &c in all {
                        let l = attr_plus(a, attr_plus(b, c, mode).unwrap(), mode).unwrap();
                        let r = attr_plus(attr_plus(a, b, mode).unwrap(), c, mode).unwrap();
                        assert_eq!(l, r, "{a} {b} {c} in {mode}");
                    }
                }
            }
        }
    }

    #[test]
    fn leq_is_a_partial_order() {
        for mode in [Mode::Base, Mode::Extended] {
            let all = mode.attrs();
            let le = |a, b| attr_leq(a, b, mode).unwrap();
            for &a in all {
                assert!(le(a, a));
                for &b in all {
                    if a != b {
                        assert!(!(le(a, b) && le(b, a)), "{a} and {b} are not antisymmetric");
                    }
                    for &c in all {
                        assert!(!(le(a, b) && le(b, c)) || le(a, c), "{a} {b} {c}");
                    }
                }
            }
        }
        assert!(!attr_leq(Strict, Lazy, Mode::Base).unwrap());
        assert!(!attr_leq(Strict, Unused, Mode::Extended).unwrap());
    }

    #[test]
    fn lazify_keeps_only_unused() {
        assert_eq!(attr_lazify(Strict, Mode::Extended), Lazy);
        assert_eq!(attr_lazify(Unknown, Mode::Extended), Lazy);
        assert_eq!(attr_lazify(Unused, Mode::Extended), Unused);
        for &a in Mode::Base.attrs() {
            assert_eq!(attr_lazify(a, Mode::Base), Lazy);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const N: u32 = 5;

        fn mode() -> impl Strategy<Value = Mode> {
            prop_oneof![Just(Mode::Base), Just(Mode::Extended)]
        }

        fn attrs_in(mode: Mode) -> impl Strategy<Value = Vec<Attr>> {
            proptest::collection::vec(proptest::sample::select(mode.attrs().to_vec()), N as usize)
        }

        fn build(mode: Mode, attrs: &[Attr]) -> AttrVec {
            let vs = vars(N);
            AttrVec::from_entries(
                mode,
                scope(&vs),
                vs.iter().cloned().zip(attrs.iter().copied()),
            )
            .unwrap()
        }

        fn two_vectors() -> impl Strategy<Value = (Mode, Vec<Attr>, Vec<Attr>)> {
            mode().prop_flat_map(|m| (Just(m), attrs_in(m), attrs_in(m)))
        }

        fn subscope() -> impl Strategy<Value = Vec<bool>> {
            proptest::collection::vec(any::<bool>(), N as usize)
        }

        fn pick(mask: &[bool]) -> Scope {
            vars(N)
                .into_iter()
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| v)
                .collect()
        }

        proptest! {
            #[test]
            fn vector_ops_are_pointwise((m, a, b) in two_vectors()) {
                let (g1, g2) = (build(m, &a), build(m, &b));
                let sum = vec_plus(&g1, &g2, m).unwrap();
                let mut all_le = true;
                for (i, x) in vars(N).iter().enumerate() {
                    prop_assert_eq!(sum.get(x), attr_plus(a[i], b[i], m).unwrap());
                    all_le &= attr_leq(a[i], b[i], m).unwrap();
                }
                prop_assert_eq!(vec_leq(&g1, &g2, m).unwrap(), all_le);
            }

            #[test]
            fn nested_restriction_is_intersection(
                (m, a, _) in two_vectors(),
                d1 in subscope(),
                d2 in subscope(),
            ) {
                let g = build(m, &a);
                let d1 = pick(&d1);
                let d2: Scope = pick(&d2).intersection(&d1).cloned().collect();
                let both: Scope = d1.intersection(&d2).cloned().collect();
                prop_assert_eq!(vec_restrict(&vec_restrict(&g, &d1), &d2), vec_restrict(&g, &both));
            }

            #[test]
            fn downshift_commutes_with_plus((m, a, b) in two_vectors(), i in 0..N) {
                let (g1, g2) = (build(m, &a), build(m, &b));
                let x = &vars(N)[i as usize];
                let lhs = vec_downshift(&vec_plus(&g1, &g2, m).unwrap(), x);
                let rhs = vec_plus(&vec_downshift(&g1, x), &vec_downshift(&g2, x), m).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
