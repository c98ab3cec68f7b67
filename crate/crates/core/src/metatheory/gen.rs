//! Pieces shared by both term generators.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::{Attr, AttrVec, Mode, Scope, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("generation exhausted after {0} attempts")]
    GenerationExhausted(usize),
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

/// Relative weights of the syntax forms the generators choose between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub var: u32,
    pub intro: u32,
    pub lam: u32,
    pub app: u32,
    pub let_: u32,
    pub force: u32,
    pub split: u32,
    pub case: u32,
    pub seq: u32,
    pub sub: u32,
}

impl Default for Weights {
    fn default() -> Weights {
        Weights {
            var: 4,
            intro: 4,
            lam: 3,
            app: 3,
            let_: 3,
            force: 3,
            split: 2,
            case: 2,
            seq: 2,
            sub: 2,
        }
    }
}

impl Weights {
    pub fn total(&self) -> u32 {
        self.var
            + self.intro
            + self.lam
            + self.app
            + self.let_
            + self.force
            + self.split
            + self.case
            + self.seq
            + self.sub
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    /// Budget of nested non-closing choices in a term.
    pub max_depth: usize,
    /// Number of top-level declarations is drawn from `0..=max_scope`.
    pub max_scope: usize,
    /// Nesting bound for sampled types.
    pub type_depth: usize,
    /// Budget of non-closing choices per term, bounding program size.
    pub max_size: usize,
    pub mode: Mode,
    pub weights: Weights,
}

impl GenConfig {
    pub fn new(seed: u64, mode: Mode) -> GenConfig {
        GenConfig {
            seed,
            max_depth: 6,
            max_scope: 4,
            type_depth: 2,
            max_size: 32,
            mode,
            weights: Weights::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.max_depth < 1 {
            return Err(GenError::InvalidConfig(
                "max_depth must be at least 1".into(),
            ));
        }
        if self.weights.total() == 0 {
            return Err(GenError::InvalidConfig("all weights are zero".into()));
        }
        Ok(())
    }
}

/// What the generated `main` must look like.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    /// Any type.
    Any,
    /// A returner type (CBPV) or a type without arrows at the top (CBN).
    Returner,
    /// As `Returner`, with at least one declaration used strictly.
    StrictReturner,
}

impl Goal {
    pub(crate) fn returner(self) -> bool {
        self != Goal::Any
    }
}

/// A goal vector that is default except for `S` on a nonempty random
/// subset of the candidates.
pub(crate) fn strict_goal(
    rng: &mut ChaCha8Rng,
    mode: Mode,
    scope: &Scope,
    candidates: &mut dyn FnMut(&VarId, &AttrVec) -> bool,
) -> Option<AttrVec> {
    let mut g = AttrVec::default_over(mode, scope.clone());
    let vars: Vec<VarId> = scope.iter().cloned().collect();
    let forced = pick(rng, &vars)?.clone();
    for x in &vars {
        if (x == &forced || coin(rng, 0.4)) && candidates(x, &g) {
            g.set(x, Attr::Strict);
        }
    }
    (!g.is_default()).then_some(g)
}

/// How a variable may be used by the term being generated, so that the
/// term's effect can later be lowered to a goal vector with a subsumption.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Level {
    /// Must not be used at all; its attribute must stay `U`.
    Never,
    /// May only be used under a suspension; its attribute must be `L`/`U`.
    LazyOnly,
    /// Unrestricted.
    Full,
}

impl Level {
    pub(crate) fn admits(self, a: Attr) -> bool {
        match self {
            Level::Full => true,
            Level::LazyOnly => matches!(a, Attr::Lazy | Attr::Unused),
            Level::Never => a == Attr::Unused,
        }
    }

    /// The loosest level whose admitted attributes are all above `a`.
    pub(crate) fn for_goal(a: Attr) -> Level {
        match a {
            Attr::Strict | Attr::Unknown => Level::Full,
            Attr::Lazy => Level::LazyOnly,
            Attr::Unused => Level::Never,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Levels(pub(crate) BTreeMap<VarId, Level>);

impl Levels {
    pub(crate) fn get(&self, x: &VarId) -> Level {
        self.0.get(x).copied().unwrap_or(Level::Full)
    }

    pub(crate) fn with(&self, x: &VarId, l: Level) -> Levels {
        let mut m = self.0.clone();
        m.insert(x.clone(), l);
        Levels(m)
    }

    /// Levels under which a term's effect can be lowered to `g`.
    pub(crate) fn for_goal(g: &AttrVec) -> Levels {
        Levels(
            g.scope()
                .iter()
                .map(|x| (x.clone(), Level::for_goal(g.get(x))))
                .collect(),
        )
    }

    pub(crate) fn admits(&self, g: &AttrVec) -> bool {
        g.scope().iter().all(|x| self.get(x).admits(g.get(x)))
    }

    /// The level a binder with latent vector `g` can be given: using it
    /// strictly releases `g`.
    pub(crate) fn binder(&self, g: &AttrVec, mode: Mode) -> Level {
        if self.admits(g) {
            Level::Full
        } else if mode == Mode::Base
            || g.scope()
                .iter()
                .all(|x| self.get(x) != Level::Never || g.get(x) == Attr::Unused)
        {
            Level::LazyOnly
        } else {
            Level::Never
        }
    }
}

pub(crate) fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.gen_bool(p)
}

pub(crate) fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> Option<&'a T> {
    if xs.is_empty() {
        None
    } else {
        Some(&xs[rng.gen_range(0..xs.len())])
    }
}

pub(crate) fn random_attr(rng: &mut ChaCha8Rng, mode: Mode) -> Attr {
    *pick(rng, mode.attrs()).expect("nonempty attribute set")
}

/// A vector over `scope` with non-default entries only on variables the
/// levels leave unrestricted; `S` only where `strictable` allows.
pub(crate) fn sample_vec(
    rng: &mut ChaCha8Rng,
    mode: Mode,
    scope: &Scope,
    levels: &Levels,
    strictable: &mut dyn FnMut(&VarId, &AttrVec) -> bool,
) -> AttrVec {
    let mut g = AttrVec::default_over(mode, scope.clone());
    for x in scope {
        if levels.get(x) != Level::Full || coin(rng, 0.55) {
            continue;
        }
        let mut a = random_attr(rng, mode);
        if a == Attr::Strict && !strictable(x, &g) {
            a = Attr::Unknown;
        }
        g.set(x, a);
    }
    g
}

/// Lowers some unrestricted entries of `g`, keeping every level admitted.
pub(crate) fn lower_vec(rng: &mut ChaCha8Rng, g: &AttrVec, levels: &Levels) -> AttrVec {
    let mut out = g.clone();
    for x in g.scope() {
        let a = g.get(x);
        let lowered = match (levels.get(x), a) {
            (Level::Full, Attr::Strict | Attr::Lazy) => Attr::Unknown,
            (Level::Full, Attr::Unused) => {
                *pick(rng, &[Attr::Lazy, Attr::Unknown]).expect("nonempty")
            }
            (Level::LazyOnly, Attr::Unused) => Attr::Lazy,
            _ => continue,
        };
        if coin(rng, 0.4) {
            out.set(x, lowered);
        }
    }
    out
}

/// Weighted choice among `(weight, tag)` pairs with positive total weight.
pub(crate) fn choose<T: Copy>(rng: &mut ChaCha8Rng, options: &[(u32, T)]) -> Option<T> {
    let total: u32 = options.iter().map(|(w, _)| w).sum();
    if total == 0 {
        return None;
    }
    let mut r = rng.gen_range(0..total);
    for (w, t) in options {
        if r < *w {
            return Some(*t);
        }
        r -= w;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn vars(n: u32) -> Scope {
        (0..n).map(|i| VarId::new(i, &format!("v{i}"))).collect()
    }

    #[test]
    fn config_validation() {
        let mut cfg = GenConfig::new(0, Mode::Base);
        assert!(cfg.validate().is_ok());
        cfg.max_depth = 0;
        assert!(matches!(cfg.validate(), Err(GenError::InvalidConfig(_))));
        let cfg = GenConfig {
            weights: Weights {
                var: 0,
                intro: 0,
                lam: 0,
                app: 0,
                let_: 0,
                force: 0,
                split: 0,
                case: 0,
                seq: 0,
                sub: 0,
            },
            ..GenConfig::new(0, Mode::Base)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn choose_respects_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(choose::<u8>(&mut rng, &[(0, 1), (0, 2)]), None);
        for _ in 0..100 {
            assert_eq!(choose(&mut rng, &[(0, 'a'), (3, 'b')]), Some('b'));
        }
    }

    #[test]
    fn lowering_moves_down_and_respects_levels() {
        for mode in [Mode::Base, Mode::Extended] {
            let scope = vars(4);
            for seed in 0..200 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let levels = Levels::default();
                let g = sample_vec(&mut rng, mode, &scope, &levels, &mut |_, _| true);
                let goal_levels = Levels::for_goal(&g);
                let lowered = lower_vec(&mut rng, &g, &goal_levels);
                assert!(lowered.leq(&g).unwrap(), "{lowered} not below {g}");
                assert!(goal_levels.admits(&g));
            }
        }
    }

    #[test]
    fn strict_goal_marks_only_candidates() {
        let scope = vars(4);
        let only = VarId::new(2, "v2");
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut candidates = |x: &VarId, _: &AttrVec| *x == only;
            if let Some(g) = strict_goal(&mut rng, Mode::Base, &scope, &mut candidates) {
                assert_eq!(g.support().cloned().collect::<Vec<_>>(), vec![only.clone()]);
                assert_eq!(g.get(&only), Attr::Strict);
            }
        }
    }
}
