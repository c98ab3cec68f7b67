//! Type-directed generation of well-typed CBPV programs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gen::{
    choose, coin, lower_vec, pick, random_attr, sample_vec, strict_goal, GenConfig, Goal, Level,
    Levels,
};
use crate::attrs::{Attr, AttrVec, Fresh, Scope, VarId};
use crate::cbpv::{
    cbpv_synth_comp, comp_type_equal, val_type_equal, CbpvCtx, Comp, CompType, ValType, Value,
};
use crate::parse::{CbpvDecl, CbpvProgram};

/// Raised when a local choice cannot be completed; the caller retries.
#[derive(Debug)]
pub(crate) struct Stuck;

type G<T> = Result<T, Stuck>;

#[derive(Clone, Copy)]
enum Form {
    Intro,
    Let,
    App,
    Force,
    Split,
    Case,
    Seq,
    Sub,
}

pub(crate) struct CbpvGen<'r> {
    pub(crate) rng: &'r mut ChaCha8Rng,
    pub(crate) cfg: &'r GenConfig,
    pub(crate) ctx: CbpvCtx,
    pub(crate) fresh: Fresh,
    /// Remaining non-closing choices for the current term.
    pub(crate) budget: usize,
}

impl<'r> CbpvGen<'r> {
    pub(crate) fn new(
        rng: &'r mut ChaCha8Rng,
        cfg: &'r GenConfig,
        ctx: CbpvCtx,
        fresh: Fresh,
    ) -> CbpvGen<'r> {
        CbpvGen {
            rng,
            cfg,
            ctx,
            fresh,
            budget: cfg.max_size,
        }
    }

    fn scope(&self) -> Scope {
        self.ctx.scope()
    }

    fn binder(&mut self) -> VarId {
        let name = format!("v{}", self.fresh.peek());
        self.fresh.fresh(&name)
    }

    fn under<T>(&mut self, binders: &[(VarId, ValType)], f: impl FnOnce(&mut Self) -> T) -> T {
        let saved = self.ctx.clone();
        for (x, a) in binders {
            self.ctx.push(x.clone(), a.clone());
        }
        let r = f(self);
        self.ctx = saved;
        r
    }

    fn effect(&self, m: &Comp) -> G<AttrVec> {
        cbpv_synth_comp(&self.ctx, m, self.cfg.mode)
            .map(|j| j.effect)
            .map_err(|_| Stuck)
    }

    fn vec(&mut self, lv: &Levels) -> AttrVec {
        let scope = self.scope();
        sample_vec(self.rng, self.cfg.mode, &scope, lv, &mut |_, _| true)
    }

    pub(crate) fn val_type(&mut self, lv: &Levels, d: usize) -> ValType {
        let roll = if d == 0 {
            self.rng.gen_range(0..2) * 3
        } else {
            self.rng.gen_range(0..5)
        };
        match roll {
            0 => ValType::Unit,
            1 => ValType::prod(self.val_type(lv, d - 1), self.val_type(lv, d - 1)),
            2 => ValType::sum(self.val_type(lv, d - 1), self.val_type(lv, d - 1)),
            _ => {
                let g = self.vec(lv);
                let inner = Levels::for_goal(&g);
                let b = if d == 0 {
                    CompType::f(ValType::Unit)
                } else {
                    self.comp_type(&inner, d - 1)
                };
                ValType::u(g, b)
            }
        }
    }

    pub(crate) fn comp_type(&mut self, lv: &Levels, d: usize) -> CompType {
        if d == 0 || coin(self.rng, 0.6) {
            CompType::f(self.val_type(lv, d))
        } else {
            let a = self.val_type(lv, d - 1);
            let alpha = random_attr(self.rng, self.cfg.mode);
            CompType::arrow(a, alpha, self.comp_type(lv, d - 1))
        }
    }

    fn sum_type(&mut self, lv: &Levels) -> ValType {
        let d = self.cfg.type_depth.saturating_sub(1);
        ValType::sum(self.val_type(lv, d), self.val_type(lv, d))
    }

    fn prod_type(&mut self, lv: &Levels) -> ValType {
        let d = self.cfg.type_depth.saturating_sub(1);
        ValType::prod(self.val_type(lv, d), self.val_type(lv, d))
    }

    fn vars_of(&self, lv: &Levels, a: &ValType) -> Vec<VarId> {
        self.ctx
            .entries()
            .iter()
            .filter(|(x, t)| lv.get(x) == Level::Full && val_type_equal(t, a))
            .map(|(x, _)| x.clone())
            .collect()
    }

    fn thunks_of(&self, lv: &Levels, b: &CompType) -> Vec<VarId> {
        self.ctx
            .entries()
            .iter()
            .filter(|(x, t)| {
                lv.get(x) == Level::Full
                    && matches!(t, ValType::U(g, b2) if comp_type_equal(b2, b) && lv.admits(&g.restrict(&self.scope())))
            })
            .map(|(x, _)| x.clone())
            .collect()
    }

    pub(crate) fn value(&mut self, lv: &Levels, a: &ValType, d: usize) -> G<Value> {
        let vars = self.vars_of(lv, a);
        if !vars.is_empty() && coin(self.rng, if d == 0 { 0.6 } else { 0.3 }) {
            return Ok(Value::Var(pick(self.rng, &vars).expect("nonempty").clone()));
        }
        let d1 = d.saturating_sub(1);
        Ok(match a {
            ValType::Unit => Value::Unit,
            ValType::Prod(a1, a2) => Value::Pair(
                Box::new(self.value(lv, a1, d1)?),
                Box::new(self.value(lv, a2, d1)?),
            ),
            ValType::Sum(a1, a2) => {
                if coin(self.rng, 0.5) {
                    Value::Inl(Box::new(self.value(lv, a1, d1)?), a.clone())
                } else {
                    Value::Inr(Box::new(self.value(lv, a2, d1)?), a.clone())
                }
            }
            ValType::U(g, b) => Value::thunk(self.exact(g, b, d1)?),
        })
    }

    /// A computation of type `b` whose effect is exactly `g`.
    pub(crate) fn exact(&mut self, g: &AttrVec, b: &CompType, d: usize) -> G<Comp> {
        let g = g.restrict(&self.scope());
        let lv = Levels::for_goal(&g);
        let mut m = self.comp(&lv, b, d)?;
        let mut eff = self.effect(&m)?;
        for x in g.scope() {
            if g.get(x) == Attr::Strict && eff.get(x) != Attr::Strict {
                m = self.strict_use(x, m);
                eff.set(x, Attr::Strict);
            }
        }
        if eff != g {
            if !g.leq(&eff).map_err(|_| Stuck)? {
                return Err(Stuck);
            }
            m = Comp::Sub {
                target: g,
                body: Box::new(m),
            };
        }
        Ok(m)
    }

    /// `w <- ret x in m`, which uses `x` strictly and otherwise behaves as `m`.
    fn strict_use(&mut self, x: &VarId, m: Comp) -> Comp {
        let w = self.binder();
        Comp::Let {
            x: w,
            bound: Box::new(Comp::ret(Value::Var(x.clone()))),
            body: Box::new(m),
        }
    }

    fn lam(&mut self, lv: &Levels, a: &ValType, alpha: Attr, b: &CompType, d: usize) -> G<Comp> {
        let x = self.binder();
        let inner = lv.with(&x, Level::for_goal(alpha));
        let body = self.under(&[(x.clone(), a.clone())], |s| -> G<Comp> {
            let mut body = if d == 0 {
                s.close(&inner, b)?
            } else {
                s.comp(&inner, b, d - 1)?
            };
            let mut eff = s.effect(&body)?;
            if alpha == Attr::Strict && eff.get(&x) != Attr::Strict {
                body = s.strict_use(&x, body);
                eff.set(&x, Attr::Strict);
            }
            if eff.get(&x) != alpha {
                let mut target = eff.clone();
                target.set(&x, alpha);
                body = Comp::Sub {
                    target,
                    body: Box::new(body),
                };
            }
            Ok(body)
        })?;
        Ok(Comp::Lam {
            x,
            arg: a.clone(),
            body: Box::new(body),
        })
    }

    /// A computation of type `b` using only closing rules.
    fn close(&mut self, lv: &Levels, b: &CompType) -> G<Comp> {
        let thunks = self.thunks_of(lv, b);
        if !thunks.is_empty() && coin(self.rng, 0.4) {
            return Ok(Comp::force(Value::Var(
                pick(self.rng, &thunks).expect("nonempty").clone(),
            )));
        }
        match b {
            CompType::F(a) => Ok(Comp::ret(self.value(lv, a, 0)?)),
            CompType::Arrow(a, alpha, b2) => self.lam(lv, a, *alpha, b2, 0),
        }
    }

    pub(crate) fn comp(&mut self, lv: &Levels, b: &CompType, d: usize) -> G<Comp> {
        if d == 0 || self.budget == 0 {
            return self.close(lv, b);
        }
        self.budget -= 1;
        let w = &self.cfg.weights;
        let intro = match b {
            CompType::F(_) => w.intro,
            CompType::Arrow(..) => w.lam,
        };
        let options = [
            (intro + w.var, Form::Intro),
            (w.let_, Form::Let),
            (w.app, Form::App),
            (w.force, Form::Force),
            (w.split, Form::Split),
            (w.case, Form::Case),
            (w.seq, Form::Seq),
            (w.sub, Form::Sub),
        ];
        let form = choose(self.rng, &options).unwrap_or(Form::Intro);
        let d1 = d - 1;
        let td = self.cfg.type_depth;
        match form {
            Form::Intro => match b {
                CompType::F(a) => Ok(Comp::ret(self.value(lv, a, d1)?)),
                CompType::Arrow(a, alpha, b2) => self.lam(lv, a, *alpha, b2, d1),
            },
            Form::Let => {
                let a = self.val_type(lv, td);
                let bound = self.comp(lv, &CompType::f(a.clone()), d1)?;
                let x = self.binder();
                let inner = lv.with(&x, Level::Full);
                let body = self.under(&[(x.clone(), a)], |s| s.comp(&inner, b, d1))?;
                Ok(Comp::Let {
                    x,
                    bound: Box::new(bound),
                    body: Box::new(body),
                })
            }
            Form::App => {
                let a = self.val_type(lv, td.saturating_sub(1));
                let alpha = random_attr(self.rng, self.cfg.mode);
                let f = self.comp(lv, &CompType::arrow(a.clone(), alpha, b.clone()), d1)?;
                let v = self.value(lv, &a, d1)?;
                Ok(Comp::App(Box::new(f), Box::new(v)))
            }
            Form::Force => {
                let thunks = self.thunks_of(lv, b);
                match pick(self.rng, &thunks) {
                    Some(y) if coin(self.rng, 0.6) => Ok(Comp::force(Value::Var(y.clone()))),
                    _ => Ok(Comp::force(Value::thunk(self.comp(lv, b, d1)?))),
                }
            }
            Form::Split => {
                let p = self.prod_type(lv);
                let ValType::Prod(a1, a2) = &p else {
                    unreachable!("product sampled")
                };
                let v = self.value(lv, &p, d1)?;
                let (x1, x2) = (self.binder(), self.binder());
                let inner = lv.with(&x1, Level::Full).with(&x2, Level::Full);
                let binders = [(x1.clone(), (**a1).clone()), (x2.clone(), (**a2).clone())];
                let body = self.under(&binders, |s| s.comp(&inner, b, d1))?;
                Ok(Comp::Split {
                    x1,
                    x2,
                    scrut: Box::new(v),
                    body: Box::new(body),
                })
            }
            Form::Case => {
                let sum = self.sum_type(lv);
                let ValType::Sum(a1, a2) = &sum else {
                    unreachable!("sum sampled")
                };
                let v = self.value(lv, &sum, d1)?;
                let (x1, x2) = (self.binder(), self.binder());
                let (l, el) = self.branch(lv, &x1, a1, b, d1)?;
                let (r, er) = self.branch(lv, &x2, a2, b, d1)?;
                let meet = el
                    .downshift(&x1)
                    .meet(&er.downshift(&x2))
                    .map_err(|_| Stuck)?;
                let reconcile = |m: Comp, e: AttrVec, x: &VarId| {
                    let target = meet.extend(x, e.get(x));
                    if target == e {
                        m
                    } else {
                        Comp::Sub {
                            target,
                            body: Box::new(m),
                        }
                    }
                };
                let left = reconcile(l, el, &x1);
                let right = reconcile(r, er, &x2);
                Ok(Comp::Case {
                    scrut: Box::new(v),
                    x1,
                    left: Box::new(left),
                    x2,
                    right: Box::new(right),
                })
            }
            Form::Seq => {
                let v = self.value(lv, &ValType::Unit, d1)?;
                Ok(Comp::Seq(Box::new(v), Box::new(self.comp(lv, b, d1)?)))
            }
            Form::Sub => {
                let m = self.comp(lv, b, d1)?;
                let eff = self.effect(&m)?;
                let target = lower_vec(self.rng, &eff, lv);
                Ok(if target == eff {
                    m
                } else {
                    Comp::Sub {
                        target,
                        body: Box::new(m),
                    }
                })
            }
        }
    }

    fn branch(
        &mut self,
        lv: &Levels,
        x: &VarId,
        a: &ValType,
        b: &CompType,
        d: usize,
    ) -> G<(Comp, AttrVec)> {
        let inner = lv.with(x, Level::Full);
        self.under(&[(x.clone(), a.clone())], |s| {
            let m = s.comp(&inner, b, d)?;
            let e = s.effect(&m)?;
            Ok((m, e))
        })
    }
}

/// One attempt at a program whose `main` meets `goal`.
pub(crate) fn attempt(rng: &mut ChaCha8Rng, cfg: &GenConfig, goal: Goal) -> G<CbpvProgram> {
    let n = rng.gen_range(0..=cfg.max_scope);
    let mut g = CbpvGen::new(rng, cfg, CbpvCtx::new(), Fresh::new());
    let full = Levels::default();
    let mut decls = Vec::new();
    for _ in 0..n {
        g.budget = cfg.max_size / 2;
        let a = g.val_type(&full, cfg.type_depth);
        let value = g.value(&full, &a, cfg.max_depth / 2)?;
        let name = format!("x{}", decls.len());
        let x = g.fresh.fresh(&name);
        g.ctx.push(x.clone(), a.clone());
        decls.push(CbpvDecl { x, ty: a, value });
    }
    let b = if goal.returner() {
        CompType::f(g.val_type(&full, g.cfg.type_depth))
    } else {
        g.comp_type(&full, g.cfg.type_depth)
    };
    g.budget = cfg.max_size;
    let main = if goal == Goal::StrictReturner {
        let target = strict_goal(g.rng, cfg.mode, &g.scope(), &mut |_, _| true).ok_or(Stuck)?;
        g.exact(&target, &b, cfg.max_depth)?
    } else {
        g.comp(&full, &b, cfg.max_depth)?
    };
    Ok(CbpvProgram {
        mode: cfg.mode,
        decls,
        main,
        lambdas: Default::default(),
    })
}

/// A value of type `a` under `ctx`, for use as a function argument.
pub(crate) fn value_for(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    ctx: &CbpvCtx,
    fresh: Fresh,
    a: &ValType,
) -> G<Value> {
    let mut g = CbpvGen::new(rng, cfg, ctx.clone(), fresh);
    g.value(&Levels::default(), a, cfg.max_depth)
}
