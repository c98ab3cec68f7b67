//! Type-directed generation of well-typed CBN programs.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gen::{
    choose, coin, lower_vec, pick, random_attr, sample_vec, strict_goal, GenConfig, Goal, Level,
    Levels,
};
use super::gen_cbpv::Stuck;
use crate::attrs::{Attr, AttrVec, Fresh, Mode, Scope, VarId};
use crate::cbn::{
    cbn_effects_of, cbn_synth, cbn_type_equal, cbn_wf_type, CbnArrow, CbnCtx, CbnJudgment, CbnTerm,
    CbnType,
};
use crate::parse::{CbnDecl, CbnProgram};

type G<T> = Result<T, Stuck>;

#[derive(Clone, Copy)]
enum Form {
    Var,
    Intro,
    App,
    Let,
    Split,
    Case,
    Seq,
    Sub,
}

pub(crate) struct CbnGen<'r> {
    pub(crate) rng: &'r mut ChaCha8Rng,
    pub(crate) cfg: &'r GenConfig,
    pub(crate) ctx: CbnCtx,
    pub(crate) fresh: Fresh,
    /// Remaining non-closing choices for the current term.
    pub(crate) budget: usize,
}

fn first_order(t: &CbnType) -> bool {
    !matches!(t, CbnType::Arrow(_))
}

impl<'r> CbnGen<'r> {
    pub(crate) fn new(
        rng: &'r mut ChaCha8Rng,
        cfg: &'r GenConfig,
        ctx: CbnCtx,
        fresh: Fresh,
    ) -> CbnGen<'r> {
        CbnGen {
            rng,
            cfg,
            ctx,
            fresh,
            budget: cfg.max_size,
        }
    }

    fn mode(&self) -> Mode {
        self.cfg.mode
    }

    fn scope(&self) -> Scope {
        self.ctx.scope()
    }

    fn binder(&mut self) -> VarId {
        let name = format!("v{}", self.fresh.peek());
        self.fresh.fresh(&name)
    }

    fn under<T>(
        &mut self,
        binders: &[(VarId, CbnType, AttrVec)],
        f: impl FnOnce(&mut Self) -> T,
    ) -> T {
        let saved = self.ctx.clone();
        for (x, t, g) in binders {
            self.ctx.push(x.clone(), t.clone(), g.clone());
        }
        let r = f(self);
        self.ctx = saved;
        r
    }

    fn judge(&self, e: &CbnTerm) -> G<CbnJudgment> {
        cbn_synth(&self.ctx, e, self.mode()).map_err(|_| Stuck)
    }

    fn latent(&self, y: &VarId) -> AttrVec {
        let en = self
            .ctx
            .lookup(y)
            .expect("generator variables are in scope");
        en.latent.restrict(&self.scope())
    }

    fn usable(&self, lv: &Levels, y: &VarId) -> bool {
        lv.get(y) == Level::Full && lv.admits(&self.latent(y))
    }

    /// Whether `y` can be used strictly inside a term whose effect will be
    /// lowered to a goal that agrees with `partial`.
    fn strictable(ctx: &CbnCtx, scope: &Scope, y: &VarId, partial: &AttrVec) -> bool {
        let Some(en) = ctx.lookup(y) else {
            return false;
        };
        let goal = Levels::for_goal(&partial.restrict(scope));
        first_order(&en.ty) && goal.admits(&en.latent.restrict(scope))
    }

    fn vec(&mut self, lv: &Levels) -> AttrVec {
        let scope = self.scope();
        let ctx = &self.ctx;
        sample_vec(self.rng, self.cfg.mode, &scope, lv, &mut |y, g| {
            Self::strictable(ctx, &scope, y, g)
        })
    }

    /// A vector with the same non-`U` entries as `g`, possibly weakened.
    fn sibling(&mut self, g: &AttrVec) -> AttrVec {
        let mut out = g.clone();
        for x in g.support() {
            if g.get(x) != Attr::Unused && coin(self.rng, 0.4) {
                out.set(
                    x,
                    *pick(self.rng, &[Attr::Unknown, Attr::Lazy]).expect("nonempty"),
                );
            }
        }
        out
    }

    pub(crate) fn ty(&mut self, lv: &Levels, d: usize) -> G<CbnType> {
        let roll = if d == 0 { 0 } else { self.rng.gen_range(0..4) };
        Ok(match roll {
            0 => CbnType::Unit,
            1 => {
                let g1 = self.vec(lv);
                let t1 = self.ty(&Levels::for_goal(&g1), d - 1)?;
                let g2 = self.vec(lv);
                let t2 = self.ty(&Levels::for_goal(&g2), d - 1)?;
                CbnType::prod(t1, g1, t2, g2)
            }
            2 => {
                let g1 = self.vec(lv);
                let g2 = match self.mode() {
                    Mode::Base => self.vec(lv),
                    Mode::Extended => self.sibling(&g1),
                };
                let t1 = self.ty(&Levels::for_goal(&g1), d - 1)?;
                let t2 = self.ty(&Levels::for_goal(&g2), d - 1)?;
                CbnType::sum(t1, g1, t2, g2)
            }
            _ => {
                let lat = self.vec(lv);
                let ret_of = |s: &mut Self, x: &VarId, lv2: &Levels| {
                    s.ty(lv2, d - 1).map(|t| (t, x.clone()))
                };
                self.arrow(lv, lat, d - 1, ret_of)?
            }
        })
    }

    /// Samples an arrow type with latent `lat`. `ret_of` produces the result
    /// type in the scope extended with the argument.
    fn arrow(
        &mut self,
        lv: &Levels,
        lat: AttrVec,
        d: usize,
        ret_of: impl FnOnce(&mut Self, &VarId, &Levels) -> G<(CbnType, VarId)>,
    ) -> G<CbnType> {
        let mode = self.mode();
        let arg_levels = match mode {
            Mode::Base => lv.clone(),
            Mode::Extended => {
                let mut l = lv.clone();
                for x in lat.scope() {
                    if lat.get(x) == Attr::Unused {
                        l = l.with(x, Level::Never);
                    }
                }
                l
            }
        };
        let mut garg = if coin(self.rng, 0.4) {
            self.vec(&arg_levels)
        } else {
            AttrVec::default_over(mode, self.scope())
        };
        let targ = self.ty(&Levels::for_goal(&garg), d)?;
        let x = self.binder();
        let mut alpha = random_attr(self.rng, mode);
        let scope = self.scope();
        if alpha == Attr::Strict
            && !(first_order(&targ) && Levels::for_goal(&lat.restrict(&scope)).admits(&garg))
        {
            alpha = Attr::Unknown;
        }
        let body_levels = Levels::for_goal(&lat.extend(&x, alpha));
        let (ret, x) = self.under(&[(x.clone(), targ.clone(), garg.clone())], |s| {
            ret_of(s, &x, &body_levels)
        })?;
        if mode == Mode::Extended {
            let inner = cbn_effects_of(
                &ret,
                mode,
                &scope.iter().cloned().chain([x.clone()]).collect(),
            )
            .downshift(&x);
            for y in scope.iter() {
                if inner.get(y) == Attr::Unused {
                    garg.set(y, Attr::Unused);
                }
            }
            if !cbn_wf_type(&garg, &targ, mode) {
                return Err(Stuck);
            }
        }
        Ok(CbnType::Arrow(Box::new(CbnArrow {
            x,
            attr: alpha,
            arg: targ,
            arg_latent: garg,
            latent: lat,
            ret,
        })))
    }

    fn vars_of(&self, lv: &Levels, t: &CbnType) -> Vec<VarId> {
        let scope = self.scope();
        self.ctx
            .entries()
            .iter()
            .filter(|en| self.usable(lv, &en.x) && cbn_type_equal(&en.ty.widen(&scope), t))
            .map(|en| en.x.clone())
            .collect()
    }

    /// Wraps `e` so that it also uses `x` strictly.
    fn strict_use(&mut self, x: &VarId, e: CbnTerm) -> G<CbnTerm> {
        let t = self.ctx.lookup(x).ok_or(Stuck)?.ty.clone();
        let v = Box::new(CbnTerm::Var(x.clone()));
        Ok(match t {
            CbnType::Unit => CbnTerm::Seq(v, Box::new(e)),
            CbnType::Prod(..) => {
                let (a, b) = (self.binder(), self.binder());
                CbnTerm::Split {
                    x1: a,
                    x2: b,
                    scrut: v,
                    body: Box::new(e),
                }
            }
            CbnType::Sum(..) => {
                let (a, b) = (self.binder(), self.binder());
                let copy = e.freshen(&mut self.fresh);
                CbnTerm::Case {
                    scrut: v,
                    x1: a,
                    left: Box::new(e),
                    x2: b,
                    right: Box::new(copy),
                }
            }
            CbnType::Arrow(_) => return Err(Stuck),
        })
    }

    /// A term of type `t` whose effect is exactly `g`.
    pub(crate) fn exact(&mut self, t: &CbnType, g: &AttrVec, d: usize) -> G<CbnTerm> {
        let g = g.restrict(&self.scope());
        let lv = Levels::for_goal(&g);
        let mut e = self.term(&lv, t, d)?;
        let mut eff = self.judge(&e)?.effect;
        for x in g.scope() {
            if g.get(x) == Attr::Strict && eff.get(x) != Attr::Strict {
                e = self.strict_use(x, e)?;
                eff = self.judge(&e)?.effect;
            }
        }
        if eff != g {
            if !g.leq(&eff).map_err(|_| Stuck)? {
                return Err(Stuck);
            }
            e = CbnTerm::Sub {
                target: g,
                body: Box::new(e),
            };
        }
        Ok(e)
    }

    fn lam(&mut self, ar: &CbnArrow, d: usize) -> G<CbnTerm> {
        let x = self.binder();
        let ret = ar
            .ret
            .rename_map(&HashMap::from([(ar.x.clone(), x.clone())]));
        let goal = ar.latent.restrict(&self.scope()).extend(&x, ar.attr);
        let binders = [(x.clone(), ar.arg.clone(), ar.arg_latent.clone())];
        let body = self.under(&binders, |s| s.exact(&ret, &goal, d))?;
        Ok(CbnTerm::Lam {
            x,
            arg: ar.arg.clone(),
            arg_latent: ar.arg_latent.clone(),
            body: Box::new(body),
        })
    }

    fn intro(&mut self, t: &CbnType, d: usize) -> G<CbnTerm> {
        Ok(match t {
            CbnType::Unit => CbnTerm::Unit,
            CbnType::Prod(t1, g1, t2, g2) => CbnTerm::Pair(
                Box::new(self.exact(t1, g1, d)?),
                Box::new(self.exact(t2, g2, d)?),
            ),
            CbnType::Sum(t1, g1, t2, g2) => {
                if coin(self.rng, 0.5) {
                    CbnTerm::Inl(Box::new(self.exact(t1, g1, d)?), t.clone())
                } else {
                    CbnTerm::Inr(Box::new(self.exact(t2, g2, d)?), t.clone())
                }
            }
            CbnType::Arrow(ar) => self.lam(ar, d)?,
        })
    }

    fn binder_level(&self, lv: &Levels, g: &AttrVec) -> Level {
        lv.binder(&g.restrict(&self.scope()), self.mode())
    }

    /// A term of type exactly `t` whose effect `lv` admits.
    pub(crate) fn term(&mut self, lv: &Levels, t: &CbnType, d: usize) -> G<CbnTerm> {
        let vars = self.vars_of(lv, t);
        if d == 0 || self.budget == 0 {
            if !vars.is_empty() && coin(self.rng, 0.5) {
                return Ok(CbnTerm::Var(
                    pick(self.rng, &vars).expect("nonempty").clone(),
                ));
            }
            return self.intro(t, 0);
        }
        self.budget -= 1;
        let w = &self.cfg.weights;
        let intro = if matches!(t, CbnType::Arrow(_)) {
            w.lam
        } else {
            w.intro
        };
        let options = [
            (if vars.is_empty() { 0 } else { w.var }, Form::Var),
            (intro, Form::Intro),
            (w.app, Form::App),
            (w.let_, Form::Let),
            (w.split, Form::Split),
            (w.case, Form::Case),
            (w.seq, Form::Seq),
            (w.sub, Form::Sub),
        ];
        let d1 = d - 1;
        let td = self.cfg.type_depth;
        match choose(self.rng, &options).unwrap_or(Form::Intro) {
            Form::Var => Ok(CbnTerm::Var(
                pick(self.rng, &vars).expect("nonempty").clone(),
            )),
            Form::Intro => self.intro(t, d1),
            Form::App => {
                let lat = self.vec(lv);
                let t = t.clone();
                let ar = self.arrow(lv, lat, td.saturating_sub(1), |s, x, _| {
                    Ok((t.widen(&s.scope()), x.clone()))
                })?;
                let CbnType::Arrow(ar) = ar else {
                    unreachable!("arrow sampled")
                };
                let f = self.lam(&ar, d1)?;
                let a = self.exact(&ar.arg, &ar.arg_latent, d1)?;
                Ok(CbnTerm::App(Box::new(f), Box::new(a)))
            }
            Form::Let => {
                let t1 = self.ty(lv, td)?;
                let bound = self.term(lv, &t1, d1)?;
                let j = self.judge(&bound)?;
                let x = self.binder();
                let inner = lv.with(&x, self.binder_level(lv, &j.effect));
                let body = self.under(&[(x.clone(), j.ty, j.effect)], |s| s.term(&inner, t, d1))?;
                Ok(CbnTerm::Let {
                    x,
                    bound: Box::new(bound),
                    body: Box::new(body),
                })
            }
            Form::Split => {
                let p = self.structured(lv, true)?;
                let CbnType::Prod(t1, g1, t2, g2) = &p else {
                    unreachable!("product sampled")
                };
                let scrut = self.term(lv, &p, d1)?;
                let (x1, x2) = (self.binder(), self.binder());
                let inner = lv
                    .with(&x1, self.binder_level(lv, g1))
                    .with(&x2, self.binder_level(lv, g2));
                let binders = [
                    (x1.clone(), (**t1).clone(), g1.clone()),
                    (x2.clone(), (**t2).clone(), g2.clone()),
                ];
                let body = self.under(&binders, |s| s.term(&inner, t, d1))?;
                Ok(CbnTerm::Split {
                    x1,
                    x2,
                    scrut: Box::new(scrut),
                    body: Box::new(body),
                })
            }
            Form::Case => {
                let sum = self.structured(lv, false)?;
                let CbnType::Sum(t1, g1, t2, g2) = &sum else {
                    unreachable!("sum sampled")
                };
                let scrut = self.term(lv, &sum, d1)?;
                let (x1, x2) = (self.binder(), self.binder());
                let (l, el) = self.branch(lv, &x1, t1, g1, t, d1)?;
                let (r, er) = self.branch(lv, &x2, t2, g2, t, d1)?;
                let meet = el
                    .downshift(&x1)
                    .meet(&er.downshift(&x2))
                    .map_err(|_| Stuck)?;
                let reconcile = |e: CbnTerm, eff: AttrVec, x: &VarId| {
                    let target = meet.extend(x, eff.get(x));
                    if target == eff {
                        e
                    } else {
                        CbnTerm::Sub {
                            target,
                            body: Box::new(e),
                        }
                    }
                };
                let left = reconcile(l, el, &x1);
                let right = reconcile(r, er, &x2);
                Ok(CbnTerm::Case {
                    scrut: Box::new(scrut),
                    x1,
                    left: Box::new(left),
                    x2,
                    right: Box::new(right),
                })
            }
            Form::Seq => {
                let a = self.term(lv, &CbnType::Unit, d1)?;
                Ok(CbnTerm::Seq(Box::new(a), Box::new(self.term(lv, t, d1)?)))
            }
            Form::Sub => {
                let e = self.term(lv, t, d1)?;
                let eff = self.judge(&e)?.effect;
                let target = lower_vec(self.rng, &eff, lv);
                Ok(if target == eff {
                    e
                } else {
                    CbnTerm::Sub {
                        target,
                        body: Box::new(e),
                    }
                })
            }
        }
    }

    /// A product (or sum) type sampled under `lv`.
    fn structured(&mut self, lv: &Levels, prod: bool) -> G<CbnType> {
        let d = self.cfg.type_depth.saturating_sub(1);
        let g1 = self.vec(lv);
        let g2 = match (self.mode(), prod) {
            (Mode::Extended, false) => self.sibling(&g1),
            _ => self.vec(lv),
        };
        let t1 = self.ty(&Levels::for_goal(&g1), d)?;
        let t2 = self.ty(&Levels::for_goal(&g2), d)?;
        Ok(if prod {
            CbnType::prod(t1, g1, t2, g2)
        } else {
            CbnType::sum(t1, g1, t2, g2)
        })
    }

    fn branch(
        &mut self,
        lv: &Levels,
        x: &VarId,
        tx: &CbnType,
        gx: &AttrVec,
        t: &CbnType,
        d: usize,
    ) -> G<(CbnTerm, AttrVec)> {
        let inner = lv.with(x, self.binder_level(lv, gx));
        self.under(&[(x.clone(), tx.clone(), gx.clone())], |s| {
            let e = s.term(&inner, t, d)?;
            let eff = s.judge(&e)?.effect;
            Ok((e, eff))
        })
    }
}

/// One attempt at a program whose `main` meets `goal`.
pub(crate) fn attempt(rng: &mut ChaCha8Rng, cfg: &GenConfig, goal: Goal) -> G<CbnProgram> {
    let n = rng.gen_range(0..=cfg.max_scope);
    let mut g = CbnGen::new(rng, cfg, CbnCtx::new(), Fresh::new());
    let full = Levels::default();
    let mut decls = Vec::new();
    for _ in 0..n {
        g.budget = cfg.max_size / 2;
        let t = g.ty(&full, cfg.type_depth)?;
        let term = g.term(&full, &t, cfg.max_depth / 2)?;
        let j = g.judge(&term)?;
        let name = format!("x{}", decls.len());
        let x = g.fresh.fresh(&name);
        g.ctx.push(x.clone(), j.ty.clone(), j.effect);
        decls.push(CbnDecl {
            x,
            ty: j.ty,
            latent: None,
            term,
        });
    }
    let mut t = g.ty(&full, cfg.type_depth)?;
    while goal.returner() && matches!(t, CbnType::Arrow(_)) {
        t = g.ty(&full, cfg.type_depth)?;
    }
    g.budget = cfg.max_size;
    let main = if goal == Goal::StrictReturner {
        let (ctx, scope) = (g.ctx.clone(), g.scope());
        let target = strict_goal(g.rng, cfg.mode, &scope, &mut |y, partial| {
            CbnGen::strictable(&ctx, &scope, y, partial)
        })
        .ok_or(Stuck)?;
        g.exact(&t, &target, cfg.max_depth)?
    } else {
        g.term(&full, &t, cfg.max_depth)?
    };
    Ok(CbnProgram {
        mode: cfg.mode,
        decls,
        main,
        lambdas: Default::default(),
    })
}
