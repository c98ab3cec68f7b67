//! The translation from the call-by-name calculus into call-by-push-value.

use crate::attrs::{AttrVec, Fresh, Mode, Scope, VarId};
use crate::cbn::{cbn_synth, CbnCtx, CbnTerm, CbnType};
use crate::cbpv::{CbpvCtx, Comp, CompType, ValType, Value};
use crate::error::TypeError;

/// `⟦τ⟧ = (B, γ')`: the translated computation type and the residual
/// vector of effects that the translation unsuspends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeTranslation {
    pub target: CompType,
    pub residual: AttrVec,
}

fn with(scope: &Scope, x: &VarId) -> Scope {
    let mut s = scope.clone();
    s.insert(x.clone());
    s
}

fn plus(a: &AttrVec, b: &AttrVec) -> AttrVec {
    a.plus(b).expect("translation vectors share one scope")
}

/// Translates `t`, whose vectors are read over `scope`.
pub fn translate_type(t: &CbnType, mode: Mode, scope: &Scope) -> TypeTranslation {
    match t {
        CbnType::Unit => TypeTranslation {
            target: CompType::f(ValType::Unit),
            residual: AttrVec::default_over(mode, scope.clone()),
        },
        CbnType::Prod(t1, g1, t2, g2) | CbnType::Sum(t1, g1, t2, g2) => {
            let p1 = translate_type(t1, mode, scope);
            let p2 = translate_type(t2, mode, scope);
            let c1 = plus(&g1.restrict(scope), &p1.residual);
            let c2 = plus(&g2.restrict(scope), &p2.residual);
            let residual = match mode {
                Mode::Base => AttrVec::default_over(mode, scope.clone()),
                Mode::Extended => plus(&c1, &c2).lazify(),
            };
            let a1 = ValType::u(c1, p1.target);
            let a2 = ValType::u(c2, p2.target);
            let a = if matches!(t, CbnType::Prod(..)) {
                ValType::prod(a1, a2)
            } else {
                ValType::sum(a1, a2)
            };
            TypeTranslation {
                target: CompType::f(a),
                residual,
            }
        }
        CbnType::Arrow(ar) => {
            let p1 = translate_type(&ar.arg, mode, scope);
            let p2 = translate_type(&ar.ret, mode, &with(scope, &ar.x));
            let arg = ValType::u(
                plus(&ar.arg_latent.restrict(scope), &p1.residual),
                p1.target,
            );
            let attr = crate::attrs::attr_plus(ar.attr, p2.residual.get(&ar.x), mode)
                .expect("attributes legal in the ambient mode");
            let target = CompType::arrow(arg, attr, p2.target.downshift(&ar.x));
            let residual = plus(&ar.latent.restrict(scope), &p2.residual.downshift(&ar.x));
            TypeTranslation { target, residual }
        }
    }
}

/// `⟦Γ, x:^γ τ⟧ = ⟦Γ⟧, x : U_{γ+γ'} B`.
pub fn translate_ctx(ctx: &CbnCtx, mode: Mode) -> CbpvCtx {
    let mut out = CbpvCtx::new();
    let mut scope = Scope::new();
    for en in ctx.entries() {
        let tr = translate_type(&en.ty, mode, &scope);
        out.push(
            en.x.clone(),
            ValType::u(plus(&en.latent.restrict(&scope), &tr.residual), tr.target),
        );
        scope.insert(en.x.clone());
    }
    out
}

/// The value type `A` of a translated type that must be `F A`.
fn returned(t: &CbnType, mode: Mode, scope: &Scope) -> ValType {
    match translate_type(t, mode, scope).target {
        CompType::F(a) => *a,
        CompType::Arrow(..) => unreachable!("unit, product and sum types translate to returners"),
    }
}

struct Translator {
    mode: Mode,
    ctx: CbnCtx,
    fresh: Fresh,
}

impl Translator {
    fn scope(&self) -> Scope {
        self.ctx.scope()
    }

    fn synth(&self, e: &CbnTerm) -> Result<crate::cbn::CbnJudgment, TypeError> {
        cbn_synth(&self.ctx, e, self.mode)
    }

    fn under<T>(
        &mut self,
        binders: Vec<(VarId, CbnType, AttrVec)>,
        f: impl FnOnce(&mut Self) -> T,
    ) -> T {
        let saved = self.ctx.clone();
        for (x, t, g) in binders {
            self.ctx.push(x, t, g);
        }
        let r = f(self);
        self.ctx = saved;
        r
    }

    /// A binder name unlikely to clash with source names.
    fn tmp(&mut self, hint: &str) -> VarId {
        let name = format!("{hint}{}", self.fresh.peek());
        self.fresh.fresh(&name)
    }

    fn thunk(&mut self, e: &CbnTerm) -> Result<Value, TypeError> {
        Ok(Value::thunk(self.term(e)?))
    }

    fn term(&mut self, e: &CbnTerm) -> Result<Comp, TypeError> {
        Ok(match e {
            CbnTerm::Unit => Comp::ret(Value::Unit),
            CbnTerm::Var(x) => Comp::force(Value::Var(x.clone())),
            CbnTerm::Lam {
                x,
                arg,
                arg_latent,
                body,
            } => {
                let scope = self.scope();
                let tr = translate_type(arg, self.mode, &scope);
                let latent = arg_latent.restrict(&scope);
                let arg_ty = ValType::u(plus(&latent, &tr.residual), tr.target);
                let body = self.under(vec![(x.clone(), arg.widen(&scope), latent)], |t| {
                    t.term(body)
                })?;
                Comp::Lam {
                    x: x.clone(),
                    arg: arg_ty,
                    body: Box::new(body),
                }
            }
            CbnTerm::App(f, a) => Comp::App(Box::new(self.term(f)?), Box::new(self.thunk(a)?)),
            CbnTerm::Let { x, bound, body } => {
                let j = self.synth(bound)?;
                let th = self.thunk(bound)?;
                let body = self.under(vec![(x.clone(), j.ty, j.effect)], |t| t.term(body))?;
                Comp::Let {
                    x: x.clone(),
                    bound: Box::new(Comp::ret(th)),
                    body: Box::new(body),
                }
            }
            CbnTerm::Seq(a, b) => {
                let y = self.tmp("s");
                let first = self.term(a)?;
                let rest = self.term(b)?;
                Comp::Let {
                    x: y.clone(),
                    bound: Box::new(first),
                    body: Box::new(Comp::Seq(Box::new(Value::Var(y)), Box::new(rest))),
                }
            }
            CbnTerm::Pair(a, b) => Comp::ret(Value::Pair(
                Box::new(self.thunk(a)?),
                Box::new(self.thunk(b)?),
            )),
            CbnTerm::Sub { target, body } => {
                let scope = self.scope();
                let j = self.synth(body)?;
                let tr = translate_type(&j.ty, self.mode, &scope);
                let target = plus(&target.restrict(&scope), &tr.residual);
                Comp::Sub {
                    target,
                    body: Box::new(self.term(body)?),
                }
            }
            CbnTerm::Inl(body, annot) | CbnTerm::Inr(body, annot) => {
                let a = returned(annot, self.mode, &self.scope());
                let th = Box::new(self.thunk(body)?);
                Comp::ret(if matches!(e, CbnTerm::Inl(..)) {
                    Value::Inl(th, a)
                } else {
                    Value::Inr(th, a)
                })
            }
            CbnTerm::Split {
                x1,
                x2,
                scrut,
                body,
            } => {
                let j = self.synth(scrut)?;
                let CbnType::Prod(t1, g1, t2, g2) = j.ty else {
                    return Err(TypeError::TypeMismatch("split of non-product".into()));
                };
                let y = self.tmp("p");
                let first = self.term(scrut)?;
                let binders = vec![(x1.clone(), *t1, g1), (x2.clone(), *t2, g2)];
                let body = self.under(binders, |t| t.term(body))?;
                Comp::Let {
                    x: y.clone(),
                    bound: Box::new(first),
                    body: Box::new(Comp::Split {
                        x1: x1.clone(),
                        x2: x2.clone(),
                        scrut: Box::new(Value::Var(y)),
                        body: Box::new(body),
                    }),
                }
            }
            CbnTerm::Case {
                scrut,
                x1,
                left,
                x2,
                right,
            } => {
                let j = self.synth(scrut)?;
                let CbnType::Sum(t1, g1, t2, g2) = j.ty else {
                    return Err(TypeError::TypeMismatch("case on non-sum".into()));
                };
                let y = self.tmp("c");
                let first = self.term(scrut)?;
                let left = self.under(vec![(x1.clone(), *t1, g1)], |t| t.term(left))?;
                let right = self.under(vec![(x2.clone(), *t2, g2)], |t| t.term(right))?;
                Comp::Let {
                    x: y.clone(),
                    bound: Box::new(first),
                    body: Box::new(Comp::Case {
                        scrut: Box::new(Value::Var(y)),
                        x1: x1.clone(),
                        left: Box::new(left),
                        x2: x2.clone(),
                        right: Box::new(right),
                    }),
                }
            }
        })
    }
}

/// Translates a term that checks under `ctx`. Binders introduced by the
/// translation come from `fresh`, which must lie above every id in use.
pub fn translate_term_with(
    ctx: &CbnCtx,
    e: &CbnTerm,
    mode: Mode,
    fresh: &mut Fresh,
) -> Result<Comp, TypeError> {
    cbn_synth(ctx, e, mode)?;
    let mut tr = Translator {
        mode,
        ctx: ctx.clone(),
        fresh: fresh.clone(),
    };
    let out = tr.term(e)?;
    *fresh = tr.fresh;
    Ok(out)
}

/// Translates a term that checks under `ctx`.
pub fn translate_term(ctx: &CbnCtx, e: &CbnTerm, mode: Mode) -> Result<Comp, TypeError> {
    let mut fresh = Fresh::above(ctx.max_var_id().max(e.max_var_id()));
    translate_term_with(ctx, e, mode, &mut fresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_cbn_type, parse_program, Program};
    use crate::program::{check_cbn_program, check_cbpv_program, translate_program};

    fn vars(names: &[&str]) -> Vec<VarId> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| VarId::new(i as u32, n))
            .collect()
    }

    fn tr(src: &str, mode: Mode, names: &[&str]) -> TypeTranslation {
        let vs = vars(names);
        let t = parse_cbn_type(src, mode, &vs).unwrap();
        translate_type(&t, mode, &vs.iter().cloned().collect())
    }

    #[test]
    fn unit_becomes_a_returner() {
        let t = tr("unit", Mode::Base, &[]);
        assert_eq!(t.target.to_string(), "F unit");
        assert!(t.residual.is_default());
    }

    #[test]
    fn components_become_thunks_carrying_their_latent_effects() {
        let t = tr("unit^{y:S} * unit", Mode::Base, &["y"]);
        assert_eq!(t.target.to_string(), "F (U[{y:S}] F unit * U[{}] F unit)");
        assert!(t.residual.is_default());
    }

    #[test]
    fn extended_residual_is_the_lazified_component_sum() {
        let t = tr("unit^{y:S, z:U} * unit^{z:?}", Mode::Extended, &["y", "z"]);
        assert_eq!(t.residual.to_string(), "{y:L, z:L}");
    }

    #[test]
    fn arrows_take_thunked_arguments() {
        let t = tr("(x :S unit^{y:S}) -[{y:S}]-> unit", Mode::Base, &["y"]);
        assert_eq!(t.target.to_string(), "U[{y:S}] F unit ^S -> F unit");
        assert_eq!(t.residual.to_string(), "{y:S}");
    }

    #[test]
    fn translated_programs_check_at_effect_plus_residual() {
        let src = "var y : Bool = true\nvar x : Bool^{y:S} * Bool = (y, true)\nmain = let (a, b) = x in a";
        let Program::Cbn(p) =
            parse_program(src, Some(crate::parse::Lang::Cbn), Mode::Base).unwrap()
        else {
            unreachable!()
        };
        let c = check_cbn_program(&p).unwrap();
        let t = check_cbpv_program(&translate_program(&c).unwrap()).unwrap();
        let expected = translate_type(&c.main.ty, Mode::Base, &c.ctx.scope());
        assert_eq!(
            t.main.effect,
            c.main.effect.plus(&expected.residual).unwrap()
        );
        assert!(crate::cbpv::comp_type_equal(&t.main.ty, &expected.target));
    }
}
