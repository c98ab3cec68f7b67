//! Typing invariants checked over generated programs.

use std::collections::BTreeSet;

use proptest::prelude::*;
use strictness::attrs::{Attr, AttrVec, Fresh, Mode};
use strictness::cbn::{cbn_synth, cbn_type_equal, vec_agree, CbnTerm};
use strictness::cbpv::{cbpv_synth_comp, cbpv_synth_value, comp_type_equal, Comp, ValType, Value};
use strictness::eval::{eq_mod_gamma, Missing};
use strictness::metatheory::{gen_cbn_program, gen_cbpv_program, GenConfig, Goal};
use strictness::program::{build_env, translate_program, CheckedCbn, CheckedCbpv};

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Base), Just(Mode::Extended)]
}

fn config(seed: u64, mode: Mode) -> GenConfig {
    GenConfig {
        max_depth: 6,
        max_scope: 4,
        ..GenConfig::new(seed, mode)
    }
}

fn cbn(seed: u64, mode: Mode) -> CheckedCbn {
    gen_cbn_program(&config(seed, mode), Goal::Any)
        .expect("generation")
        .0
}

fn cbpv(seed: u64, mode: Mode) -> CheckedCbpv {
    gen_cbpv_program(&config(seed, mode), Goal::Any)
        .expect("generation")
        .0
}

/// Occurrences of `name` as a whole identifier in `text`.
fn occurrences(text: &str, name: &str) -> usize {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '\''))
        .filter(|t| *t == name)
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cbn_synthesis_is_deterministic(seed in any::<u64>(), mode in mode()) {
        let c = cbn(seed, mode);
        let j = cbn_synth(&c.ctx, &c.program.main, mode).unwrap();
        prop_assert_eq!(&j.effect, &c.main.effect);
        prop_assert!(cbn_type_equal(&j.ty, &c.main.ty));
    }

    #[test]
    fn an_unused_binding_changes_nothing_else(seed in any::<u64>(), mode in mode()) {
        let c = cbn(seed, mode);
        let mut ctx = c.ctx.clone();
        let w = Fresh::above(c.ctx.max_var_id().max(c.program.main.max_var_id())).fresh("w");
        ctx.push(w.clone(), strictness::cbn::CbnType::Unit, AttrVec::default_over(mode, c.ctx.scope()));
        let j = cbn_synth(&ctx, &c.program.main, mode).unwrap();
        prop_assert_eq!(j.effect.get(&w), mode.default_attr());
        prop_assert!(vec_agree(&j.effect, &c.main.effect));
        prop_assert!(cbn_type_equal(&j.ty, &c.main.ty));
    }

    #[test]
    fn subsumption_at_the_synthesized_effect_is_an_identity(seed in any::<u64>(), mode in mode()) {
        let c = cbn(seed, mode);
        let e = CbnTerm::Sub { target: c.main.effect.clone(), body: Box::new(c.program.main.clone()) };
        let j = cbn_synth(&c.ctx, &e, mode).unwrap();
        prop_assert_eq!(&j.effect, &c.main.effect);
        prop_assert!(cbn_type_equal(&j.ty, &c.main.ty));

        let p = cbpv(seed, mode);
        let m = Comp::Sub { target: p.main.effect.clone(), body: Box::new(p.program.main.clone()) };
        let j = cbpv_synth_comp(&p.ctx, &m, mode).unwrap();
        prop_assert_eq!(&j.effect, &p.main.effect);
        prop_assert!(comp_type_equal(&j.ty, &p.main.ty));
    }

    #[test]
    fn judgments_are_scoped_by_their_context(seed in any::<u64>(), mode in mode()) {
        let c = cbn(seed, mode);
        prop_assert_eq!(c.main.effect.scope(), &c.ctx.scope());
        prop_assert!(c.main.ty.scoped_exactly(&c.ctx.scope()));
        let p = cbpv(seed, mode);
        prop_assert_eq!(p.main.effect.scope(), &p.ctx.scope());
        prop_assert!(p.main.ty.scoped_exactly(&p.ctx.scope()));
    }

    #[test]
    fn forcing_a_thunk_variable_releases_its_vector(seed in any::<u64>(), mode in mode()) {
        let p = cbpv(seed, mode);
        for (x, a) in p.ctx.entries() {
            let ValType::U(g, _) = a else { continue };
            let expected = AttrVec::from_entries(
                mode,
                p.ctx.scope(),
                g.entries().iter().map(|(y, b)| (y.clone(), *b)).chain([(x.clone(), Attr::Strict)]),
            ).unwrap();
            let forced = cbpv_synth_comp(&p.ctx, &Comp::force(Value::Var(x.clone())), mode).unwrap();
            prop_assert_eq!(&forced.effect, &expected);

            let wrapped = cbpv_synth_value(&p.ctx, &Value::thunk(Comp::force(Value::Var(x.clone()))), mode).unwrap();
            prop_assert_eq!(wrapped.effect.get(x), Attr::Lazy);
            let ValType::U(h, _) = &wrapped.ty else { panic!("thunk of type {:?}", wrapped.ty) };
            prop_assert!(vec_agree(h, &expected));
        }
    }

    #[test]
    fn application_agrees_with_binding_a_returned_argument(seed in any::<u64>(), mode in mode()) {
        let p = cbpv(seed, mode);
        let Some((z, a)) = p.ctx.entries().last().cloned() else { return Ok(()) };
        let mut ctx = strictness::cbpv::CbpvCtx::new();
        for (x, b) in &p.ctx.entries()[..p.ctx.entries().len() - 1] {
            ctx.push(x.clone(), b.clone());
        }
        let y = Fresh::above(p.max_id()).fresh("y");
        ctx.push(y.clone(), a.clone());
        let lam = Comp::Lam { x: z.clone(), arg: a, body: Box::new(p.program.main.clone()) };
        let app = Comp::App(Box::new(lam), Box::new(Value::Var(y.clone())));
        let bind = Comp::Let {
            x: z.clone(),
            bound: Box::new(Comp::ret(Value::Var(y.clone()))),
            body: Box::new(p.program.main.clone()),
        };
        let (j, k) = (cbpv_synth_comp(&ctx, &app, mode).unwrap(), cbpv_synth_comp(&ctx, &bind, mode).unwrap());
        prop_assert_eq!(j.effect.get(&y), Attr::Strict);
        prop_assert_eq!(&j.effect, &k.effect);
        prop_assert!(comp_type_equal(&j.ty, &k.ty));
        prop_assert!(comp_type_equal(&j.ty, &p.main.ty.downshift(&z)));
    }

    #[test]
    fn returning_a_thunk_lazifies_its_body(seed in any::<u64>()) {
        let p = cbpv(seed, Mode::Extended);
        let m = Comp::ret(Value::thunk(p.program.main.clone()));
        let j = cbpv_synth_comp(&p.ctx, &m, Mode::Extended).unwrap();
        prop_assert_eq!(&j.effect, &p.main.effect.lazify());
    }

    #[test]
    fn unmentioned_bindings_are_unused(seed in any::<u64>()) {
        let p = cbpv(seed, Mode::Extended);
        let text = p.program.to_string();
        for (x, _) in p.ctx.entries() {
            if occurrences(&text, x.name()) == 1 {
                prop_assert_eq!(p.main.effect.get(x), Attr::Unused, "{} in\n{}", x, text);
            }
        }
    }

    #[test]
    fn erased_and_instrumented_runs_agree(seed in any::<u64>(), mode in mode()) {
        let p = cbpv(seed, mode);
        let none = BTreeSet::new();
        let (mut ei, mut ee) = (p.instrumented(), p.erased());
        let (bi, be) = (build_env(&p, &mut ei, &none), build_env(&p, &mut ee, &none));
        let (oi, oe) = (ei.eval_comp(&bi.env, &p.main.elab), ee.eval_comp(&be.env, &p.main.elab));
        prop_assert_eq!(oi.is_success(), oe.is_success());
        if let (Some(a), Some(b)) = (oi.terminal(), oe.terminal()) {
            prop_assert!(eq_mod_gamma(a, b, Missing::Exact));
        }
    }

    #[test]
    fn distinct_programs_translate_differently(a in any::<u64>(), b in any::<u64>(), mode in mode()) {
        let (p, q) = (cbn(a, mode), cbn(b, mode));
        prop_assume!(p.program.to_string() != q.program.to_string());
        let (tp, tq) = (translate_program(&p).unwrap(), translate_program(&q).unwrap());
        prop_assert_ne!(tp.to_string(), tq.to_string());
    }
}
