//! Generator and campaign behaviour.

mod common;

use std::collections::BTreeSet;

use strictness::attrs::Mode;
use strictness::metatheory::shrink::shrink_cbpv;
use strictness::metatheory::{
    campaign, check_cbn, check_cbpv, gen_cbn_program, gen_cbpv_program, GenConfig, Goal, Theorem,
};
use strictness::parse::Lang;
use strictness::program::{check_cbpv_program, Checked};

fn config(seed: u64, mode: Mode) -> GenConfig {
    GenConfig {
        max_depth: 6,
        max_scope: 4,
        ..GenConfig::new(seed, mode)
    }
}

#[test]
fn generated_programs_are_never_rejected() {
    for mode in [Mode::Base, Mode::Extended] {
        for seed in 0..200 {
            let (_, s) = gen_cbpv_program(&config(seed, mode), Goal::Any).unwrap();
            assert_eq!(s.rejected, 0, "cbpv seed {seed}");
            let (_, s) = gen_cbn_program(&config(seed, mode), Goal::Any).unwrap();
            assert_eq!(s.rejected, 0, "cbn seed {seed}");
        }
    }
}

#[test]
fn generation_is_a_function_of_the_config() {
    for seed in 0..50 {
        let cfg = config(seed, Mode::Extended);
        let a = gen_cbpv_program(&cfg, Goal::Any)
            .unwrap()
            .0
            .program
            .to_string();
        let b = gen_cbpv_program(&cfg, Goal::Any)
            .unwrap()
            .0
            .program
            .to_string();
        assert_eq!(a, b);
        let a = gen_cbn_program(&cfg, Goal::Returner)
            .unwrap()
            .0
            .program
            .to_string();
        let b = gen_cbn_program(&cfg, Goal::Returner)
            .unwrap()
            .0
            .program
            .to_string();
        assert_eq!(a, b);
    }
}

#[test]
fn every_form_is_generated() {
    let (mut comps, mut values, mut cbn) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for seed in 0..1000 {
        let mode = if seed % 2 == 0 {
            Mode::Base
        } else {
            Mode::Extended
        };
        let (p, _) = gen_cbpv_program(&config(seed, mode), Goal::Any).unwrap();
        let mains = p
            .program
            .decls
            .iter()
            .map(|d| strictness::cbpv::Comp::ret(d.value.clone()));
        for m in mains.chain([p.program.main.clone()]) {
            m.for_each_node(
                &mut |c| {
                    comps.insert(c.form());
                },
                &mut |v| {
                    values.insert(v.form());
                },
            );
        }
        let (c, _) = gen_cbn_program(&config(seed, mode), Goal::Any).unwrap();
        for e in c
            .program
            .decls
            .iter()
            .map(|d| &d.term)
            .chain([&c.program.main])
        {
            e.for_each_subterm(&mut |t| {
                cbn.insert(t.form());
            });
        }
    }
    let want_cbpv = [
        "lam", "app", "force", "let", "split", "sub", "ret", "seq", "case", "unit", "var", "thunk",
        "inl", "inr", "pair",
    ];
    let want_cbn = [
        "unit", "var", "inl", "inr", "pair", "lam", "app", "let", "sub", "seq", "split", "case",
    ];
    let cbpv: BTreeSet<_> = comps.union(&values).copied().collect();
    for f in want_cbpv {
        assert!(cbpv.contains(f), "cbpv never generates {f}");
    }
    for f in want_cbn {
        assert!(cbn.contains(f), "cbn never generates {f}");
    }
}

#[test]
fn corpus_programs_satisfy_every_theorem() {
    for case in common::load_corpus() {
        for theorem in Theorem::ALL {
            let r = match &case.checked {
                Checked::Cbn(c) => check_cbn(theorem, c, 0),
                Checked::Cbpv(c) => check_cbpv(theorem, c, 0),
            };
            assert!(r.passed(), "{}: {r}", case.path.display());
        }
    }
}

#[test]
fn campaigns_do_not_depend_on_the_worker_count() {
    let cfg = config(17, Mode::Base);
    for (theorem, lang) in [
        (Theorem::Soundness, Lang::Cbpv),
        (Theorem::StrictFailure, Lang::Cbn),
    ] {
        let one = campaign(theorem, lang, &cfg, 24, 1).unwrap();
        let three = campaign(theorem, lang, &cfg, 24, 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.trials, 24);
        assert!(one.passed(), "{one}");
    }
}

#[test]
fn campaigns_reject_invalid_configs() {
    let cfg = GenConfig {
        max_depth: 0,
        ..config(0, Mode::Base)
    };
    assert!(campaign(Theorem::Soundness, Lang::Cbpv, &cfg, 5, 1).is_err());
}

#[test]
fn shrinking_keeps_the_property() {
    for seed in 0..20 {
        let (c, _) = gen_cbpv_program(&config(seed, Mode::Base), Goal::Returner).unwrap();
        let keep = |p: &strictness::parse::CbpvProgram| {
            check_cbpv_program(p).is_ok_and(|c| c.main.ty.to_string().starts_with('F'))
        };
        let small = shrink_cbpv(&c.program, keep);
        assert!(keep(&small), "seed {seed}");
        assert!(small.main.size() <= c.program.main.size());
    }
}
