//! Greedy shrinking of failing programs: one subterm at a time is replaced
//! by a child of it or by a unit leaf, keeping a candidate only when the
//! program still checks and still fails.

use crate::cbn::CbnTerm;
use crate::cbpv::{Comp, Value};
use crate::parse::{CbnProgram, CbpvProgram};

/// Upper bound on accepted shrinking steps.
const MAX_STEPS: usize = 500;

fn boxed<T>(t: T) -> Box<T> {
    Box::new(t)
}

fn value_candidates(v: &Value) -> Vec<Value> {
    let mut out = Vec::new();
    if *v != Value::Unit {
        out.push(Value::Unit);
    }
    match v {
        Value::Unit | Value::Var(_) => {}
        Value::Thunk(m) => {
            out.extend(comp_candidates(m).into_iter().map(Value::thunk));
        }
        Value::Inl(w, t) => {
            out.push((**w).clone());
            out.extend(
                value_candidates(w)
                    .into_iter()
                    .map(|w| Value::Inl(boxed(w), t.clone())),
            );
        }
        Value::Inr(w, t) => {
            out.push((**w).clone());
            out.extend(
                value_candidates(w)
                    .into_iter()
                    .map(|w| Value::Inr(boxed(w), t.clone())),
            );
        }
        Value::Pair(a, b) => {
            out.push((**a).clone());
            out.push((**b).clone());
            out.extend(
                value_candidates(a)
                    .into_iter()
                    .map(|a| Value::Pair(boxed(a), b.clone())),
            );
            out.extend(
                value_candidates(b)
                    .into_iter()
                    .map(|b| Value::Pair(a.clone(), boxed(b))),
            );
        }
    }
    out
}

/// Every computation obtained from `m` by replacing one subterm.
pub fn comp_candidates(m: &Comp) -> Vec<Comp> {
    let mut out = Vec::new();
    let unit = Comp::ret(Value::Unit);
    if *m != unit {
        out.push(unit);
    }
    match m {
        Comp::Lam { x, arg, body } => {
            out.push((**body).clone());
            out.extend(comp_candidates(body).into_iter().map(|b| Comp::Lam {
                x: x.clone(),
                arg: arg.clone(),
                body: boxed(b),
            }));
        }
        Comp::App(f, v) => {
            out.push((**f).clone());
            out.extend(
                comp_candidates(f)
                    .into_iter()
                    .map(|f| Comp::App(boxed(f), v.clone())),
            );
            out.extend(
                value_candidates(v)
                    .into_iter()
                    .map(|v| Comp::App(f.clone(), boxed(v))),
            );
        }
        Comp::Force(v) => {
            if let Value::Thunk(b) = &**v {
                out.push((**b).clone());
            }
            out.extend(
                value_candidates(v)
                    .into_iter()
                    .map(|v| Comp::Force(boxed(v))),
            );
        }
        Comp::Ret(v) => out.extend(value_candidates(v).into_iter().map(|v| Comp::Ret(boxed(v)))),
        Comp::Let { x, bound, body } => {
            out.push((**bound).clone());
            out.push((**body).clone());
            out.extend(comp_candidates(bound).into_iter().map(|b| Comp::Let {
                x: x.clone(),
                bound: boxed(b),
                body: body.clone(),
            }));
            out.extend(comp_candidates(body).into_iter().map(|b| Comp::Let {
                x: x.clone(),
                bound: bound.clone(),
                body: boxed(b),
            }));
        }
        Comp::Split {
            x1,
            x2,
            scrut,
            body,
        } => {
            out.push((**body).clone());
            let split = |s: Box<Value>, b: Box<Comp>| Comp::Split {
                x1: x1.clone(),
                x2: x2.clone(),
                scrut: s,
                body: b,
            };
            out.extend(
                value_candidates(scrut)
                    .into_iter()
                    .map(|s| split(boxed(s), body.clone())),
            );
            out.extend(
                comp_candidates(body)
                    .into_iter()
                    .map(|b| split(scrut.clone(), boxed(b))),
            );
        }
        Comp::Sub { target, body } => {
            out.push((**body).clone());
            out.extend(comp_candidates(body).into_iter().map(|b| Comp::Sub {
                target: target.clone(),
                body: boxed(b),
            }));
        }
        Comp::Seq(v, body) => {
            out.push((**body).clone());
            out.extend(
                value_candidates(v)
                    .into_iter()
                    .map(|v| Comp::Seq(boxed(v), body.clone())),
            );
            out.extend(
                comp_candidates(body)
                    .into_iter()
                    .map(|b| Comp::Seq(v.clone(), boxed(b))),
            );
        }
        Comp::Case {
            scrut,
            x1,
            left,
            x2,
            right,
        } => {
            out.push((**left).clone());
            out.push((**right).clone());
            let case = |s: Box<Value>, l: Box<Comp>, r: Box<Comp>| Comp::Case {
                scrut: s,
                x1: x1.clone(),
                left: l,
                x2: x2.clone(),
                right: r,
            };
            out.extend(
                value_candidates(scrut)
                    .into_iter()
                    .map(|s| case(boxed(s), left.clone(), right.clone())),
            );
            out.extend(
                comp_candidates(left)
                    .into_iter()
                    .map(|l| case(scrut.clone(), boxed(l), right.clone())),
            );
            out.extend(
                comp_candidates(right)
                    .into_iter()
                    .map(|r| case(scrut.clone(), left.clone(), boxed(r))),
            );
        }
    }
    out
}

/// Every term obtained from `e` by replacing one subterm.
pub fn cbn_candidates(e: &CbnTerm) -> Vec<CbnTerm> {
    use CbnTerm as T;
    let mut out = Vec::new();
    if *e != T::Unit {
        out.push(T::Unit);
    }
    let sub = |e: &CbnTerm| cbn_candidates(e);
    match e {
        T::Unit | T::Var(_) => {}
        T::Inl(a, t) => {
            out.push((**a).clone());
            out.extend(sub(a).into_iter().map(|a| T::Inl(boxed(a), t.clone())));
        }
        T::Inr(a, t) => {
            out.push((**a).clone());
            out.extend(sub(a).into_iter().map(|a| T::Inr(boxed(a), t.clone())));
        }
        T::Pair(a, b) | T::App(a, b) | T::Seq(a, b) => {
            let rebuild = |a: Box<CbnTerm>, b: Box<CbnTerm>| match e {
                T::Pair(..) => T::Pair(a, b),
                T::App(..) => T::App(a, b),
                _ => T::Seq(a, b),
            };
            out.push((**a).clone());
            out.push((**b).clone());
            out.extend(sub(a).into_iter().map(|a| rebuild(boxed(a), b.clone())));
            out.extend(sub(b).into_iter().map(|b| rebuild(a.clone(), boxed(b))));
        }
        T::Lam {
            x,
            arg,
            arg_latent,
            body,
        } => {
            out.push((**body).clone());
            out.extend(sub(body).into_iter().map(|b| T::Lam {
                x: x.clone(),
                arg: arg.clone(),
                arg_latent: arg_latent.clone(),
                body: boxed(b),
            }));
        }
        T::Let { x, bound, body } => {
            out.push((**bound).clone());
            out.push((**body).clone());
            out.extend(sub(bound).into_iter().map(|b| T::Let {
                x: x.clone(),
                bound: boxed(b),
                body: body.clone(),
            }));
            out.extend(sub(body).into_iter().map(|b| T::Let {
                x: x.clone(),
                bound: bound.clone(),
                body: boxed(b),
            }));
        }
        T::Sub { target, body } => {
            out.push((**body).clone());
            out.extend(sub(body).into_iter().map(|b| T::Sub {
                target: target.clone(),
                body: boxed(b),
            }));
        }
        T::Split {
            x1,
            x2,
            scrut,
            body,
        } => {
            out.push((**body).clone());
            let split = |s: Box<CbnTerm>, b: Box<CbnTerm>| T::Split {
                x1: x1.clone(),
                x2: x2.clone(),
                scrut: s,
                body: b,
            };
            out.extend(
                sub(scrut)
                    .into_iter()
                    .map(|s| split(boxed(s), body.clone())),
            );
            out.extend(
                sub(body)
                    .into_iter()
                    .map(|b| split(scrut.clone(), boxed(b))),
            );
        }
        T::Case {
            scrut,
            x1,
            left,
            x2,
            right,
        } => {
            out.push((**left).clone());
            out.push((**right).clone());
            let case = |s: Box<CbnTerm>, l: Box<CbnTerm>, r: Box<CbnTerm>| T::Case {
                scrut: s,
                x1: x1.clone(),
                left: l,
                x2: x2.clone(),
                right: r,
            };
            out.extend(
                sub(scrut)
                    .into_iter()
                    .map(|s| case(boxed(s), left.clone(), right.clone())),
            );
            out.extend(
                sub(left)
                    .into_iter()
                    .map(|l| case(scrut.clone(), boxed(l), right.clone())),
            );
            out.extend(
                sub(right)
                    .into_iter()
                    .map(|r| case(scrut.clone(), left.clone(), boxed(r))),
            );
        }
    }
    out
}

fn cbpv_size(p: &CbpvProgram) -> usize {
    p.decls.iter().map(|d| d.value.size()).sum::<usize>() + p.main.size()
}

fn cbn_size(p: &CbnProgram) -> usize {
    p.decls.iter().map(|d| d.term.size()).sum::<usize>() + p.main.size()
}

fn cbpv_program_candidates(p: &CbpvProgram) -> Vec<CbpvProgram> {
    let mut out = Vec::new();
    for i in 0..p.decls.len() {
        let mut q = p.clone();
        q.decls.remove(i);
        out.push(q);
    }
    for (i, d) in p.decls.iter().enumerate() {
        for v in value_candidates(&d.value) {
            let mut q = p.clone();
            q.decls[i].value = v;
            out.push(q);
        }
    }
    for m in comp_candidates(&p.main) {
        out.push(CbpvProgram {
            main: m,
            ..p.clone()
        });
    }
    out
}

fn cbn_program_candidates(p: &CbnProgram) -> Vec<CbnProgram> {
    let mut out = Vec::new();
    for i in 0..p.decls.len() {
        let mut q = p.clone();
        q.decls.remove(i);
        out.push(q);
    }
    for (i, d) in p.decls.iter().enumerate() {
        for t in cbn_candidates(&d.term) {
            let mut q = p.clone();
            q.decls[i].term = t;
            out.push(q);
        }
    }
    for m in cbn_candidates(&p.main) {
        out.push(CbnProgram {
            main: m,
            ..p.clone()
        });
    }
    out
}

fn greedy<P: Clone>(
    start: &P,
    size: impl Fn(&P) -> usize,
    candidates: impl Fn(&P) -> Vec<P>,
    still_fails: impl Fn(&P) -> bool,
) -> P {
    let mut cur = start.clone();
    for _ in 0..MAX_STEPS {
        let n = size(&cur);
        let next = candidates(&cur)
            .into_iter()
            .find(|q| size(q) < n && still_fails(q));
        match next {
            Some(q) => cur = q,
            None => break,
        }
    }
    cur
}

/// A locally minimal program on which `still_fails` holds. The predicate is
/// responsible for rejecting ill-typed candidates.
pub fn shrink_cbpv(p: &CbpvProgram, still_fails: impl Fn(&CbpvProgram) -> bool) -> CbpvProgram {
    greedy(p, cbpv_size, cbpv_program_candidates, still_fails)
}

pub fn shrink_cbn(p: &CbnProgram, still_fails: impl Fn(&CbnProgram) -> bool) -> CbnProgram {
    greedy(p, cbn_size, cbn_program_candidates, still_fails)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs::Mode;
    use crate::parse::{parse_program, Lang, Program};
    use crate::program::check_cbpv_program;

    fn cbpv(src: &str) -> CbpvProgram {
        match parse_program(src, Some(Lang::Cbpv), Mode::Base).unwrap() {
            Program::Cbpv(p) => p,
            Program::Cbn(_) => unreachable!(),
        }
    }

    #[test]
    fn shrinks_to_a_locally_minimal_program() {
        let p = cbpv(
            "var y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nvar u : unit = ()\n\
             main = x <- ret (u, ()) in split (a, b) = x in force t",
        );
        let small = shrink_cbpv(&p, |q| {
            check_cbpv_program(q).is_ok() && q.main.to_string().contains("force")
        });
        assert_eq!(small.main.to_string(), "force t");
        let names: Vec<&str> = small.decls.iter().map(|d| d.x.name()).collect();
        assert_eq!(names, ["y", "t"]);
    }

    #[test]
    fn candidates_never_grow() {
        let p = cbpv("main = x <- ret () in split (a, b) = ((), x) in ret b");
        for c in comp_candidates(&p.main) {
            assert!(c.size() <= p.main.size(), "{c}");
        }
    }
}
