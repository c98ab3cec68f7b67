//! Strictness reports: a renaming of judgment attributes into the words
//! strict, lazy, indeterminate and unused.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::attrs::{Attr, VarId};
use crate::cbn::cbn_synth_with_lambdas;
use crate::cbpv::{ElabComp, ElabValue};
use crate::parse::Loc;
use crate::program::{CheckedCbn, CheckedCbpv};

pub fn classify(a: Attr) -> &'static str {
    match a {
        Attr::Strict => "strict",
        Attr::Lazy => "lazy",
        Attr::Unknown => "indeterminate",
        Attr::Unused => "unused",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VarReport {
    pub name: String,
    pub attr: String,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LambdaReport {
    pub binder: String,
    pub line: u32,
    pub col: u32,
    pub attr: String,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StrictnessReport {
    pub lang: String,
    pub mode: String,
    pub effect: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub variables: Vec<VarReport>,
    pub lambdas: Vec<LambdaReport>,
}

fn var_report(x: &VarId, a: Attr) -> VarReport {
    VarReport {
        name: x.name().to_string(),
        attr: a.symbol().to_string(),
        class: classify(a).to_string(),
    }
}

fn lambda_reports(attrs: &BTreeMap<VarId, Attr>, locs: &BTreeMap<VarId, Loc>) -> Vec<LambdaReport> {
    let mut out: Vec<(Loc, LambdaReport)> = attrs
        .iter()
        .filter_map(|(x, a)| {
            let loc = *locs.get(x)?;
            let r = LambdaReport {
                binder: x.name().to_string(),
                line: loc.line,
                col: loc.col,
                attr: a.symbol().to_string(),
                class: classify(*a).to_string(),
            };
            Some((loc, r))
        })
        .collect();
    out.sort_by_key(|(l, _)| (l.line, l.col));
    out.into_iter().map(|(_, r)| r).collect()
}

pub fn cbn_report(c: &CheckedCbn) -> StrictnessReport {
    let (j, attrs) = cbn_synth_with_lambdas(&c.ctx, &c.program.main, c.program.mode)
        .expect("main of a checked program rechecks");
    let variables = c
        .ctx
        .entries()
        .iter()
        .map(|en| var_report(&en.x, j.effect.get(&en.x)))
        .collect();
    StrictnessReport {
        lang: "cbn".into(),
        mode: c.program.mode.as_str().into(),
        effect: j.effect.to_string(),
        ty: j.ty.to_string(),
        variables,
        lambdas: lambda_reports(&attrs, &c.program.lambdas),
    }
}

/// Argument attributes of every elaborated lambda, including those under
/// thunks.
pub fn cbpv_lambda_attrs(m: &ElabComp) -> BTreeMap<VarId, Attr> {
    fn comp(m: &ElabComp, out: &mut BTreeMap<VarId, Attr>) {
        match m {
            ElabComp::Lam { x, attr, body, .. } => {
                out.insert(x.clone(), *attr);
                comp(body, out);
            }
            ElabComp::App(f, v) => {
                comp(f, out);
                value(v, out);
            }
            ElabComp::Force(v) | ElabComp::Ret(v) => value(v, out),
            ElabComp::Let { bound, body, .. } => {
                comp(bound, out);
                comp(body, out);
            }
            ElabComp::Split { scrut, body, .. } => {
                value(scrut, out);
                comp(body, out);
            }
            ElabComp::Sub { body, .. } => comp(body, out),
            ElabComp::Seq(v, body) => {
                value(v, out);
                comp(body, out);
            }
            ElabComp::Case {
                scrut, left, right, ..
            } => {
                value(scrut, out);
                comp(left, out);
                comp(right, out);
            }
        }
    }
    fn value(v: &ElabValue, out: &mut BTreeMap<VarId, Attr>) {
        match v {
            ElabValue::Unit | ElabValue::Var(_) => {}
            ElabValue::Thunk { body, .. } => comp(body, out),
            ElabValue::Inl(w, _) | ElabValue::Inr(w, _) => value(w, out),
            ElabValue::Pair(a, b) => {
                value(a, out);
                value(b, out);
            }
        }
    }
    let mut out = BTreeMap::new();
    comp(m, &mut out);
    out
}

pub fn cbpv_report(c: &CheckedCbpv) -> StrictnessReport {
    let j = &c.main;
    let variables = c
        .ctx
        .entries()
        .iter()
        .map(|(x, _)| var_report(x, j.effect.get(x)))
        .collect();
    StrictnessReport {
        lang: "cbpv".into(),
        mode: c.program.mode.as_str().into(),
        effect: j.effect.to_string(),
        ty: j.ty.to_string(),
        variables,
        lambdas: lambda_reports(&cbpv_lambda_attrs(&j.elab), &c.program.lambdas),
    }
}

impl std::fmt::Display for StrictnessReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "effect {}", self.effect)?;
        writeln!(f, "type   {}", self.ty)?;
        for v in &self.variables {
            writeln!(f, "var {:<12} {}  {}", v.name, v.attr, v.class)?;
        }
        for l in &self.lambdas {
            writeln!(
                f,
                "fn  {:<12} {}  {}  at {}:{}",
                l.binder, l.attr, l.class, l.line, l.col
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs::Mode;
    use crate::parse::parse_program;
    use crate::program::{check_program, Checked};

    fn report(src: &str) -> StrictnessReport {
        match check_program(&parse_program(src, None, Mode::Base).unwrap()).unwrap() {
            Checked::Cbn(c) => cbn_report(&c),
            Checked::Cbpv(c) => cbpv_report(&c),
        }
    }

    #[test]
    fn classification_is_a_renaming() {
        let names: Vec<&str> = [Attr::Strict, Attr::Lazy, Attr::Unknown, Attr::Unused]
            .map(classify)
            .to_vec();
        assert_eq!(names, ["strict", "lazy", "indeterminate", "unused"]);
    }

    #[test]
    fn wrapping_an_argument_is_lazy() {
        let r = report("lang cbpv\nmain = fn y : U[{}] F unit . ret (inl[U[{y:S}] F unit + unit] thunk { force y })");
        assert_eq!(r.lambdas.len(), 1);
        let l = &r.lambdas[0];
        assert_eq!(
            (l.binder.as_str(), l.class.as_str(), l.line, l.col),
            ("y", "lazy", 2, 8)
        );
    }

    #[test]
    fn cbn_lambdas_under_binders_are_listed_in_source_order() {
        let r = report("lang cbn\nvar z : unit = ()\nmain = fn a : unit . fn b : unit . (a; z)");
        let got: Vec<(&str, &str)> = r
            .lambdas
            .iter()
            .map(|l| (l.binder.as_str(), l.class.as_str()))
            .collect();
        assert_eq!(got, [("a", "lazy"), ("b", "lazy")]);
        assert_eq!(r.variables[0].class, "lazy");
    }

    #[test]
    fn variables_follow_main_effect() {
        let r = report("lang cbpv\nvar y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nmain = force t");
        let got: Vec<(&str, &str)> = r
            .variables
            .iter()
            .map(|v| (v.name.as_str(), v.class.as_str()))
            .collect();
        assert_eq!(got, [("y", "strict"), ("t", "strict")]);
        assert_eq!(r.to_string().lines().next(), Some("effect {y:S, t:S}"));
    }
}
