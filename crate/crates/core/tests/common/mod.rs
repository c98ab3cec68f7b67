#![allow(dead_code)]

use std::path::{Path, PathBuf};

use strictness::attrs::{AttrVec, Mode, VarId};
use strictness::cbn::cbn_type_equal;
use strictness::cbpv::comp_type_equal;
use strictness::parse::{
    parse_cbn_type, parse_comp_type, parse_program, parse_vector, Lang, Program,
};
use strictness::program::{check_program, Checked};
use strictness::report::{cbn_report, cbpv_report, StrictnessReport};

/// A corpus program with the judgment and report classifications its
/// header comments expect.
pub struct Case {
    pub path: PathBuf,
    pub src: String,
    pub program: Program,
    pub checked: Checked,
    pub effect: String,
    pub ty: String,
    /// `(name, class)` pairs from `# report:` lines.
    pub report: Vec<(String, String)>,
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

fn header(src: &str, key: &str) -> Vec<String> {
    let prefix = format!("# {key}:");
    src.lines()
        .filter_map(|l| l.strip_prefix(&prefix))
        .map(|s| s.trim().to_string())
        .collect()
}

pub fn load_corpus() -> Vec<Case> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("corpus entry").path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("cbn" | "cbpv")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let src = std::fs::read_to_string(&path).expect("readable corpus file");
            let lang = path
                .extension()
                .and_then(|e| e.to_str())
                .and_then(Lang::parse);
            let program = parse_program(&src, lang, Mode::Base)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let checked =
                check_program(&program).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let one = |key: &str| {
                let v = header(&src, key);
                assert_eq!(
                    v.len(),
                    1,
                    "{}: expected one `# {key}:` line",
                    path.display()
                );
                v[0].clone()
            };
            let (effect, ty) = (one("effect"), one("type"));
            let report = header(&src, "report")
                .into_iter()
                .map(|l| {
                    let (n, c) = l.split_once(' ').expect("`# report: name class`");
                    (n.to_string(), c.trim().to_string())
                })
                .collect();
            Case {
                path,
                src,
                program,
                checked,
                effect,
                ty,
                report,
            }
        })
        .collect()
}

fn scope_of(c: &Checked) -> Vec<VarId> {
    match c {
        Checked::Cbn(c) => c.program.decls.iter().map(|d| d.x.clone()).collect(),
        Checked::Cbpv(c) => c.program.decls.iter().map(|d| d.x.clone()).collect(),
    }
}

/// Compares main's judgment with the expected one: vectors by defaulted
/// lookup, types structurally.
pub fn judgment_matches(case: &Case) -> Result<(), String> {
    let mode = case.checked.mode();
    let scope = scope_of(&case.checked);
    let expected: AttrVec =
        parse_vector(&case.effect, mode, &scope).map_err(|e| format!("expected effect: {e}"))?;
    let (effect, ty_ok, shown) = match &case.checked {
        Checked::Cbn(c) => {
            let t = parse_cbn_type(&case.ty, mode, &scope)
                .map_err(|e| format!("expected type: {e}"))?;
            (
                c.main.effect.clone(),
                cbn_type_equal(&t, &c.main.ty),
                c.main.ty.to_string(),
            )
        }
        Checked::Cbpv(c) => {
            let t = parse_comp_type(&case.ty, mode, &scope)
                .map_err(|e| format!("expected type: {e}"))?;
            (
                c.main.effect.clone(),
                comp_type_equal(&t, &c.main.ty),
                c.main.ty.to_string(),
            )
        }
    };
    if effect != expected {
        return Err(format!(
            "{}: effect {effect}, expected {expected}",
            case.path.display()
        ));
    }
    if !ty_ok {
        return Err(format!(
            "{}: type {shown}, expected {}",
            case.path.display(),
            case.ty
        ));
    }
    Ok(())
}

pub fn report_of(c: &Checked) -> StrictnessReport {
    match c {
        Checked::Cbn(c) => cbn_report(c),
        Checked::Cbpv(c) => cbpv_report(c),
    }
}

/// Checks the report against main's judgment (a variable's class is the
/// name of its attribute) and against the `# report:` expectations.
pub fn report_matches(case: &Case) -> Result<(), String> {
    let r = report_of(&case.checked);
    let (effect, ctx_vars) = match &case.checked {
        Checked::Cbn(c) => (c.main.effect.clone(), scope_of(&case.checked)),
        Checked::Cbpv(c) => (c.main.effect.clone(), scope_of(&case.checked)),
    };
    if r.variables.len() != ctx_vars.len() {
        return Err(format!(
            "{}: report lists {} variables",
            case.path.display(),
            r.variables.len()
        ));
    }
    for (v, x) in r.variables.iter().zip(&ctx_vars) {
        let a = effect.get(x);
        if v.name != x.name() || v.attr != a.symbol() || v.class != strictness::report::classify(a)
        {
            return Err(format!(
                "{}: report line {v:?} disagrees with {x}:{a}",
                case.path.display()
            ));
        }
    }
    for (name, class) in &case.report {
        let found = r
            .variables
            .iter()
            .map(|v| (&v.name, &v.class))
            .chain(r.lambdas.iter().map(|l| (&l.binder, &l.class)))
            .find(|(n, _)| *n == name);
        match found {
            Some((_, c)) if c == class => {}
            other => {
                return Err(format!(
                    "{}: {name} reported as {other:?}, expected {class}",
                    case.path.display()
                ))
            }
        }
    }
    Ok(())
}
