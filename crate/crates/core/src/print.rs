//! Concrete-syntax printers for both calculi. Output re-parses to an
//! alpha-equivalent AST (see `parse`).

use std::fmt::{self, Display, Formatter, Write};

use crate::attrs::AttrVec;
use crate::cbn::{CbnTerm, CbnType};
use crate::cbpv::{Comp, CompType, ElabComp, ElabValue, ValType, Value};

// Type levels: arrows and sums print bare only at TY.
const TY: u8 = 0;
const PROD: u8 = 1;
const ATOM: u8 = 2;

fn paren(
    f: &mut Formatter<'_>,
    wrap: bool,
    body: impl FnOnce(&mut Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    if wrap {
        f.write_char('(')?;
        body(f)?;
        f.write_char(')')
    } else {
        body(f)
    }
}

fn cbn_type_level(t: &CbnType) -> u8 {
    match t {
        CbnType::Unit => ATOM,
        t if t.is_bool() => ATOM,
        CbnType::Prod(..) => PROD,
        CbnType::Sum(..) | CbnType::Arrow(_) => TY,
    }
}

fn cbn_type(f: &mut Formatter<'_>, t: &CbnType, level: u8) -> fmt::Result {
    paren(f, cbn_type_level(t) < level, |f| match t {
        CbnType::Unit => f.write_str("unit"),
        t if t.is_bool() => f.write_str("Bool"),
        CbnType::Prod(a, g1, b, g2) => {
            component(f, a, g1, ATOM)?;
            f.write_str(" * ")?;
            component(f, b, g2, PROD)
        }
        CbnType::Sum(a, g1, b, g2) => {
            component(f, a, g1, PROD)?;
            f.write_str(" + ")?;
            component(f, b, g2, TY)
        }
        CbnType::Arrow(ar) => {
            write!(f, "({} :{} ", ar.x, ar.attr)?;
            component(f, &ar.arg, &ar.arg_latent, TY)?;
            f.write_str(") ")?;
            if ar.latent.is_default() {
                f.write_str("-> ")?;
            } else {
                write!(f, "-[{}]-> ", ar.latent)?;
            }
            cbn_type(f, &ar.ret, TY)
        }
    })
}

/// A type with an attached vector, printed `T^γ` (vector omitted when
/// default). A non-default vector forces the type itself to atom level.
fn component(f: &mut Formatter<'_>, t: &CbnType, g: &AttrVec, level: u8) -> fmt::Result {
    if g.is_default() {
        cbn_type(f, t, level)
    } else {
        cbn_type(f, t, ATOM)?;
        write!(f, "^{g}")
    }
}

impl Display for CbnType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        cbn_type(f, self, TY)
    }
}

// Term levels: binding forms extend to the right and print bare only at
// BIND; applications at APP; prefix forms and atoms at PRE.
const BIND: u8 = 0;
const APP: u8 = 1;
const PRE: u8 = 2;
const TATOM: u8 = 3;

fn is_if(x1: &crate::attrs::VarId, x2: &crate::attrs::VarId) -> bool {
    x1.name() == "_" && x2.name() == "_"
}

fn cbn_level(e: &CbnTerm) -> u8 {
    match e {
        CbnTerm::Unit | CbnTerm::Var(_) | CbnTerm::Pair(..) => TATOM,
        CbnTerm::Inl(b, t) | CbnTerm::Inr(b, t) if **b == CbnTerm::Unit && t.is_bool() => TATOM,
        CbnTerm::Inl(..) | CbnTerm::Inr(..) | CbnTerm::Sub { .. } => PRE,
        CbnTerm::App(..) => APP,
        _ => BIND,
    }
}

fn cbn_term(f: &mut Formatter<'_>, e: &CbnTerm, level: u8) -> fmt::Result {
    paren(f, cbn_level(e) < level, |f| match e {
        CbnTerm::Unit => f.write_str("()"),
        CbnTerm::Var(x) => write!(f, "{x}"),
        CbnTerm::Inl(b, t) if **b == CbnTerm::Unit && t.is_bool() => f.write_str("true"),
        CbnTerm::Inr(b, t) if **b == CbnTerm::Unit && t.is_bool() => f.write_str("false"),
        CbnTerm::Inl(b, t) | CbnTerm::Inr(b, t) => {
            let kw = if matches!(e, CbnTerm::Inl(..)) {
                "inl"
            } else {
                "inr"
            };
            write!(f, "{kw}[{t}] ")?;
            cbn_term(f, b, TATOM)
        }
        CbnTerm::Pair(a, b) => {
            f.write_char('(')?;
            cbn_term(f, a, BIND)?;
            f.write_str(", ")?;
            cbn_term(f, b, BIND)?;
            f.write_char(')')
        }
        CbnTerm::Lam {
            x,
            arg,
            arg_latent,
            body,
        } => {
            write!(f, "fn {x} : ")?;
            component(f, arg, arg_latent, TY)?;
            f.write_str(" . ")?;
            cbn_term(f, body, BIND)
        }
        CbnTerm::App(a, b) => {
            cbn_term(f, a, APP)?;
            f.write_char(' ')?;
            cbn_term(f, b, TATOM)
        }
        CbnTerm::Let { x, bound, body } => {
            write!(f, "let {x} = ")?;
            cbn_term(f, bound, BIND)?;
            f.write_str(" in ")?;
            cbn_term(f, body, BIND)
        }
        CbnTerm::Sub { target, body } => {
            write!(f, "sub[{target}] ")?;
            cbn_term(f, body, TATOM)
        }
        CbnTerm::Seq(a, b) => {
            cbn_term(f, a, APP)?;
            f.write_str("; ")?;
            cbn_term(f, b, BIND)
        }
        CbnTerm::Split {
            x1,
            x2,
            scrut,
            body,
        } => {
            write!(f, "let ({x1}, {x2}) = ")?;
            cbn_term(f, scrut, BIND)?;
            f.write_str(" in ")?;
            cbn_term(f, body, BIND)
        }
        CbnTerm::Case {
            scrut,
            x1,
            left,
            x2,
            right,
        } => {
            if is_if(x1, x2) {
                f.write_str("if ")?;
                cbn_term(f, scrut, BIND)?;
                f.write_str(" then ")?;
                cbn_term(f, left, BIND)?;
                f.write_str(" else ")?;
                cbn_term(f, right, BIND)
            } else {
                f.write_str("case ")?;
                cbn_term(f, scrut, BIND)?;
                write!(f, " of inl {x1} -> ")?;
                cbn_term(f, left, APP)?;
                write!(f, " | inr {x2} -> ")?;
                cbn_term(f, right, BIND)
            }
        }
    })
}

impl Display for CbnTerm {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        cbn_term(f, self, BIND)
    }
}

fn is_bool_val(t: &ValType) -> bool {
    matches!(t, ValType::Sum(a, b) if **a == ValType::Unit && **b == ValType::Unit)
}

fn val_type_level(t: &ValType) -> u8 {
    match t {
        ValType::Unit | ValType::U(..) => ATOM,
        t if is_bool_val(t) => ATOM,
        ValType::Prod(..) => PROD,
        ValType::Sum(..) => TY,
    }
}

fn val_type(f: &mut Formatter<'_>, t: &ValType, level: u8) -> fmt::Result {
    paren(f, val_type_level(t) < level, |f| match t {
        ValType::Unit => f.write_str("unit"),
        t if is_bool_val(t) => f.write_str("Bool"),
        ValType::U(g, b) => {
            write!(f, "U[{g}] ")?;
            comp_type(f, b, ATOM)
        }
        ValType::Prod(a, b) => {
            val_type(f, a, ATOM)?;
            f.write_str(" * ")?;
            val_type(f, b, PROD)
        }
        ValType::Sum(a, b) => {
            val_type(f, a, PROD)?;
            f.write_str(" + ")?;
            val_type(f, b, TY)
        }
    })
}

fn comp_type(f: &mut Formatter<'_>, t: &CompType, level: u8) -> fmt::Result {
    match t {
        CompType::F(a) => {
            f.write_str("F ")?;
            val_type(f, a, ATOM)
        }
        CompType::Arrow(a, attr, b) => paren(f, level > TY, |f| {
            val_type(f, a, ATOM)?;
            write!(f, " ^{attr} -> ")?;
            comp_type(f, b, TY)
        }),
    }
}

impl Display for ValType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        val_type(f, self, TY)
    }
}

impl Display for CompType {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        comp_type(f, self, TY)
    }
}

fn value(f: &mut Formatter<'_>, v: &Value, atom: bool) -> fmt::Result {
    match v {
        Value::Unit => f.write_str("()"),
        Value::Var(x) => write!(f, "{x}"),
        Value::Thunk(m) => {
            f.write_str("thunk { ")?;
            comp(f, m, BIND)?;
            f.write_str(" }")
        }
        Value::Inl(w, t) if **w == Value::Unit && is_bool_val(t) => f.write_str("true"),
        Value::Inr(w, t) if **w == Value::Unit && is_bool_val(t) => f.write_str("false"),
        Value::Inl(w, t) | Value::Inr(w, t) => paren(f, atom, |f| {
            let kw = if matches!(v, Value::Inl(..)) {
                "inl"
            } else {
                "inr"
            };
            write!(f, "{kw}[{t}] ")?;
            value(f, w, true)
        }),
        Value::Pair(a, b) => {
            f.write_char('(')?;
            value(f, a, false)?;
            f.write_str(", ")?;
            value(f, b, false)?;
            f.write_char(')')
        }
    }
}

fn comp_level(m: &Comp) -> u8 {
    match m {
        Comp::Force(_) | Comp::Ret(_) | Comp::Sub { .. } => PRE,
        Comp::App(..) => APP,
        _ => BIND,
    }
}

fn comp(f: &mut Formatter<'_>, m: &Comp, level: u8) -> fmt::Result {
    paren(f, comp_level(m) < level, |f| match m {
        Comp::Lam { x, arg, body } => {
            write!(f, "fn {x} : {arg} . ")?;
            comp(f, body, BIND)
        }
        Comp::App(g, v) => {
            comp(f, g, APP)?;
            f.write_char(' ')?;
            value(f, v, true)
        }
        Comp::Force(v) => {
            f.write_str("force ")?;
            value(f, v, true)
        }
        Comp::Ret(v) => {
            f.write_str("ret ")?;
            value(f, v, true)
        }
        Comp::Let { x, bound, body } => {
            write!(f, "{x} <- ")?;
            comp(f, bound, BIND)?;
            f.write_str(" in ")?;
            comp(f, body, BIND)
        }
        Comp::Split {
            x1,
            x2,
            scrut,
            body,
        } => {
            write!(f, "split ({x1}, {x2}) = ")?;
            value(f, scrut, false)?;
            f.write_str(" in ")?;
            comp(f, body, BIND)
        }
        Comp::Sub { target, body } => {
            write!(f, "sub[{target}] ")?;
            comp(f, body, PRE)
        }
        Comp::Seq(v, body) => {
            value(f, v, false)?;
            f.write_str("; ")?;
            comp(f, body, BIND)
        }
        Comp::Case {
            scrut,
            x1,
            left,
            x2,
            right,
        } => {
            if is_if(x1, x2) {
                f.write_str("if ")?;
                value(f, scrut, false)?;
                f.write_str(" then ")?;
                comp(f, left, BIND)?;
                f.write_str(" else ")?;
                comp(f, right, BIND)
            } else {
                f.write_str("case ")?;
                value(f, scrut, false)?;
                write!(f, " of inl {x1} -> ")?;
                comp(f, left, APP)?;
                write!(f, " | inr {x2} -> ")?;
                comp(f, right, BIND)
            }
        }
    })
}

impl Display for Value {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        value(f, self, false)
    }
}

impl Display for Comp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        comp(f, self, BIND)
    }
}

impl Display for ElabValue {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        value(f, &self.erase(), false)
    }
}

impl Display for ElabComp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        comp(f, &self.erase(), BIND)
    }
}

impl Display for crate::parse::CbnProgram {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "lang cbn")?;
        writeln!(f, "mode {}", self.mode)?;
        for d in &self.decls {
            write!(f, "var {} : ", d.x)?;
            match &d.latent {
                Some(g) => component(f, &d.ty, g, TY)?,
                None => cbn_type(f, &d.ty, TY)?,
            }
            writeln!(f, " = {}", d.term)?;
        }
        writeln!(f, "main = {}", self.main)
    }
}

impl Display for crate::parse::CbpvProgram {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "lang cbpv")?;
        writeln!(f, "mode {}", self.mode)?;
        for d in &self.decls {
            writeln!(f, "var {} : {} = {}", d.x, d.ty, d.value)?;
        }
        writeln!(f, "main = {}", self.main)
    }
}

impl Display for crate::parse::Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            crate::parse::Program::Cbn(p) => p.fmt(f),
            crate::parse::Program::Cbpv(p) => p.fmt(f),
        }
    }
}
