//! Lexer and recursive-descent parsers for both calculi and for program
//! files.
//!
//! Program file layout:
//!
//! ```text
//! lang cbpv
//! mode base
//! var y : unit = ()
//! main = z <- (x <- ret () in ret thunk { x; ret y }) in force z
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::attrs::{Attr, AttrError, AttrVec, Fresh, Mode, Scope, VarId};
use crate::cbn::{CbnArrow, CbnTerm, CbnType};
use crate::cbpv::{Comp, CompType, ValType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{loc}: syntax error: {msg}")]
    Syntax { loc: Loc, msg: String },
    #[error("{loc}: unbound identifier `{name}`")]
    Unbound { loc: Loc, name: String },
    #[error("{loc}: duplicate declaration `{name}`")]
    Duplicate { loc: Loc, name: String },
    #[error("{loc}: {err}")]
    Attr { loc: Loc, err: AttrError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    "]->", "->", "-[", "<-", "(", ")", "{", "}", "[", "]", ",", ":", ";", ".", "^", "*", "+", "|",
    "=", "?",
];

const KEYWORDS: &[&str] = &[
    "fn", "let", "in", "case", "of", "inl", "inr", "sub", "if", "then", "else", "true", "false",
    "unit", "Bool", "thunk", "force", "ret", "split", "var", "main", "lang", "mode", "U", "F", "S",
    "L",
];

fn lex(src: &str) -> Result<Vec<(Tok, Loc)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '-' && chars.get(i + 1) == Some(&'-')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            out.push((Tok::Ident(s), loc));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len() as u32;
                out.push((Tok::Sym(s), loc));
            }
            None => {
                return Err(ParseError::Syntax {
                    loc,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push((Tok::Eof, Loc { line, col }));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Cbn,
    Cbpv,
}

impl Lang {
    pub fn parse(s: &str) -> Option<Lang> {
        match s {
            "cbn" => Some(Lang::Cbn),
            "cbpv" => Some(Lang::Cbpv),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Cbn => "cbn",
            Lang::Cbpv => "cbpv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbnDecl {
    pub x: VarId,
    pub ty: CbnType,
    /// Declared latent effect; `None` means "whatever the term synthesizes".
    pub latent: Option<AttrVec>,
    pub term: CbnTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbpvDecl {
    pub x: VarId,
    pub ty: ValType,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbnProgram {
    pub mode: Mode,
    pub decls: Vec<CbnDecl>,
    pub main: CbnTerm,
    /// Source location of every `fn`, keyed by its binder.
    pub lambdas: BTreeMap<VarId, Loc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbpvProgram {
    pub mode: Mode,
    pub decls: Vec<CbpvDecl>,
    pub main: Comp,
    pub lambdas: BTreeMap<VarId, Loc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Program {
    Cbn(CbnProgram),
    Cbpv(CbpvProgram),
}

impl Program {
    pub fn lang(&self) -> Lang {
        match self {
            Program::Cbn(_) => Lang::Cbn,
            Program::Cbpv(_) => Lang::Cbpv,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Program::Cbn(p) => p.mode,
            Program::Cbpv(p) => p.mode,
        }
    }
}

/// A parser over one token stream. Identifiers resolve against a stack of
/// visible binders; every binder gets a fresh `VarId`.
pub struct Parser {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
    mode: Mode,
    fresh: Fresh,
    names: Vec<VarId>,
    lambdas: BTreeMap<VarId, Loc>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub fn new(src: &str, mode: Mode) -> PResult<Parser> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            mode,
            fresh: Fresh::new(),
            names: Vec::new(),
            lambdas: BTreeMap::new(),
        })
    }

    /// Makes `vars` visible (outermost first) and keeps fresh ids above them.
    pub fn with_scope(mut self, vars: &[VarId]) -> Parser {
        let max = vars.iter().map(|v| v.id()).max();
        if let Some(m) = max {
            self.fresh = Fresh::above(m.max(self.fresh.peek()));
        }
        self.names.extend(vars.iter().cloned());
        self
    }

    pub fn lambdas(&self) -> &BTreeMap<VarId, Loc> {
        &self.lambdas
    }

    pub fn fresh_supply(&self) -> Fresh {
        self.fresh.clone()
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax {
            loc: self.loc(),
            msg: msg.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.peek()))
        }
    }

    fn is_ident_start(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
    }

    /// A new binder name (not yet visible).
    fn binder_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected an identifier, found {t}")),
        }
    }

    fn bind(&mut self, name: &str) -> VarId {
        let v = self.fresh.fresh(name);
        self.names.push(v.clone());
        v
    }

    fn unbind(&mut self, n: usize) {
        let len = self.names.len();
        self.names.truncate(len - n);
    }

    fn resolve(&mut self) -> PResult<VarId> {
        let loc = self.loc();
        let name = self.binder_name()?;
        if name == "_" {
            return Err(ParseError::Unbound { loc, name });
        }
        self.names
            .iter()
            .rev()
            .find(|v| v.name() == name)
            .cloned()
            .ok_or(ParseError::Unbound { loc, name })
    }

    fn scope(&self) -> Scope {
        // Shadowed names stay in scope as distinct ids.
        self.names.iter().cloned().collect()
    }

    fn default_vec(&self) -> AttrVec {
        AttrVec::default_over(self.mode, self.scope())
    }

    fn attr(&mut self) -> PResult<Attr> {
        let loc = self.loc();
        let a = match self.bump() {
            Tok::Sym("?") => Attr::Unknown,
            Tok::Ident(s) => match Attr::from_symbol(&s) {
                Some(a) => a,
                None => {
                    return Err(ParseError::Syntax {
                        loc,
                        msg: format!("expected an attribute, found `{s}`"),
                    })
                }
            },
            t => {
                return Err(ParseError::Syntax {
                    loc,
                    msg: format!("expected an attribute, found {t}"),
                })
            }
        };
        if !a.legal_in(self.mode) {
            return Err(ParseError::Attr {
                loc,
                err: AttrError::IllegalAttribute,
            });
        }
        Ok(a)
    }

    /// `{x:S, y:?}` over the visible scope.
    pub fn vector(&mut self) -> PResult<AttrVec> {
        let loc = self.loc();
        self.expect_sym("{")?;
        let mut entries = Vec::new();
        if !self.eat_sym("}") {
            loop {
                let x = self.resolve()?;
                self.expect_sym(":")?;
                let a = self.attr()?;
                entries.push((x, a));
                if self.eat_sym("}") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        AttrVec::from_entries(self.mode, self.scope(), entries)
            .map_err(|err| ParseError::Attr { loc, err })
    }

    // ---- CBN types ----

    /// A CBN type with an optional trailing `^γ`.
    pub fn cbn_component(&mut self) -> PResult<(CbnType, Option<AttrVec>)> {
        self.cbn_sum()
    }

    pub fn cbn_type(&mut self) -> PResult<CbnType> {
        let (t, g) = self.cbn_sum()?;
        if g.is_some() {
            return self.err("unexpected latent vector on a type");
        }
        Ok(t)
    }

    fn or_default(&self, g: Option<AttrVec>) -> AttrVec {
        g.unwrap_or_else(|| self.default_vec())
    }

    fn cbn_sum(&mut self) -> PResult<(CbnType, Option<AttrVec>)> {
        let (a, ga) = self.cbn_prod()?;
        if self.eat_sym("+") {
            let (b, gb) = self.cbn_sum()?;
            let (ga, gb) = (self.or_default(ga), self.or_default(gb));
            return Ok((CbnType::sum(a, ga, b, gb), None));
        }
        Ok((a, ga))
    }

    fn cbn_prod(&mut self) -> PResult<(CbnType, Option<AttrVec>)> {
        let (a, ga) = self.cbn_post()?;
        if self.eat_sym("*") {
            let (b, gb) = self.cbn_prod()?;
            let (ga, gb) = (self.or_default(ga), self.or_default(gb));
            return Ok((CbnType::prod(a, ga, b, gb), None));
        }
        Ok((a, ga))
    }

    fn cbn_post(&mut self) -> PResult<(CbnType, Option<AttrVec>)> {
        let (t, g) = self.cbn_atom()?;
        if self.eat_sym("^") {
            if g.is_some() {
                return self.err("two latent vectors on one type");
            }
            let g = self.vector()?;
            return Ok((t, Some(g)));
        }
        Ok((t, g))
    }

    fn cbn_atom(&mut self) -> PResult<(CbnType, Option<AttrVec>)> {
        if self.eat_kw("unit") {
            return Ok((CbnType::Unit, None));
        }
        if self.eat_kw("Bool") {
            return Ok((CbnType::bool_over(self.mode, &self.scope()), None));
        }
        if self.is_sym("(")
            && matches!(self.peek_at(1), Tok::Ident(_))
            && *self.peek_at(2) == Tok::Sym(":")
        {
            self.bump();
            let name = self.binder_name()?;
            self.expect_sym(":")?;
            let attr = self.attr()?;
            let (arg, arg_latent) = self.cbn_component()?;
            let arg_latent = self.or_default(arg_latent);
            self.expect_sym(")")?;
            let latent = if self.eat_sym("->") {
                self.default_vec()
            } else {
                self.expect_sym("-[")?;
                let g = self.vector()?;
                self.expect_sym("]->")?;
                g
            };
            let x = self.bind(&name);
            let ret = self.cbn_type();
            self.unbind(1);
            let ret = ret?;
            let ar = CbnArrow {
                x,
                attr,
                arg,
                arg_latent,
                latent,
                ret,
            };
            return Ok((CbnType::Arrow(Box::new(ar)), None));
        }
        if self.eat_sym("(") {
            let r = self.cbn_component()?;
            self.expect_sym(")")?;
            return Ok(r);
        }
        self.err(format!("expected a type, found {}", self.peek()))
    }

    // ---- CBN terms ----

    pub fn cbn_term(&mut self) -> PResult<CbnTerm> {
        let loc = self.loc();
        if self.eat_kw("fn") {
            let name = self.binder_name()?;
            self.expect_sym(":")?;
            let (arg, g) = self.cbn_component()?;
            let arg_latent = self.or_default(g);
            self.expect_sym(".")?;
            let x = self.bind(&name);
            self.lambdas.insert(x.clone(), loc);
            let body = self.cbn_term();
            self.unbind(1);
            return Ok(CbnTerm::Lam {
                x,
                arg,
                arg_latent,
                body: Box::new(body?),
            });
        }
        if self.eat_kw("let") {
            if self.eat_sym("(") {
                let n1 = self.binder_name()?;
                self.expect_sym(",")?;
                let n2 = self.binder_name()?;
                self.expect_sym(")")?;
                self.expect_sym("=")?;
                let scrut = self.cbn_term()?;
                self.expect_kw("in")?;
                let x1 = self.bind(&n1);
                let x2 = self.bind(&n2);
                let body = self.cbn_term();
                self.unbind(2);
                return Ok(CbnTerm::Split {
                    x1,
                    x2,
                    scrut: Box::new(scrut),
                    body: Box::new(body?),
                });
            }
            let name = self.binder_name()?;
            self.expect_sym("=")?;
            let bound = self.cbn_term()?;
            self.expect_kw("in")?;
            let x = self.bind(&name);
            let body = self.cbn_term();
            self.unbind(1);
            return Ok(CbnTerm::Let {
                x,
                bound: Box::new(bound),
                body: Box::new(body?),
            });
        }
        if self.eat_kw("case") {
            let scrut = self.cbn_term()?;
            self.expect_kw("of")?;
            self.expect_kw("inl")?;
            let n1 = self.binder_name()?;
            self.expect_sym("->")?;
            let x1 = self.bind(&n1);
            let left = self.cbn_term();
            self.unbind(1);
            let left = left?;
            self.expect_sym("|")?;
            self.expect_kw("inr")?;
            let n2 = self.binder_name()?;
            self.expect_sym("->")?;
            let x2 = self.bind(&n2);
            let right = self.cbn_term();
            self.unbind(1);
            return Ok(CbnTerm::Case {
                scrut: Box::new(scrut),
                x1,
                left: Box::new(left),
                x2,
                right: Box::new(right?),
            });
        }
        if self.eat_kw("if") {
            let scrut = self.cbn_term()?;
            self.expect_kw("then")?;
            let left = self.cbn_term()?;
            self.expect_kw("else")?;
            let right = self.cbn_term()?;
            let x1 = self.fresh.fresh("_");
            let x2 = self.fresh.fresh("_");
            return Ok(CbnTerm::Case {
                scrut: Box::new(scrut),
                x1,
                left: Box::new(left),
                x2,
                right: Box::new(right),
            });
        }
        let a = self.cbn_app()?;
        if self.eat_sym(";") {
            let b = self.cbn_term()?;
            return Ok(CbnTerm::Seq(Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    fn cbn_app(&mut self) -> PResult<CbnTerm> {
        let mut f = self.cbn_pre()?;
        while self.cbn_atom_start() {
            let a = self.cbn_atom_term()?;
            f = CbnTerm::App(Box::new(f), Box::new(a));
        }
        Ok(f)
    }

    fn cbn_atom_start(&self) -> bool {
        self.is_sym("(") || self.is_ident_start() || self.is_kw("true") || self.is_kw("false")
    }

    fn cbn_pre(&mut self) -> PResult<CbnTerm> {
        for (kw, left) in [("inl", true), ("inr", false)] {
            if self.eat_kw(kw) {
                self.expect_sym("[")?;
                let t = self.cbn_type()?;
                self.expect_sym("]")?;
                let e = Box::new(self.cbn_atom_term()?);
                return Ok(if left {
                    CbnTerm::Inl(e, t)
                } else {
                    CbnTerm::Inr(e, t)
                });
            }
        }
        if self.eat_kw("sub") {
            self.expect_sym("[")?;
            let target = self.vector()?;
            self.expect_sym("]")?;
            let body = self.cbn_atom_term()?;
            return Ok(CbnTerm::Sub {
                target,
                body: Box::new(body),
            });
        }
        self.cbn_atom_term()
    }

    fn cbn_atom_term(&mut self) -> PResult<CbnTerm> {
        if self.eat_kw("true") {
            return Ok(CbnTerm::Inl(
                Box::new(CbnTerm::Unit),
                CbnType::bool_over(self.mode, &self.scope()),
            ));
        }
        if self.eat_kw("false") {
            return Ok(CbnTerm::Inr(
                Box::new(CbnTerm::Unit),
                CbnType::bool_over(self.mode, &self.scope()),
            ));
        }
        if self.eat_sym("(") {
            if self.eat_sym(")") {
                return Ok(CbnTerm::Unit);
            }
            let a = self.cbn_term()?;
            if self.eat_sym(",") {
                let b = self.cbn_term()?;
                self.expect_sym(")")?;
                return Ok(CbnTerm::Pair(Box::new(a), Box::new(b)));
            }
            self.expect_sym(")")?;
            return Ok(a);
        }
        if self.is_ident_start() {
            return Ok(CbnTerm::Var(self.resolve()?));
        }
        self.err(format!("expected a term, found {}", self.peek()))
    }

    // ---- CBPV types ----

    pub fn val_type(&mut self) -> PResult<ValType> {
        let a = self.val_prod()?;
        if self.eat_sym("+") {
            return Ok(ValType::sum(a, self.val_type()?));
        }
        Ok(a)
    }

    fn val_prod(&mut self) -> PResult<ValType> {
        let a = self.val_atom()?;
        if self.eat_sym("*") {
            return Ok(ValType::prod(a, self.val_prod()?));
        }
        Ok(a)
    }

    fn val_atom(&mut self) -> PResult<ValType> {
        if self.eat_kw("unit") {
            return Ok(ValType::Unit);
        }
        if self.eat_kw("Bool") {
            return Ok(ValType::sum(ValType::Unit, ValType::Unit));
        }
        if self.eat_kw("U") {
            self.expect_sym("[")?;
            let g = self.vector()?;
            self.expect_sym("]")?;
            let b = if self.eat_sym("(") {
                let b = self.comp_type()?;
                self.expect_sym(")")?;
                b
            } else {
                self.expect_kw("F")?;
                CompType::f(self.val_atom()?)
            };
            return Ok(ValType::u(g, b));
        }
        if self.eat_sym("(") {
            let a = self.val_type()?;
            self.expect_sym(")")?;
            return Ok(a);
        }
        self.err(format!("expected a value type, found {}", self.peek()))
    }

    pub fn comp_type(&mut self) -> PResult<CompType> {
        if self.eat_kw("F") {
            return Ok(CompType::f(self.val_atom()?));
        }
        let save = self.pos;
        match self.val_type() {
            Ok(a) if self.is_sym("^") => {
                self.bump();
                let attr = self.attr()?;
                self.expect_sym("->")?;
                let b = self.comp_type()?;
                Ok(CompType::arrow(a, attr, b))
            }
            _ => {
                self.pos = save;
                if self.eat_sym("(") {
                    let b = self.comp_type()?;
                    self.expect_sym(")")?;
                    return Ok(b);
                }
                self.err(format!(
                    "expected a computation type, found {}",
                    self.peek()
                ))
            }
        }
    }

    // ---- CBPV terms ----

    pub fn value(&mut self) -> PResult<Value> {
        for (kw, left) in [("inl", true), ("inr", false)] {
            if self.eat_kw(kw) {
                self.expect_sym("[")?;
                let t = self.val_type()?;
                self.expect_sym("]")?;
                let v = Box::new(self.value_atom()?);
                return Ok(if left {
                    Value::Inl(v, t)
                } else {
                    Value::Inr(v, t)
                });
            }
        }
        self.value_atom()
    }

    fn value_atom_start(&self) -> bool {
        self.is_sym("(")
            || self.is_ident_start()
            || self.is_kw("true")
            || self.is_kw("false")
            || self.is_kw("thunk")
    }

    fn value_atom(&mut self) -> PResult<Value> {
        let bool_ty = || ValType::sum(ValType::Unit, ValType::Unit);
        if self.eat_kw("true") {
            return Ok(Value::Inl(Box::new(Value::Unit), bool_ty()));
        }
        if self.eat_kw("false") {
            return Ok(Value::Inr(Box::new(Value::Unit), bool_ty()));
        }
        if self.eat_kw("thunk") {
            self.expect_sym("{")?;
            let m = self.comp()?;
            self.expect_sym("}")?;
            return Ok(Value::thunk(m));
        }
        if self.eat_sym("(") {
            if self.eat_sym(")") {
                return Ok(Value::Unit);
            }
            let a = self.value()?;
            if self.eat_sym(",") {
                let b = self.value()?;
                self.expect_sym(")")?;
                return Ok(Value::Pair(Box::new(a), Box::new(b)));
            }
            self.expect_sym(")")?;
            return Ok(a);
        }
        if self.is_ident_start() {
            return Ok(Value::Var(self.resolve()?));
        }
        self.err(format!("expected a value, found {}", self.peek()))
    }

    pub fn comp(&mut self) -> PResult<Comp> {
        let loc = self.loc();
        if self.eat_kw("fn") {
            let name = self.binder_name()?;
            self.expect_sym(":")?;
            let arg = self.val_type()?;
            self.expect_sym(".")?;
            let x = self.bind(&name);
            self.lambdas.insert(x.clone(), loc);
            let body = self.comp();
            self.unbind(1);
            return Ok(Comp::Lam {
                x,
                arg,
                body: Box::new(body?),
            });
        }
        if self.is_ident_start() && *self.peek_at(1) == Tok::Sym("<-") {
            let name = self.binder_name()?;
            self.bump();
            let bound = self.comp()?;
            self.expect_kw("in")?;
            let x = self.bind(&name);
            let body = self.comp();
            self.unbind(1);
            return Ok(Comp::Let {
                x,
                bound: Box::new(bound),
                body: Box::new(body?),
            });
        }
        if self.eat_kw("split") {
            self.expect_sym("(")?;
            let n1 = self.binder_name()?;
            self.expect_sym(",")?;
            let n2 = self.binder_name()?;
            self.expect_sym(")")?;
            self.expect_sym("=")?;
            let scrut = self.value()?;
            self.expect_kw("in")?;
            let x1 = self.bind(&n1);
            let x2 = self.bind(&n2);
            let body = self.comp();
            self.unbind(2);
            return Ok(Comp::Split {
                x1,
                x2,
                scrut: Box::new(scrut),
                body: Box::new(body?),
            });
        }
        if self.eat_kw("case") {
            let scrut = self.value()?;
            self.expect_kw("of")?;
            self.expect_kw("inl")?;
            let n1 = self.binder_name()?;
            self.expect_sym("->")?;
            let x1 = self.bind(&n1);
            let left = self.comp();
            self.unbind(1);
            let left = left?;
            self.expect_sym("|")?;
            self.expect_kw("inr")?;
            let n2 = self.binder_name()?;
            self.expect_sym("->")?;
            let x2 = self.bind(&n2);
            let right = self.comp();
            self.unbind(1);
            return Ok(Comp::Case {
                scrut: Box::new(scrut),
                x1,
                left: Box::new(left),
                x2,
                right: Box::new(right?),
            });
        }
        if self.eat_kw("if") {
            let scrut = self.value()?;
            self.expect_kw("then")?;
            let left = self.comp()?;
            self.expect_kw("else")?;
            let right = self.comp()?;
            let x1 = self.fresh.fresh("_");
            let x2 = self.fresh.fresh("_");
            return Ok(Comp::Case {
                scrut: Box::new(scrut),
                x1,
                left: Box::new(left),
                x2,
                right: Box::new(right),
            });
        }
        if self.value_atom_start() || self.is_kw("inl") || self.is_kw("inr") {
            let save = (self.pos, self.fresh.clone(), self.names.len());
            if let Ok(v) = self.value() {
                if self.eat_sym(";") {
                    let body = self.comp()?;
                    return Ok(Comp::Seq(Box::new(v), Box::new(body)));
                }
            }
            self.pos = save.0;
            self.fresh = save.1;
            self.names.truncate(save.2);
        }
        self.comp_app()
    }

    fn comp_app(&mut self) -> PResult<Comp> {
        let mut m = self.comp_pre()?;
        while self.value_atom_start() {
            let v = self.value_atom()?;
            m = Comp::App(Box::new(m), Box::new(v));
        }
        Ok(m)
    }

    fn comp_pre(&mut self) -> PResult<Comp> {
        if self.eat_kw("force") {
            return Ok(Comp::force(self.value_atom()?));
        }
        if self.eat_kw("ret") {
            return Ok(Comp::ret(self.value_atom()?));
        }
        if self.eat_kw("sub") {
            self.expect_sym("[")?;
            let target = self.vector()?;
            self.expect_sym("]")?;
            let body = self.comp_pre()?;
            return Ok(Comp::Sub {
                target,
                body: Box::new(body),
            });
        }
        if self.eat_sym("(") {
            let m = self.comp()?;
            self.expect_sym(")")?;
            return Ok(m);
        }
        self.err(format!("expected a computation, found {}", self.peek()))
    }

    // ---- program files ----

    fn header(&mut self, lang: Option<Lang>) -> PResult<Lang> {
        let mut lang = lang;
        loop {
            if self.eat_kw("lang") {
                let loc = self.loc();
                let s = self.binder_name()?;
                lang = Some(Lang::parse(&s).ok_or(ParseError::Syntax {
                    loc,
                    msg: format!("unknown language `{s}`"),
                })?);
            } else if self.eat_kw("mode") {
                let loc = self.loc();
                let s = self.binder_name()?;
                self.mode = Mode::parse(&s).ok_or(ParseError::Syntax {
                    loc,
                    msg: format!("unknown mode `{s}`"),
                })?;
            } else {
                break;
            }
        }
        match lang {
            Some(l) => Ok(l),
            None => self.err("missing `lang cbn` or `lang cbpv` header"),
        }
    }

    fn decl_name(&mut self) -> PResult<(String, Loc)> {
        let loc = self.loc();
        let name = self.binder_name()?;
        if self.names.iter().any(|v| v.name() == name) {
            return Err(ParseError::Duplicate { loc, name });
        }
        Ok((name, loc))
    }

    fn cbn_program(&mut self) -> PResult<CbnProgram> {
        let mut decls = Vec::new();
        while self.eat_kw("var") {
            let (name, _) = self.decl_name()?;
            self.expect_sym(":")?;
            let (ty, latent) = self.cbn_component()?;
            self.expect_sym("=")?;
            let term = self.cbn_term()?;
            let x = self.bind(&name);
            decls.push(CbnDecl {
                x,
                ty,
                latent,
                term,
            });
        }
        self.expect_kw("main")?;
        self.expect_sym("=")?;
        let main = self.cbn_term()?;
        self.expect_eof()?;
        Ok(CbnProgram {
            mode: self.mode,
            decls,
            main,
            lambdas: self.lambdas.clone(),
        })
    }

    fn cbpv_program(&mut self) -> PResult<CbpvProgram> {
        let mut decls = Vec::new();
        while self.eat_kw("var") {
            let (name, _) = self.decl_name()?;
            self.expect_sym(":")?;
            let ty = self.val_type()?;
            self.expect_sym("=")?;
            let value = self.value()?;
            let x = self.bind(&name);
            decls.push(CbpvDecl { x, ty, value });
        }
        self.expect_kw("main")?;
        self.expect_sym("=")?;
        let main = self.comp()?;
        self.expect_eof()?;
        Ok(CbpvProgram {
            mode: self.mode,
            decls,
            main,
            lambdas: self.lambdas.clone(),
        })
    }
}

/// Parses a program file. `lang` is used when the file has no `lang`
/// header; `default_mode` when it has no `mode` header.
pub fn parse_program(src: &str, lang: Option<Lang>, default_mode: Mode) -> PResult<Program> {
    let mut p = Parser::new(src, default_mode)?;
    match p.header(lang)? {
        Lang::Cbn => Ok(Program::Cbn(p.cbn_program()?)),
        Lang::Cbpv => Ok(Program::Cbpv(p.cbpv_program()?)),
    }
}

/// Parses a closed CBN term (or one over `scope`).
pub fn parse_cbn_term(src: &str, mode: Mode, scope: &[VarId]) -> PResult<CbnTerm> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let e = p.cbn_term()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_cbn_type(src: &str, mode: Mode, scope: &[VarId]) -> PResult<CbnType> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let t = p.cbn_type()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_comp(src: &str, mode: Mode, scope: &[VarId]) -> PResult<Comp> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let m = p.comp()?;
    p.expect_eof()?;
    Ok(m)
}

pub fn parse_value(src: &str, mode: Mode, scope: &[VarId]) -> PResult<Value> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let v = p.value()?;
    p.expect_eof()?;
    Ok(v)
}

pub fn parse_val_type(src: &str, mode: Mode, scope: &[VarId]) -> PResult<ValType> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let t = p.val_type()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_comp_type(src: &str, mode: Mode, scope: &[VarId]) -> PResult<CompType> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let t = p.comp_type()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_vector(src: &str, mode: Mode, scope: &[VarId]) -> PResult<AttrVec> {
    let mut p = Parser::new(src, mode)?.with_scope(scope);
    let g = p.vector()?;
    p.expect_eof()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(src: &str) -> ParseError {
        parse_program(src, None, Mode::Base).unwrap_err()
    }

    #[test]
    fn trivial_programs() {
        let Program::Cbpv(p) = parse_program("lang cbpv\nmain = ret ()", None, Mode::Base).unwrap()
        else {
            panic!()
        };
        assert_eq!(p.main, Comp::ret(Value::Unit));
        let x = VarId::new(0, "x");
        let v = parse_value("thunk { force x }", Mode::Base, std::slice::from_ref(&x)).unwrap();
        assert_eq!(v, Value::thunk(Comp::force(Value::Var(x))));
    }

    #[test]
    fn errors_carry_locations() {
        assert_eq!(
            err("lang cbpv\nmain = ret $"),
            ParseError::Syntax {
                loc: Loc { line: 2, col: 12 },
                msg: "unexpected character `$`".into()
            }
        );
        assert!(matches!(
            err("lang cbn\nmain = q"),
            ParseError::Unbound {
                loc: Loc { line: 2, col: 8 },
                ..
            }
        ));
        assert!(matches!(
            err("lang cbn\nvar a : unit = ()\nvar a : unit = ()\nmain = a"),
            ParseError::Duplicate {
                loc: Loc { line: 3, col: 5 },
                ..
            }
        ));
        assert!(matches!(err("main = ()"), ParseError::Syntax { .. }));
    }

    #[test]
    fn unused_attribute_needs_extended_mode() {
        let src = "lang cbn\nvar a : unit = ()\nmain = sub[{a:U}] ()";
        assert!(matches!(
            err(src),
            ParseError::Attr {
                err: AttrError::IllegalAttribute,
                ..
            }
        ));
        assert!(parse_program(&format!("mode extended\n{src}"), None, Mode::Base).is_ok());
        assert!(parse_program(src, None, Mode::Extended).is_ok());
    }

    #[test]
    fn booleans_are_sugar_for_unit_sums() {
        let t = parse_cbn_term("if true then () else ()", Mode::Base, &[]).unwrap();
        let CbnTerm::Case { scrut, .. } = t else {
            panic!("{t:?}")
        };
        assert!(
            matches!(*scrut, CbnTerm::Inl(ref u, ref ty) if **u == CbnTerm::Unit && ty.is_bool())
        );
    }

    #[test]
    fn binders_get_distinct_ids() {
        let m = parse_comp("x <- ret () in x <- ret x in ret x", Mode::Base, &[]).unwrap();
        let Comp::Let { x: outer, body, .. } = m else {
            panic!()
        };
        let Comp::Let {
            x: inner, bound, ..
        } = *body
        else {
            panic!()
        };
        assert_ne!(outer, inner);
        assert_eq!(*bound, Comp::ret(Value::Var(outer)));
    }

    #[test]
    fn comments_are_skipped() {
        let src = "# header\nlang cbn -- trailing\nmain = () # done";
        assert!(parse_program(src, None, Mode::Base).is_ok());
    }
}
