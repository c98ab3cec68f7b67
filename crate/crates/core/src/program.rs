//! Whole programs: checking declarations in order, translating CBN
//! programs, and building the top-level runtime environment.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::attrs::{Fresh, Mode, VarId};
use crate::cbn::{cbn_synth, cbn_type_equal, vec_agree, CbnCtx, CbnJudgment};
use crate::cbpv::{
    cbpv_synth_comp, cbpv_synth_value, val_type_equal, CbpvCtx, CompJudgment, ElabValue,
    ValueJudgment,
};
use crate::error::TypeError;
use crate::eval::{fuel_for, Env, Evaluator, Outcome};
use crate::parse::{CbnProgram, CbpvDecl, CbpvProgram, Lang, Program};
use crate::translate::{translate_ctx, translate_term_with};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("declaration {name}: {err}")]
    Decl { name: String, err: TypeError },
    #[error("declaration {name}: declared {declared}, synthesized {synthesized}")]
    DeclMismatch {
        name: String,
        declared: String,
        synthesized: String,
    },
    #[error("main: {0}")]
    Main(TypeError),
}

fn decl_err(x: &VarId) -> impl Fn(TypeError) -> ProgramError + '_ {
    move |err| ProgramError::Decl {
        name: x.name().to_string(),
        err,
    }
}

/// A CBN program with the judgment of every declaration and of `main`.
#[derive(Clone, Debug)]
pub struct CheckedCbn {
    pub program: CbnProgram,
    pub ctx: CbnCtx,
    pub decls: Vec<CbnJudgment>,
    pub main: CbnJudgment,
}

/// A CBPV program with elaborated declarations and `main`.
#[derive(Clone, Debug)]
pub struct CheckedCbpv {
    pub program: CbpvProgram,
    pub ctx: CbpvCtx,
    pub decls: Vec<ValueJudgment>,
    pub main: CompJudgment,
}

#[derive(Clone, Debug)]
pub enum Checked {
    Cbn(CheckedCbn),
    Cbpv(CheckedCbpv),
}

impl Checked {
    pub fn lang(&self) -> Lang {
        match self {
            Checked::Cbn(_) => Lang::Cbn,
            Checked::Cbpv(_) => Lang::Cbpv,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Checked::Cbn(c) => c.program.mode,
            Checked::Cbpv(c) => c.program.mode,
        }
    }
}

/// Checks each declaration over the earlier ones. A declaration's stated
/// type must equal the synthesized one; a stated latent effect must equal
/// the synthesized effect.
pub fn check_cbn_program(p: &CbnProgram) -> Result<CheckedCbn, ProgramError> {
    let mut ctx = CbnCtx::new();
    let mut decls = Vec::new();
    for d in &p.decls {
        let j = cbn_synth(&ctx, &d.term, p.mode).map_err(decl_err(&d.x))?;
        let latent_ok = d.latent.as_ref().is_none_or(|g| vec_agree(g, &j.effect));
        if !cbn_type_equal(&d.ty, &j.ty) || !latent_ok {
            let declared = match &d.latent {
                Some(g) => format!("{} with latent {g}", d.ty),
                None => d.ty.to_string(),
            };
            return Err(ProgramError::DeclMismatch {
                name: d.x.name().to_string(),
                declared,
                synthesized: format!("{} with latent {}", j.ty, j.effect),
            });
        }
        ctx.push(d.x.clone(), j.ty.clone(), j.effect.clone());
        decls.push(j);
    }
    let main = cbn_synth(&ctx, &p.main, p.mode).map_err(ProgramError::Main)?;
    Ok(CheckedCbn {
        program: p.clone(),
        ctx,
        decls,
        main,
    })
}

pub fn check_cbpv_program(p: &CbpvProgram) -> Result<CheckedCbpv, ProgramError> {
    let mut ctx = CbpvCtx::new();
    let mut decls = Vec::new();
    for d in &p.decls {
        let j = cbpv_synth_value(&ctx, &d.value, p.mode).map_err(decl_err(&d.x))?;
        if !val_type_equal(&d.ty, &j.ty) {
            return Err(ProgramError::DeclMismatch {
                name: d.x.name().to_string(),
                declared: d.ty.to_string(),
                synthesized: j.ty.to_string(),
            });
        }
        ctx.push(d.x.clone(), j.ty.clone());
        decls.push(j);
    }
    let main = cbpv_synth_comp(&ctx, &p.main, p.mode).map_err(ProgramError::Main)?;
    Ok(CheckedCbpv {
        program: p.clone(),
        ctx,
        decls,
        main,
    })
}

pub fn check_program(p: &Program) -> Result<Checked, ProgramError> {
    match p {
        Program::Cbn(p) => check_cbn_program(p).map(Checked::Cbn),
        Program::Cbpv(p) => check_cbpv_program(p).map(Checked::Cbpv),
    }
}

/// Translates a checked CBN program. Each declaration `x = e` becomes
/// `x : U[γ+γ'] B = thunk { ⟦e⟧ }`.
pub fn translate_program(c: &CheckedCbn) -> Result<CbpvProgram, TypeError> {
    let p = &c.program;
    let mode = p.mode;
    let max = p
        .decls
        .iter()
        .map(|d| d.term.max_var_id().max(d.x.id()))
        .chain([p.main.max_var_id()])
        .max();
    let mut fresh = Fresh::above(max.unwrap_or(0).max(c.ctx.max_var_id()));
    let target_ctx = translate_ctx(&c.ctx, mode);
    let mut prefix = CbnCtx::new();
    let mut decls = Vec::new();
    for (d, (en, (_, ty))) in p
        .decls
        .iter()
        .zip(c.ctx.entries().iter().zip(target_ctx.entries()))
    {
        let body = translate_term_with(&prefix, &d.term, mode, &mut fresh)?;
        decls.push(CbpvDecl {
            x: d.x.clone(),
            ty: ty.clone(),
            value: crate::cbpv::Value::thunk(body),
        });
        prefix.push(en.x.clone(), en.ty.clone(), en.latent.clone());
    }
    let main = translate_term_with(&c.ctx, &p.main, mode, &mut fresh)?;
    Ok(CbpvProgram {
        mode,
        decls,
        main,
        lambdas: p.lambdas.clone(),
    })
}

impl CheckedCbpv {
    pub fn mode(&self) -> Mode {
        self.program.mode
    }

    /// A bound on every variable id in the program.
    pub fn max_id(&self) -> u32 {
        self.ctx.max_var_id().max(self.program.main.max_var_id())
    }

    /// Evaluation fuel sufficient for the declarations and `main`.
    pub fn fuel(&self) -> u64 {
        let size: usize = self
            .program
            .decls
            .iter()
            .map(|d| d.value.size())
            .sum::<usize>()
            + self.program.main.size();
        let depth = self
            .program
            .decls
            .iter()
            .map(|d| d.value.depth())
            .chain([self.program.main.depth()])
            .max();
        fuel_for(size * 4, depth.unwrap_or(1) + 2)
    }

    pub fn instrumented(&self) -> Evaluator {
        Evaluator::instrumented(self.mode(), self.max_id(), self.fuel())
    }

    pub fn erased(&self) -> Evaluator {
        Evaluator::erased(self.mode(), self.max_id(), self.fuel())
    }
}

/// The outcome of building a top-level environment.
#[derive(Clone, Debug)]
pub struct BuiltEnv {
    pub env: Env,
    /// Declarations whose evaluation failed because they read a missing
    /// variable; they are missing in `env`.
    pub cascaded: Vec<VarId>,
}

/// Evaluates the declarations in order with `ev`. Variables in `missing`
/// are left unbound; a later declaration whose evaluation reads a missing
/// variable becomes missing as well.
pub fn build_env(c: &CheckedCbpv, ev: &mut Evaluator, missing: &BTreeSet<VarId>) -> BuiltEnv {
    let decls = c
        .program
        .decls
        .iter()
        .zip(&c.decls)
        .map(|(d, j)| (&d.x, &j.elab));
    build_env_from(decls, ev, missing)
        .unwrap_or_else(|(x, msg)| panic!("declaration {x} of a checked program got stuck: {msg}"))
}

/// [`build_env`] over arbitrary elaborated declarations. A declaration
/// that gets stuck is reported with its message.
pub fn build_env_from<'a>(
    decls: impl IntoIterator<Item = (&'a VarId, &'a ElabValue)>,
    ev: &mut Evaluator,
    missing: &BTreeSet<VarId>,
) -> Result<BuiltEnv, (VarId, String)> {
    let mut env = Env::new();
    let mut cascaded = Vec::new();
    for (x, v) in decls {
        if missing.contains(x) {
            env.push(x.clone(), None);
            continue;
        }
        match ev.eval_value(&env, v) {
            Outcome::Success(w, _) => env.push(x.clone(), Some(w)),
            Outcome::FailMissing(_) => {
                env.push(x.clone(), None);
                cascaded.push(x.clone());
            }
            Outcome::FailStuck(msg) => return Err((x.clone(), msg)),
        }
    }
    Ok(BuiltEnv { env, cascaded })
}

/// Looks up a top-level declaration by its source name.
pub fn decl_by_name<'a>(c: &'a CheckedCbpv, name: &str) -> Option<&'a VarId> {
    c.program
        .decls
        .iter()
        .map(|d| &d.x)
        .find(|x| x.name() == name)
}
