//! Random generation of well-typed programs and executable checks of the
//! metatheorems, runnable as seeded campaigns.

pub mod checks;
pub mod gen;
mod gen_cbn;
mod gen_cbpv;
pub mod shrink;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cbn::{CbnCtx, CbnTerm};
use crate::cbpv::{CbpvCtx, Comp};
use crate::parse::Lang;
use crate::program::{
    check_cbn_program, check_cbpv_program, translate_program, CheckedCbn, CheckedCbpv,
};

pub use checks::{
    check_determinism, check_lazy_soundness, check_soundness, check_strict_failure,
    check_translation,
};
pub use gen::{GenConfig, GenError, Goal, Weights};

/// Attempts per program before giving up.
pub const MAX_ATTEMPTS: usize = 500;

/// Statistics of one generation call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenStats {
    pub attempts: usize,
    /// Attempts whose output the checker rejected.
    pub rejected: usize,
}

fn rng_for(cfg: &GenConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

/// Generates a checked CBPV program whose `main` meets `goal`.
pub fn gen_cbpv_program(cfg: &GenConfig, goal: Goal) -> Result<(CheckedCbpv, GenStats), GenError> {
    cfg.validate()?;
    let mut rng = rng_for(cfg);
    let mut rejected = 0;
    for attempts in 1..=MAX_ATTEMPTS {
        if let Ok(p) = gen_cbpv::attempt(&mut rng, cfg, goal) {
            match check_cbpv_program(&p) {
                Ok(c) => return Ok((c, GenStats { attempts, rejected })),
                Err(_) => rejected += 1,
            }
        }
    }
    Err(GenError::GenerationExhausted(MAX_ATTEMPTS))
}

/// Generates a checked CBN program whose `main` meets `goal`.
pub fn gen_cbn_program(cfg: &GenConfig, goal: Goal) -> Result<(CheckedCbn, GenStats), GenError> {
    cfg.validate()?;
    let mut rng = rng_for(cfg);
    let mut rejected = 0;
    for attempts in 1..=MAX_ATTEMPTS {
        if let Ok(p) = gen_cbn::attempt(&mut rng, cfg, goal) {
            match check_cbn_program(&p) {
                Ok(c) => return Ok((c, GenStats { attempts, rejected })),
                Err(_) => rejected += 1,
            }
        }
    }
    Err(GenError::GenerationExhausted(MAX_ATTEMPTS))
}

/// A context and a computation that checks under it.
pub fn gen_cbpv(cfg: &GenConfig) -> Result<(CbpvCtx, Comp), GenError> {
    gen_cbpv_program(cfg, Goal::Any).map(|(c, _)| (c.ctx, c.program.main))
}

/// A context and a term that checks under it.
pub fn gen_cbn(cfg: &GenConfig) -> Result<(CbnCtx, CbnTerm), GenError> {
    gen_cbn_program(cfg, Goal::Any).map(|(c, _)| (c.ctx, c.program.main))
}

/// The checked theorems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    Soundness,
    LazySoundness,
    StrictFailure,
    Translation,
    Determinism,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [
        Theorem::Soundness,
        Theorem::LazySoundness,
        Theorem::StrictFailure,
        Theorem::Translation,
        Theorem::Determinism,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Theorem::Soundness => "soundness",
            Theorem::LazySoundness => "lazy-soundness",
            Theorem::StrictFailure => "strict-failure",
            Theorem::Translation => "translation",
            Theorem::Determinism => "determinism",
        }
    }

    pub fn parse(s: &str) -> Option<Theorem> {
        Theorem::ALL.into_iter().find(|t| t.id() == s)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A failing trial, pretty-printed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub program: String,
    pub env: String,
    pub expected: String,
    pub actual: String,
}

/// Outcome of checking one theorem over one or more programs. Reports from
/// disjoint trial ranges merge associatively, keeping the earliest
/// counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TheoremReport {
    pub theorem: Theorem,
    /// Programs checked.
    pub trials: u64,
    /// Individual obligations discharged across those programs.
    pub cases: u64,
    pub failures: u64,
    pub counterexample: Option<Counterexample>,
    /// Seed of the trial that produced the counterexample, for campaigns.
    pub seed: Option<u64>,
    /// Observations that are logged rather than asserted.
    pub logs: Vec<String>,
}

impl TheoremReport {
    pub fn new(theorem: Theorem) -> TheoremReport {
        TheoremReport {
            theorem,
            trials: 1,
            cases: 0,
            failures: 0,
            counterexample: None,
            seed: None,
            logs: Vec::new(),
        }
    }

    pub fn empty(theorem: Theorem) -> TheoremReport {
        TheoremReport {
            trials: 0,
            ..TheoremReport::new(theorem)
        }
    }

    pub(crate) fn record(&mut self, r: Result<(), Counterexample>) {
        if let Err(c) = r {
            self.failures += 1;
            self.counterexample.get_or_insert(c);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn merge(mut self, other: TheoremReport) -> TheoremReport {
        debug_assert_eq!(self.theorem, other.theorem);
        self.trials += other.trials;
        self.cases += other.cases;
        self.failures += other.failures;
        if self.counterexample.is_none() {
            self.counterexample = other.counterexample;
            self.seed = other.seed;
        }
        self.logs.extend(other.logs);
        self
    }
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "pass" } else { "FAIL" };
        write!(
            f,
            "{verdict} {}: {} trials, {} cases, {} failures",
            self.theorem, self.trials, self.cases, self.failures
        )?;
        if let Some(c) = &self.counterexample {
            if let Some(seed) = self.seed {
                write!(f, "\nseed {seed}")?;
            }
            write!(
                f,
                "\nprogram:\n{}\nenv: {}\nexpected: {}\nactual: {}",
                c.program, c.env, c.expected, c.actual
            )?;
        }
        for l in &self.logs {
            write!(f, "\nlog: {l}")?;
        }
        Ok(())
    }
}

/// Variants per program in determinism trials.
pub const DETERMINISM_VARIANTS: usize = 5;

/// Checks `theorem` on a CBPV program.
pub fn check_cbpv(theorem: Theorem, c: &CheckedCbpv, seed: u64) -> TheoremReport {
    match theorem {
        Theorem::Soundness => checks::check_soundness_seeded(c, seed),
        Theorem::LazySoundness => checks::check_lazy_soundness(c),
        Theorem::StrictFailure => checks::check_strict_failure_seeded(c, seed),
        Theorem::Determinism => checks::check_determinism_seeded(c, DETERMINISM_VARIANTS, seed),
        Theorem::Translation => TheoremReport::empty(theorem),
    }
}

/// Checks `theorem` on a CBN program; all but translation run on its
/// translation.
pub fn check_cbn(theorem: Theorem, c: &CheckedCbn, seed: u64) -> TheoremReport {
    if theorem == Theorem::Translation {
        return checks::check_translation(c);
    }
    let translated = translate_program(c)
        .map_err(|e| e.to_string())
        .and_then(|p| {
            check_cbpv_program(&p).map_err(|e| format!("translation does not check: {e}\n{p}"))
        });
    match translated {
        Ok(t) if theorem == Theorem::Soundness => {
            let mut r = check_cbpv(theorem, &t, seed);
            let mut v = TheoremReport::empty(theorem);
            v.cases = 1;
            v.record(checks::ext_validity(c));
            r = v.merge(r);
            r
        }
        Ok(t) => check_cbpv(theorem, &t, seed),
        Err(actual) => {
            let mut r = TheoremReport::new(theorem);
            r.record(Err(Counterexample {
                program: c.program.to_string(),
                env: String::new(),
                expected: "a checked translation".into(),
                actual,
            }));
            r
        }
    }
}

/// The generation goal for a trial: strict-failure trials alternate between
/// plain returners and returners with strictly used declarations.
fn goal_for(theorem: Theorem, seed: u64) -> Goal {
    match theorem {
        Theorem::StrictFailure if seed % 2 == 1 => Goal::StrictReturner,
        Theorem::StrictFailure | Theorem::Translation => Goal::Returner,
        _ => Goal::Any,
    }
}

/// Generates one program from `cfg` and checks `theorem` on it, shrinking
/// any counterexample.
pub fn run_trial(theorem: Theorem, lang: Lang, cfg: &GenConfig) -> Result<TheoremReport, GenError> {
    let seed = cfg.seed;
    let goal = goal_for(theorem, seed);
    let mut report = match lang {
        Lang::Cbpv => {
            let (c, _) = gen_cbpv_program(cfg, goal)?;
            let r = check_cbpv(theorem, &c, seed);
            if r.passed() {
                r
            } else {
                let small = shrink::shrink_cbpv(&c.program, |p| {
                    check_cbpv_program(p).is_ok_and(|c| !check_cbpv(theorem, &c, seed).passed())
                });
                let c = check_cbpv_program(&small).expect("shrinking keeps programs well-typed");
                check_cbpv(theorem, &c, seed)
            }
        }
        Lang::Cbn => {
            let (c, _) = gen_cbn_program(cfg, goal)?;
            let r = check_cbn(theorem, &c, seed);
            if r.passed() {
                r
            } else {
                let small = shrink::shrink_cbn(&c.program, |p| {
                    check_cbn_program(p).is_ok_and(|c| !check_cbn(theorem, &c, seed).passed())
                });
                let c = check_cbn_program(&small).expect("shrinking keeps programs well-typed");
                check_cbn(theorem, &c, seed)
            }
        }
    };
    if !report.passed() {
        report.seed = Some(seed);
    }
    Ok(report)
}

/// Runs `trials` trials with seeds `base.seed`, `base.seed + 1`, ... spread
/// over `workers` threads.
pub fn campaign(
    theorem: Theorem,
    lang: Lang,
    base: &GenConfig,
    trials: u64,
    workers: usize,
) -> Result<TheoremReport, GenError> {
    base.validate()?;
    let workers = workers.clamp(1, trials.max(1) as usize) as u64;
    let chunk = trials.div_ceil(workers);
    let results: Vec<Result<TheoremReport, GenError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(trials);
                s.spawn(move || {
                    let mut acc = TheoremReport::empty(theorem);
                    for i in lo..hi {
                        let cfg = GenConfig {
                            seed: base.seed.wrapping_add(i),
                            ..base.clone()
                        };
                        acc = acc.merge(run_trial(theorem, lang, &cfg)?);
                    }
                    Ok(acc)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("campaign worker panicked"))
            .collect()
    });
    results
        .into_iter()
        .try_fold(TheoremReport::empty(theorem), |acc, r| Ok(acc.merge(r?)))
}

/// The number of worker threads campaigns use by default.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
