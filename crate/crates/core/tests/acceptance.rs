//! End-to-end acceptance criteria. Each criterion prints one pass/fail line;
//! the test fails if any criterion does.

mod common;

use std::time::{Duration, Instant};

use strictness::attrs::{attr_leq, attr_plus, Attr, Mode};
use strictness::cli;
use strictness::metatheory::checks::ext_validity;
use strictness::metatheory::{
    campaign, gen_cbn_program, gen_cbpv_program, GenConfig, Goal, Theorem, TheoremReport,
};
use strictness::parse::{parse_program, Lang, Program};
use strictness::program::{check_program, Checked};

use Attr::{Lazy as L, Strict as S, Unknown as Q, Unused as U};

const WORKERS: usize = 4;

fn criterion(
    n: u32,
    name: &str,
    limit: Duration,
    f: impl FnOnce() -> Result<String, String>,
) -> bool {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    let (ok, detail) = match r {
        Ok(d) if took <= limit => (true, d),
        Ok(d) => (false, format!("{d}; over the {limit:?} limit")),
        Err(e) => (false, e),
    };
    println!(
        "criterion {n} {name}: {} ({took:.2?}) {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn config(seed: u64, mode: Mode, depth: usize) -> GenConfig {
    GenConfig {
        max_depth: depth,
        max_scope: 4,
        ..GenConfig::new(seed, mode)
    }
}

/// Runs `theorem` over `trials` programs for each listed language and mode.
fn campaigns(
    theorem: Theorem,
    langs: &[Lang],
    trials: u64,
    depth: usize,
    seed: u64,
) -> Result<String, String> {
    let mut parts = Vec::new();
    for &lang in langs {
        for mode in [Mode::Base, Mode::Extended] {
            let r: TheoremReport =
                campaign(theorem, lang, &config(seed, mode, depth), trials, WORKERS)
                    .map_err(|e| format!("{lang:?}/{mode}: {e}"))?;
            if !r.passed() || r.trials != trials {
                return Err(format!("{}/{mode}: {r}", lang.as_str()));
            }
            parts.push(format!(
                "{}/{mode} {} trials {} cases",
                lang.as_str(),
                r.trials,
                r.cases
            ));
        }
    }
    Ok(parts.join(", "))
}

// ---- criterion 1 ----

/// Expected join of every pair of base attributes.
const PLUS_TABLE: [(Attr, Attr, Attr); 9] = [
    (S, S, S),
    (S, Q, S),
    (S, L, S),
    (Q, S, S),
    (Q, Q, Q),
    (Q, L, Q),
    (L, S, S),
    (L, Q, Q),
    (L, L, L),
];

/// Reflexive-transitive closure of the covering edges of a semilattice
/// diagram, as `(lower, upper)` pairs.
fn order_closure(attrs: &[Attr], edges: &[(Attr, Attr)]) -> Vec<(Attr, Attr)> {
    let mut rel: Vec<(Attr, Attr)> = attrs
        .iter()
        .map(|&a| (a, a))
        .chain(edges.iter().copied())
        .collect();
    loop {
        let mut grown = false;
        for i in 0..rel.len() {
            for j in 0..rel.len() {
                let ((a, b), (c, d)) = (rel[i], rel[j]);
                if b == c && !rel.contains(&(a, d)) {
                    rel.push((a, d));
                    grown = true;
                }
            }
        }
        if !grown {
            return rel;
        }
    }
}

fn algebra() -> Result<String, String> {
    let mut checked = 0;
    for (a, b, c) in PLUS_TABLE {
        let got = attr_plus(a, b, Mode::Base).map_err(|e| e.to_string())?;
        if got != c {
            return Err(format!("{a} + {b} = {got}, expected {c}"));
        }
        checked += 1;
    }
    for &a in Mode::Extended.attrs() {
        for &(x, y) in &[(U, a), (a, U)] {
            if attr_plus(x, y, Mode::Extended).map_err(|e| e.to_string())? != a {
                return Err(format!("U is not the extended identity at {a}"));
            }
            checked += 1;
        }
    }
    let diagrams: [(Mode, &[(Attr, Attr)]); 2] = [
        (Mode::Base, &[(Q, L), (Q, S)]),
        (Mode::Extended, &[(Q, L), (Q, S), (L, U)]),
    ];
    for (mode, edges) in diagrams {
        let rel = order_closure(mode.attrs(), edges);
        for &a in mode.attrs() {
            for &b in mode.attrs() {
                let got = attr_leq(a, b, mode).map_err(|e| e.to_string())?;
                if got != rel.contains(&(a, b)) {
                    return Err(format!("{mode}: {a} <= {b} is {got}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} entries"))
}

// ---- criterion 2 ----

fn golden() -> Result<String, String> {
    let corpus = common::load_corpus();
    if corpus.len() < 12 {
        return Err(format!("only {} corpus judgments", corpus.len()));
    }
    for case in &corpus {
        common::judgment_matches(case)?;
    }
    Ok(format!("{} judgments", corpus.len()))
}

// ---- criterion 8 ----

fn extended_validity(trials: u64, depth: usize) -> Result<String, String> {
    let mut judgments = 0u64;
    for i in 0..trials {
        let cfg = config(i, Mode::Extended, depth);
        let (c, _) = gen_cbn_program(&cfg, Goal::Any).map_err(|e| e.to_string())?;
        ext_validity(&c).map_err(|cx| {
            format!(
                "seed {i}: {}\nexpected {}\nactual {}",
                cx.program, cx.expected, cx.actual
            )
        })?;
        judgments += c.decls.len() as u64 + 1;
    }
    Ok(format!("{trials} programs, {judgments} judgments"))
}

// ---- criterion 9 ----

fn main_judgment(c: &Checked) -> String {
    match c {
        Checked::Cbn(c) => format!("{} {}", c.main.effect, c.main.ty),
        Checked::Cbpv(c) => format!("{} {}", c.main.effect, c.main.ty),
    }
}

fn round_trip(p: &Program) -> Result<(), String> {
    let text = p.to_string();
    let q = parse_program(&text, None, Mode::Base).map_err(|e| format!("{e}\n{text}"))?;
    if q.to_string() != text {
        return Err(format!("printing is not a fixpoint:\n{text}\n{q}"));
    }
    let (a, b) = (
        check_program(p).map_err(|e| e.to_string())?,
        check_program(&q).map_err(|e| e.to_string())?,
    );
    if main_judgment(&a) != main_judgment(&b) {
        return Err(format!("judgment changed across a round trip:\n{text}"));
    }
    Ok(())
}

fn cli_bytes(args: &[&str]) -> Vec<u8> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(
        std::iter::once("strictness").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    out.extend(format!("exit {code}").bytes());
    out
}

fn round_trip_and_cli(fuzz: u64) -> Result<String, String> {
    let corpus = common::load_corpus();
    let mut programs: Vec<Program> = corpus.iter().map(|c| c.program.clone()).collect();
    for mode in [Mode::Base, Mode::Extended] {
        for i in 0..fuzz {
            let cfg = config(i, mode, 8);
            programs.push(Program::Cbpv(
                gen_cbpv_program(&cfg, Goal::Any)
                    .map_err(|e| e.to_string())?
                    .0
                    .program,
            ));
            programs.push(Program::Cbn(
                gen_cbn_program(&cfg, Goal::Any)
                    .map_err(|e| e.to_string())?
                    .0
                    .program,
            ));
        }
    }
    for p in &programs {
        round_trip(p)?;
    }
    for case in &corpus {
        common::report_matches(case)?;
    }
    let mut invocations = 0;
    for case in &corpus {
        let file = case.path.to_str().expect("utf-8 path");
        for cmd in [
            &["--json", "check", file][..],
            &["--json", "report", file],
            &["--json", "run", file],
            &["--json", "verify", file],
        ] {
            if cli_bytes(cmd) != cli_bytes(cmd) {
                return Err(format!("output of {cmd:?} differs between runs"));
            }
            invocations += 1;
        }
    }
    let fuzz_cmd = [
        "--json",
        "fuzz",
        "--lang",
        "cbn",
        "--trials",
        "20",
        "--workers",
        "2",
    ];
    if cli_bytes(&fuzz_cmd) != cli_bytes(&fuzz_cmd) {
        return Err("fuzz output differs between runs".into());
    }
    Ok(format!(
        "{} programs round-trip, {} reports agree, {} stable invocations",
        programs.len(),
        corpus.len(),
        invocations + 1
    ))
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let both = [Lang::Cbn, Lang::Cbpv];
    let results = [
        criterion(1, "algebra tables", secs(1), algebra),
        criterion(2, "golden corpus", secs(1), golden),
        criterion(3, "soundness", secs(60), || {
            campaigns(Theorem::Soundness, &both, 1000, 8, 0)
        }),
        criterion(4, "lazy soundness", secs(60), || {
            campaigns(Theorem::LazySoundness, &both, 500, 6, 0)
        }),
        criterion(5, "strict failure", secs(120), || {
            campaigns(Theorem::StrictFailure, &both, 500, 6, 0)
        }),
        criterion(6, "translation", secs(90), || {
            campaigns(Theorem::Translation, &[Lang::Cbn], 500, 6, 0)
        }),
        criterion(7, "determinism", secs(60), || {
            campaigns(Theorem::Determinism, &both, 200, 6, 0)
        }),
        criterion(8, "extended validity", secs(60), || {
            extended_validity(1000, 8)
        }),
        criterion(9, "round trip and cli", secs(60), || {
            round_trip_and_cli(200)
        }),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
