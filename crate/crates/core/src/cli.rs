//! The `strictness` command-line tool.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attrs::{Mode, VarId};
use crate::eval::Outcome;
use crate::metatheory::{
    campaign, check_cbn, check_cbpv, default_workers, GenConfig, Theorem, TheoremReport,
};
use crate::parse::{parse_program, Lang};
use crate::program::{
    build_env, check_cbpv_program, check_program, decl_by_name, translate_program, Checked,
    CheckedCbpv,
};
use crate::report::{cbn_report, cbpv_report};

/// Environment variable naming the default mode for files without a
/// `mode` header.
pub const MODE_ENV: &str = "STRICTNESS_MODE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "strictness",
    version,
    about = "Strictness typing for call-by-name and call-by-push-value programs"
)]
struct Cli {
    /// Emit JSON lines instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Base,
    Extended,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Base => Mode::Base,
            ModeArg::Extended => Mode::Extended,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LangArg {
    Cbn,
    Cbpv,
}

impl From<LangArg> for Lang {
    fn from(l: LangArg) -> Lang {
        match l {
            LangArg::Cbn => Lang::Cbn,
            LangArg::Cbpv => Lang::Cbpv,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TheoremArg {
    Soundness,
    LazySoundness,
    StrictFailure,
    Translation,
    Determinism,
}

impl From<TheoremArg> for Theorem {
    fn from(t: TheoremArg) -> Theorem {
        match t {
            TheoremArg::Soundness => Theorem::Soundness,
            TheoremArg::LazySoundness => Theorem::LazySoundness,
            TheoremArg::StrictFailure => Theorem::StrictFailure,
            TheoremArg::Translation => Theorem::Translation,
            TheoremArg::Determinism => Theorem::Determinism,
        }
    }
}

#[derive(Args, Debug)]
struct Input {
    /// Program file (`.cbn` or `.cbpv`).
    file: PathBuf,
    /// Language, when neither the extension nor a `lang` header gives it.
    #[arg(long, value_enum)]
    lang: Option<LangArg>,
    /// Mode for files without a `mode` header.
    #[arg(long, value_enum, env = MODE_ENV, default_value = "base")]
    mode: ModeArg,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Type-check a program and print the judgments of its declarations and main.
    Check(Input),
    /// Translate a call-by-name program into call-by-push-value.
    Translate(Input),
    /// Evaluate main, optionally with declarations missing.
    Run {
        #[command(flatten)]
        input: Input,
        /// Leave this declaration unbound (repeatable).
        #[arg(long = "drop", visible_alias = "env-missing", value_name = "NAME")]
        drop: Vec<String>,
        /// Skip attribute tracking.
        #[arg(long)]
        erased: bool,
    },
    /// Classify every declaration and lambda as strict, lazy, indeterminate or unused.
    Report(Input),
    /// Check the metatheorems on one program.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Restrict to these theorems (repeatable).
        #[arg(long, value_enum)]
        theorem: Vec<TheoremArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a seeded fuzz campaign.
    Fuzz {
        #[arg(long, value_enum, default_value = "cbpv")]
        lang: LangArg,
        #[arg(long, value_enum, env = MODE_ENV, default_value = "base")]
        mode: ModeArg,
        #[arg(long, value_enum)]
        theorem: Vec<TheoremArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 4)]
        scope: usize,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Serialize)]
struct JudgmentLine<'a> {
    kind: &'static str,
    lang: &'static str,
    mode: &'static str,
    name: &'a str,
    effect: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Serialize)]
struct ProgramLine {
    kind: &'static str,
    lang: &'static str,
    mode: &'static str,
    text: String,
}

#[derive(Serialize)]
struct RunLine {
    kind: &'static str,
    status: &'static str,
    terminal: Option<String>,
    effect: Option<String>,
    missing: Option<String>,
    message: Option<String>,
}

#[derive(Serialize)]
struct ErrorLine {
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    lang: &'static str,
    mode: &'static str,
    #[serde(flatten)]
    report: &'a TheoremReport,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    json: bool,
}

impl Io<'_> {
    fn line<T: Serialize>(&mut self, value: &T) {
        let s = serde_json::to_string(value).expect("report types serialize");
        let _ = writeln!(self.out, "{s}");
    }

    fn text(&mut self, s: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{s}");
    }

    /// Reports an error and returns `code`.
    fn error(&mut self, code: i32, message: impl std::fmt::Display) -> i32 {
        if self.json {
            let s = serde_json::to_string(&ErrorLine {
                kind: "error",
                message: message.to_string(),
            })
            .expect("error lines serialize");
            let _ = writeln!(self.out, "{s}");
        }
        let _ = writeln!(self.err, "error: {message}");
        code
    }
}

/// Runs the tool on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let mut io = Io {
        out,
        err,
        json: cli.json,
    };
    match cli.cmd {
        Cmd::Check(input) => cmd_check(&mut io, &input),
        Cmd::Translate(input) => cmd_translate(&mut io, &input),
        Cmd::Run {
            input,
            drop,
            erased,
        } => cmd_run(&mut io, &input, &drop, erased),
        Cmd::Report(input) => cmd_report(&mut io, &input),
        Cmd::Verify {
            input,
            theorem,
            seed,
        } => cmd_verify(&mut io, &input, &theorem, seed),
        Cmd::Fuzz {
            lang,
            mode,
            theorem,
            seed,
            trials,
            depth,
            scope,
            workers,
        } => {
            let cfg = GenConfig {
                max_depth: depth,
                max_scope: scope,
                ..GenConfig::new(seed, mode.into())
            };
            cmd_fuzz(
                &mut io,
                lang.into(),
                &cfg,
                &theorem,
                trials,
                workers.unwrap_or_else(default_workers),
            )
        }
    }
}

fn lang_of_path(p: &Path) -> Option<Lang> {
    p.extension().and_then(|e| e.to_str()).and_then(Lang::parse)
}

/// Reads and checks the input program; errors are reported on `io`.
fn load(io: &mut Io<'_>, input: &Input) -> Result<Checked, i32> {
    let src = std::fs::read_to_string(&input.file)
        .map_err(|e| io.error(EXIT_USAGE, format!("{}: {e}", input.file.display())))?;
    let lang = input
        .lang
        .map(Lang::from)
        .or_else(|| lang_of_path(&input.file));
    let program = parse_program(&src, lang, input.mode.into())
        .map_err(|e| io.error(EXIT_FAIL, format!("{}:{e}", input.file.display())))?;
    check_program(&program)
        .map_err(|e| io.error(EXIT_FAIL, format!("{}: {e}", input.file.display())))
}

/// The program to evaluate: CBN programs run through their translation.
fn runnable(io: &mut Io<'_>, c: &Checked) -> Result<CheckedCbpv, i32> {
    match c {
        Checked::Cbpv(c) => Ok(c.clone()),
        Checked::Cbn(c) => {
            let p = translate_program(c)
                .map_err(|e| io.error(EXIT_FAIL, format!("translation: {e}")))?;
            check_cbpv_program(&p)
                .map_err(|e| io.error(EXIT_FAIL, format!("translation does not check: {e}")))
        }
    }
}

fn cmd_check(io: &mut Io<'_>, input: &Input) -> i32 {
    let c = match load(io, input) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (lang, mode) = (c.lang(), c.mode());
    let mut lines: Vec<(String, String, String)> = Vec::new();
    match &c {
        Checked::Cbn(c) => {
            for (d, j) in c.program.decls.iter().zip(&c.decls) {
                lines.push((
                    d.x.name().to_string(),
                    j.effect.to_string(),
                    j.ty.to_string(),
                ));
            }
            lines.push((
                "main".into(),
                c.main.effect.to_string(),
                c.main.ty.to_string(),
            ));
        }
        Checked::Cbpv(c) => {
            for (d, j) in c.program.decls.iter().zip(&c.decls) {
                lines.push((
                    d.x.name().to_string(),
                    j.effect.to_string(),
                    j.ty.to_string(),
                ));
            }
            lines.push((
                "main".into(),
                c.main.effect.to_string(),
                c.main.ty.to_string(),
            ));
        }
    }
    for (name, effect, ty) in lines {
        if io.json {
            io.line(&JudgmentLine {
                kind: "judgment",
                lang: lang.as_str(),
                mode: mode.as_str(),
                name: &name,
                effect,
                ty,
            });
        } else {
            io.text(format!("⊢ {name} :^{effect} {ty}"));
        }
    }
    EXIT_OK
}

fn cmd_translate(io: &mut Io<'_>, input: &Input) -> i32 {
    let c = match load(io, input) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let Checked::Cbn(c) = c else {
        return io.error(EXIT_USAGE, "translate expects a cbn program");
    };
    let p = match translate_program(&c) {
        Ok(p) => p,
        Err(e) => return io.error(EXIT_FAIL, format!("translation: {e}")),
    };
    if io.json {
        io.line(&ProgramLine {
            kind: "program",
            lang: "cbpv",
            mode: p.mode.as_str(),
            text: p.to_string(),
        });
    } else {
        io.text(p.to_string().trim_end());
    }
    EXIT_OK
}

fn cmd_run(io: &mut Io<'_>, input: &Input, drop: &[String], erased: bool) -> i32 {
    let c = match load(io, input) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let c = match runnable(io, &c) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut missing: BTreeSet<VarId> = BTreeSet::new();
    for name in drop {
        match decl_by_name(&c, name) {
            Some(x) => {
                missing.insert(x.clone());
            }
            None => return io.error(EXIT_USAGE, format!("no declaration named {name}")),
        }
    }
    let mut ev = if erased { c.erased() } else { c.instrumented() };
    let built = build_env(&c, &mut ev, &missing);
    let out = ev.eval_comp(&built.env, &c.main.elab);
    let (status, terminal, effect, miss, message, code) = match &out {
        Outcome::Success(t, g) => (
            "success",
            Some(t.to_string()),
            g.as_ref().map(|g| g.to_string()),
            None,
            None,
            EXIT_OK,
        ),
        Outcome::FailMissing(x) => (
            "missing",
            None,
            None,
            Some(x.name().to_string()),
            Some(format!("missing binding: {}", x.name())),
            EXIT_FAIL,
        ),
        Outcome::FailStuck(m) => (
            "stuck",
            None,
            None,
            None,
            Some(format!("stuck: {m}")),
            EXIT_FAIL,
        ),
    };
    if io.json {
        io.line(&RunLine {
            kind: "result",
            status,
            terminal,
            effect,
            missing: miss,
            message: message.clone(),
        });
    } else if let Some(t) = terminal {
        match effect {
            Some(g) => io.text(format!("{t}\neffect {g}")),
            None => io.text(t),
        }
    }
    if let Some(m) = message {
        let _ = writeln!(io.err, "{m}");
    }
    code
}

fn cmd_report(io: &mut Io<'_>, input: &Input) -> i32 {
    let c = match load(io, input) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = match &c {
        Checked::Cbn(c) => cbn_report(c),
        Checked::Cbpv(c) => cbpv_report(c),
    };
    if io.json {
        io.line(&report);
    } else {
        let _ = write!(io.out, "{report}");
    }
    EXIT_OK
}

fn selected(theorems: &[TheoremArg], lang: Lang) -> Vec<Theorem> {
    let all: Vec<Theorem> = if theorems.is_empty() {
        Theorem::ALL.to_vec()
    } else {
        theorems.iter().map(|t| Theorem::from(*t)).collect()
    };
    all.into_iter()
        .filter(|t| *t != Theorem::Translation || lang == Lang::Cbn)
        .collect()
}

fn emit_reports(io: &mut Io<'_>, lang: Lang, mode: Mode, reports: &[TheoremReport]) -> i32 {
    for r in reports {
        if io.json {
            io.line(&ReportLine {
                lang: lang.as_str(),
                mode: mode.as_str(),
                report: r,
            });
        } else {
            io.text(r);
        }
    }
    if reports.iter().all(TheoremReport::passed) {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn cmd_verify(io: &mut Io<'_>, input: &Input, theorems: &[TheoremArg], seed: u64) -> i32 {
    let c = match load(io, input) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (lang, mode) = (c.lang(), c.mode());
    let reports: Vec<TheoremReport> = selected(theorems, lang)
        .into_iter()
        .map(|t| match &c {
            Checked::Cbn(c) => check_cbn(t, c, seed),
            Checked::Cbpv(c) => check_cbpv(t, c, seed),
        })
        .collect();
    emit_reports(io, lang, mode, &reports)
}

fn cmd_fuzz(
    io: &mut Io<'_>,
    lang: Lang,
    cfg: &GenConfig,
    theorems: &[TheoremArg],
    trials: u64,
    workers: usize,
) -> i32 {
    let mut reports = Vec::new();
    for t in selected(theorems, lang) {
        match campaign(t, lang, cfg, trials, workers) {
            Ok(r) => reports.push(r),
            Err(e) => return io.error(EXIT_USAGE, e),
        }
    }
    emit_reports(io, lang, cfg.mode, &reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(name: &str, src: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("strictness-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, src).unwrap();
        p
    }

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("strictness").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    const FORCE: &str =
        "var y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nmain = force t\n";

    #[test]
    fn dropping_a_strict_binding_fails() {
        let p = file("force.cbpv", FORCE);
        let p = p.to_str().unwrap();
        let (code, _, err) = call(&["run", "--drop", "y", p]);
        assert_eq!(code, EXIT_FAIL);
        assert!(err.contains("missing binding: y"), "{err}");
        assert_eq!(call(&["run", "--env-missing", "y", p]).0, EXIT_FAIL);
        let (code, out, _) = call(&["run", p]);
        assert_eq!(
            (code, out.as_str()),
            (EXIT_OK, "ret ()\neffect {y:S, t:S}\n")
        );
    }

    #[test]
    fn check_prints_judgments() {
        let p = file("pair.cbn", "var z : Bool = true\nmain = (z, true)\n");
        let (code, out, _) = call(&["check", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out, "⊢ z :^{} Bool\n⊢ main :^{} Bool^{z:S} * Bool\n");
    }

    #[test]
    fn exit_codes() {
        let bad = file("bad.cbn", "var y : unit = ()\nmain = sub[{y:S}] ()\n");
        assert_eq!(call(&["check", bad.to_str().unwrap()]).0, EXIT_FAIL);
        assert_eq!(call(&["check", "/nonexistent/file.cbn"]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
        let p = file("undeclared.cbpv", FORCE);
        assert_eq!(
            call(&["run", "--drop", "nope", p.to_str().unwrap()]).0,
            EXIT_USAGE
        );
        let cbpv = file("plain.cbpv", "main = ret ()\n");
        assert_eq!(call(&["translate", cbpv.to_str().unwrap()]).0, EXIT_USAGE);
    }

    #[test]
    fn language_flag_overrides_a_missing_extension() {
        let p = file("noext", "main = ret ()\n");
        assert_eq!(call(&["check", p.to_str().unwrap()]).0, EXIT_FAIL);
        assert_eq!(
            call(&["check", "--lang", "cbpv", p.to_str().unwrap()]).0,
            EXIT_OK
        );
    }

    #[test]
    fn mode_flag_sets_the_default_mode() {
        let p = file("unused.cbn", "var a : unit = ()\nmain = ()\n");
        let (_, out, _) = call(&["report", "--mode", "extended", p.to_str().unwrap()]);
        assert!(out.contains("var a            U  unused"), "{out}");
        let (_, out, _) = call(&["report", p.to_str().unwrap()]);
        assert!(out.contains("var a            L  lazy"), "{out}");
        let (_, json, _) = call(&["--json", "check", "--mode", "extended", p.to_str().unwrap()]);
        assert!(
            json.lines().all(|l| l.contains("\"mode\":\"extended\"")),
            "{json}"
        );
    }

    #[test]
    fn json_lines_have_fixed_key_order() {
        let p = file("json.cbpv", FORCE);
        let (_, out, _) = call(&["--json", "run", p.to_str().unwrap()]);
        assert!(
            out.starts_with("{\"kind\":\"result\",\"status\":\"success\",\"terminal\":"),
            "{out}"
        );
        let (code, out, _) = call(&[
            "--json",
            "verify",
            "--theorem",
            "soundness",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(
            out.starts_with("{\"lang\":\"cbpv\",\"mode\":\"base\",\"theorem\":\"soundness\""),
            "{out}"
        );
    }
}
