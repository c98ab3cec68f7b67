//! The command-line binary, run as a subprocess.

use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_strictness"));
    c.env_remove("STRICTNESS_MODE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp(name: &str, src: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("strictness-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::File::create(&path)
        .unwrap()
        .write_all(src.as_bytes())
        .unwrap();
    path
}

const FORCE: &str =
    "var y : unit = ()\nvar t : U[{y:S}] F unit = thunk { y; ret () }\nmain = force t\n";

#[test]
fn check_prints_the_main_judgment() {
    let f = temp("force.cbpv", FORCE);
    let o = run(&["check", f.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(
        out.lines()
            .any(|l| l.starts_with("⊢ main :^{") && l.ends_with("F unit")),
        "{out}"
    );
}

#[test]
fn dropping_a_strict_binding_exits_with_failure() {
    let f = temp("drop.cbpv", FORCE);
    let o = run(&["run", f.to_str().unwrap(), "--drop", "y"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing binding: y"));
    let o = run(&["run", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("effect"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        run(&["check", "/nonexistent/file.cbn"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let f = temp("tr.cbpv", FORCE);
    assert_eq!(
        run(&["translate", f.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn translate_emits_a_checkable_cbpv_program() {
    let f = temp("id.cbn", "var x : Bool = true\nmain = x\n");
    let o = run(&["translate", f.to_str().unwrap()]);
    assert!(o.status.success());
    let g = temp("id_translated.cbpv", &stdout(&o));
    assert!(run(&["check", g.to_str().unwrap()]).status.success());
}

#[test]
fn the_environment_selects_the_default_mode() {
    let f = temp("unused.cbn", "var a : unit = ()\nmain = ()\n");
    let base = stdout(&run(&["report", f.to_str().unwrap()]));
    let ext = bin()
        .env("STRICTNESS_MODE", "extended")
        .args(["report", f.to_str().unwrap()])
        .output()
        .unwrap();
    let ext = stdout(&ext);
    assert!(base.contains("lazy"), "{base}");
    assert!(ext.contains("unused"), "{ext}");
}

#[test]
fn json_output_is_one_object_per_line() {
    let f = temp("json.cbpv", FORCE);
    for cmd in ["check", "report", "run", "verify"] {
        let o = run(&["--json", cmd, f.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}");
        for line in stdout(&o).lines() {
            let v: serde_json::Value =
                serde_json::from_str(line).unwrap_or_else(|e| panic!("{cmd}: {e}: {line}"));
            assert!(v.is_object());
        }
    }
}

#[test]
fn fuzz_is_reproducible_and_passes() {
    let args = [
        "fuzz",
        "--lang",
        "cbn",
        "--trials",
        "10",
        "--seed",
        "3",
        "--workers",
        "2",
    ];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success(), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
}
