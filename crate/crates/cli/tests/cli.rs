use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_thermo-axioms");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name).display().to_string()
}

#[test]
fn generated_model_passes_check() {
    let gen = run(&["gen", "--nx", "2", "--ny", "2", "--nz", "1", "--steps", "4", "--seed", "5"]);
    assert_eq!(gen.status.code(), Some(0));
    let check = run_with_stdin(&["check", "-"], &gen.stdout);
    assert_eq!(check.status.code(), Some(0), "{}", stdout(&check));
    assert!(stdout(&check).ends_with("result: all 19 checks pass\n"));
}

#[test]
fn generator_block_output_also_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.tm");
    let p = path.to_str().unwrap();
    let gen = run(&["gen", "--generator", "--nx", "3", "--ny", "3", "--radiative", "0.5", "--radiator", "0,0,0", "2,2,0", "--out", p]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(std::fs::read_to_string(&path).unwrap().contains("[generator]"));
    assert_eq!(run(&["check", p]).status.code(), Some(0));
}

#[test]
fn mutant_fails_its_axiom() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.tm");
    let bad = dir.path().join("bad.tm");
    let gen = run(&["gen", "--nx", "3", "--ny", "3", "--nz", "1", "--dt", "0.05", "--steps", "4", "--out", base.to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0));
    let m = run(&["mutate", base.to_str().unwrap(), "--axiom", "T10", "--out", bad.to_str().unwrap()]);
    assert_eq!(m.status.code(), Some(0), "{}", String::from_utf8_lossy(&m.stderr));
    let check = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(1));
    let out = stdout(&check);
    assert!(out.contains("T10             FAIL"), "{out}");
    assert!(out.ends_with("checks failed: T10\n"), "{out}");
    let timeless = run(&["timeless", bad.to_str().unwrap()]);
    assert_eq!(timeless.status.code(), Some(1));
    assert!(stdout(&timeless).ends_with("checks failed: NT9\n"));
}

#[test]
fn time_is_definable_from_the_cli() {
    let o = run(&["padoa", &fixture("bar.tm"), "--primitive", "TIME"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("outcome: none-found"), "{out}");
    assert!(out.contains("(exhaustive)"), "{out}");
}

#[test]
fn small_budget_is_inconclusive() {
    let o = run(&["padoa", &fixture("scenario.gen.tm"), "--primitive", "H", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("outcome: inconclusive"));
}

#[test]
fn parse_errors_are_usage_errors() {
    let o = run_with_stdin(&["check", "-"], b"thermo-model 1\ngrid 1 1 1 1\ntime 0 0\nbody all\n");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("-:3:8: time"), "{err}");
    assert_eq!(run(&["check", "/nonexistent/model.tm"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["mutate", &fixture("bar.tm"), "--axiom", "T99"]).status.code(), Some(2));
    assert_eq!(run(&["check", &fixture("bar.tm"), "--tolerance-balance", "-1"]).status.code(), Some(2));
}

#[test]
fn json_reports_are_byte_identical() {
    for args in [
        vec!["check", "--format", "json"],
        vec!["timeless", "--format", "json"],
        vec!["padoa", "--primitive", "E", "--format", "json"],
    ] {
        let mut a = args.clone();
        let f = fixture("scenario_t8.tm");
        a.insert(1, &f);
        let first = run(&a);
        let second = run(&a);
        assert!(!first.stdout.is_empty());
        assert_eq!(first.stdout, second.stdout, "{args:?}");
        let v: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
        assert!(v["schema"].as_str().unwrap().starts_with("thermo-axioms/"), "{v}");
    }
}
