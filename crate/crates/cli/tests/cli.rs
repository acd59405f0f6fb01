use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_proofsynth")
}

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy-corpus/corpus.manifest")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).args(args).arg("--out-dir").arg(dir).env_remove("CHECKER_ADDR").env_remove("GENERATOR_URL").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn prepared() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["ingest", "--corpus", manifest().to_str().unwrap()]);
    ok(d.path(), &["split", "--fractions", "0.8,0.1,0.1", "--seed", "3"]);
    d
}

#[test]
fn ingest_drops_pseudo_theorems_and_absolute_paths() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["ingest", "--corpus", manifest().to_str().unwrap()]);
    assert!(out.contains("200 theorems (5 pseudo-theorems removed)"), "{out}");
    let archive = fs::read_to_string(d.path().join("corpus.json")).unwrap();
    assert!(!archive.contains(manifest().parent().unwrap().to_str().unwrap()));
    let kept = tempfile::tempdir().unwrap();
    let out = ok(kept.path(), &["ingest", "--corpus", manifest().to_str().unwrap(), "--keep-pseudo"]);
    assert!(out.contains("205 theorems"), "{out}");
}

#[test]
fn usage_errors_exit_2() {
    let d = prepared();
    for args in [
        vec!["run", "--n-samples", "0"],
        vec!["run", "--temperature", "0.2", "--temperature-grid", "0.0,0.4"],
        vec!["run", "--mode", "iterated-repair", "--rounds", "0"],
        vec!["run", "--mode", "iterated-repair", "--temperature", "0.8"],
        vec!["run", "--generator", "remote"],
        vec!["run", "--checker", "remote"],
        vec!["run", "--name", "../escape"],
        vec!["eval", "--budgets", "4,2"],
    ] {
        let out = run(d.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    // clap's own parse errors also exit 2
    assert_eq!(run(d.path(), &["run", "--mode", "nope"]).status.code(), Some(2));
}

#[test]
fn missing_artifacts_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["split"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `ingest` first"));
}

#[test]
fn unreachable_generator_exits_1_with_skips_logged() {
    let d = prepared();
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    let out = run(d.path(), &["run", "--generator", "remote", "--generator-url", &url, "--generator-timeout-ms", "500"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(d.path().join("runs/generate-n1/t0.0.jsonl")).unwrap();
    assert!(log.lines().all(|l| l.contains("\"kind\":\"skip\"") && l.contains("\"cause\":\"backend\"")));
    assert_eq!(log.lines().count(), 40);
}

#[test]
fn subprocess_checker_matches_embedded() {
    let d = prepared();
    ok(d.path(), &["run", "--n-samples", "4", "--temperature", "0.8", "--name", "local"]);
    let addr = format!("exec:{} serve-checker --stdio", bin());
    ok(d.path(), &["run", "--n-samples", "4", "--temperature", "0.8", "--name", "remote", "--checker", "remote", "--checker-addr", &addr]);
    let a = fs::read(d.path().join("runs/local/t0.8.jsonl")).unwrap();
    let b = fs::read(d.path().join("runs/remote/t0.8.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn examples_are_written_per_flavor() {
    let d = prepared();
    ok(d.path(), &["build-examples", "--flavor", "context", "--subset", "test"]);
    let text = fs::read_to_string(d.path().join("examples/context.test.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 20);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["flavor"], "generate_with_context");
    let out = run(d.path(), &["build-examples", "--flavor", "generate", "--max-input", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_reports_curves_and_aligned_points() {
    let d = prepared();
    ok(d.path(), &["run", "--n-samples", "4", "--temperature-grid", "0.0,0.8"]);
    ok(d.path(), &["run", "--mode", "generate+repair", "--n-samples", "2", "--temperature-grid", "0.0,0.8"]);
    ok(d.path(), &["run", "--mode", "iterated-repair"]);
    let summary = ok(d.path(), &["eval", "--ensemble", "--exact"]);
    assert!(summary.contains("union of"), "{summary}");
    let report = d.path().join("report");
    let gen = fs::read_to_string(report.join("generate-n4.csv")).unwrap();
    let lines: Vec<&str> = gen.lines().collect();
    assert_eq!(lines[0], "inference cost,theorems proven,ratio,temperature");
    assert_eq!(lines.iter().skip(1).map(|l| l.split(',').next().unwrap()).collect::<Vec<_>>(), ["1", "2", "4"]);
    // repair runs are one point at the aligned budget
    for (name, budget) in [("repair-n2.csv", "4"), ("iterated-r2.csv", "3")] {
        let text = fs::read_to_string(report.join(name)).unwrap();
        assert_eq!(text.lines().count(), 2, "{name}");
        assert!(text.lines().nth(1).unwrap().starts_with(&format!("{budget},")), "{name}");
    }
    // evaluating again changes nothing
    let before = fs::read(report.join("summary.txt")).unwrap();
    ok(d.path(), &["eval", "--ensemble", "--exact"]);
    assert_eq!(fs::read(report.join("summary.txt")).unwrap(), before);
}

#[test]
fn eval_rejects_budgets_beyond_the_samples() {
    let d = prepared();
    ok(d.path(), &["run", "--n-samples", "2"]);
    let out = run(d.path(), &["eval", "--budgets", "1,4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget 4"));
}
