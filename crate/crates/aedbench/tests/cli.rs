use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aedbench"))
}

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Exit code plus the JSON error record from stderr.
fn fails(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    assert!(!out.status.success(), "{args:?} succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    let record: Value = serde_json::from_str(stderr.trim()).unwrap_or_else(|e| panic!("{e}: {stderr}"));
    (out.status.code().unwrap(), record)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"
seed = 11

[generator]
num_nodes = 60
duration = 27000

[sampling]
instances = 2
target_size = 30

[labeler]
z = 1
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn label_on_empty_events_is_sequence_too_short() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let events = dir.path().join("empty.csv");
    fs::write(&events, "source,target,timestamp,action\n").unwrap();
    let (code, rec) = fails(&["label", "--config", s(&cfg), "--events", s(&events), "--out", s(dir.path())]);
    assert_eq!(code, 4);
    assert_eq!(rec["error"], "domain");
    assert_eq!(rec["code"], 4);
    assert!(rec["message"].as_str().unwrap().contains("0 bins is too short"), "{rec}");
}

#[test]
fn parse_errors_carry_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("bad.csv");
    fs::write(&events, "1,2,10,like\n1,2,x,like\n").unwrap();
    let (code, rec) = fails(&["ingest", s(&events), "--out", s(dir.path())]);
    assert_eq!(code, 3);
    assert_eq!(rec["line"], 2);
    assert_eq!(rec["path"], s(&events));
}

#[test]
fn usage_config_and_io_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fails(&["bench", "--bogus"]).0, 2);
    let no_seed = write_config(dir.path(), "c.toml", &TINY.replace("seed = 11", ""));
    let (code, rec) = fails(&["bench", "--config", s(&no_seed)]);
    assert_eq!((code, rec["error"].as_str().unwrap()), (2, "config"));
    let missing = dir.path().join("missing.toml");
    let (code, rec) = fails(&["bench", "--config", s(&missing)]);
    assert_eq!((code, rec["error"].as_str().unwrap()), (6, "io"));
    let cfg = write_config(dir.path(), "ok.toml", TINY);
    assert_eq!(fails(&["bench", "--config", s(&cfg), "--jobs", "0"]).0, 2);
}

#[test]
fn ingest_writes_canonical_events() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("in.jsonl");
    fs::write(
        &events,
        "{\"source\":3,\"target\":1,\"timestamp\":50,\"action\":\"share\"}\n1,3,20,like\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(&["ingest", s(&events), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("events.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# aedbench "));
    assert_eq!(&lines[1..], ["source,target,timestamp,action", "1,3,20,like", "3,1,50,share"]);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(config: &Path, out: &Path, jobs: &str) {
    let c = s(config);
    let o = s(out);
    let events = out.join("events.csv");
    let labels = out.join("labels");
    ok(&["generate", "--config", c, "--out", o]);
    ok(&["label", "--config", c, "--events", s(&events), "--out", o, "--jobs", jobs]);
    ok(&["bench", "--config", c, "--events", s(&events), "--labels-dir", s(&labels), "--out", o, "--jobs", jobs]);
    ok(&["sense", "--config", c, "--events", s(&events), "--labels-dir", s(&labels), "--out", o, "--jobs", jobs]);
    ok(&["report", o, "--out", s(&out.join("report"))]);
}

#[test]
fn pipeline_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&smoke_config(), &a, "1");
    pipeline(&smoke_config(), &b, "3");
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.iter().any(|(n, _)| n.ends_with("report.txt")));
    assert!(fa.iter().any(|(n, _)| n.ends_with("instance_002.labels")));
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs");
    }
    // every output carries the provenance stamp
    for (name, bytes) in &fa {
        let text = String::from_utf8_lossy(bytes);
        assert!(text.contains("aedbench") && text.contains(env!("CARGO_PKG_VERSION")), "{name}");
    }
}

#[test]
fn bench_from_labels_matches_recomputed_labels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--config", s(&cfg), "--out", s(&a)]);
    let events = a.join("events.csv");
    ok(&["label", "--config", s(&cfg), "--events", s(&events), "--out", s(&a)]);
    ok(&["bench", "--config", s(&cfg), "--events", s(&events), "--labels-dir", s(&a.join("labels")), "--out", s(&a)]);
    ok(&["bench", "--config", s(&cfg), "--events", s(&events), "--out", s(&b)]);
    assert_eq!(fs::read(a.join("bench.jsonl")).unwrap(), fs::read(b.join("bench.jsonl")).unwrap());
}

#[test]
fn labels_from_another_config_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let other = write_config(dir.path(), "d.toml", &TINY.replace("seed = 11", "seed = 12"));
    let out = dir.path().join("o");
    ok(&["label", "--config", s(&cfg), "--out", s(&out)]);
    let (code, _) = fails(&["bench", "--config", s(&other), "--labels-dir", s(&out.join("labels")), "--out", s(&out)]);
    assert_eq!(code, 7);
}

#[test]
fn report_refuses_mismatched_config_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["bench", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["bench", "--config", s(&cfg), "--seed", "99", "--out", s(&b)]);
    let (code, rec) = fails(&["report", s(&a), s(&b), "--out", s(&dir.path().join("r"))]);
    assert_eq!(code, 7);
    assert_eq!(rec["error"], "report_mismatch");
    // the same config twice merges
    ok(&["report", s(&a), s(&a.join("bench.jsonl")), "--out", s(&dir.path().join("r"))]);
}

#[test]
fn bench_with_a_plugin_detector_reports_its_row() {
    let dir = tempfile::tempdir().unwrap();
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/echo_plugin.py");
    let text = format!(
        "{TINY}\n[[detectors]]\nkind = \"rolling_zscore\"\n\n[[detectors]]\nkind = \"plugin\"\nname = \"echo\"\n\
         hyperparameters = {{ command = \"python3\", args = [{:?}], timeout_seconds = 120 }}\n",
        s(&script)
    );
    let cfg = write_config(dir.path(), "c.toml", &text);
    ok(&["bench", "--config", s(&cfg), "--out", s(dir.path())]);
    let jsonl = fs::read_to_string(dir.path().join("bench.jsonl")).unwrap();
    let rows: Vec<Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let echo = rows.iter().find(|r| r["detector"] == "echo").expect("plugin row");
    assert_eq!(echo["scored"], 2);
    assert_eq!(echo["failed"], 0);
    // all-normal verdicts: every cell has a window-free score
    for cell in echo["cells"].as_array().unwrap() {
        assert!(cell["scored"]["window"].is_null(), "{cell}");
    }
    assert!(fs::read_to_string(dir.path().join("bench.txt")).unwrap().contains("echo"));
}
