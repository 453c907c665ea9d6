use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use aedbench::plugin::{transcript, PluginDetector};
use aedbench_core::detectors::{DetectContext, Detector, DetectorError, TrainLabels, Verdict};
use aedbench_core::labeler::{LabelMatrix, RuleMask};
use aedbench_core::snapshot::{EdgeCount, SnapshotSequence};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Three nodes, twelve bins; node 2 receives a burst at bin 6.
fn tiny() -> (SnapshotSequence, LabelMatrix) {
    let bins = (0..12)
        .map(|t| {
            let mut e = vec![EdgeCount { source: 0, target: 1, count: 1 + (t % 3) as u32 }];
            if t == 6 {
                e.push(EdgeCount { source: 0, target: 2, count: 4 });
                e.push(EdgeCount { source: 1, target: 2, count: 2 });
            }
            e
        })
        .collect();
    let snap = SnapshotSequence::from_bins(900, 0, vec![10, 11, 12], bins);
    let labels = LabelMatrix::from_positives(3, 12, 1, [(2, 6, RuleMask::DEGREE_SPIKE), (1, 9, RuleMask::CURVATURE)]).unwrap();
    (snap, labels)
}

fn ctx() -> DetectContext {
    DetectContext { window: 1, lag: 1, fit_end: 8, targets: 8..11 }
}

fn plugin(script: &str, extra: &[&str], timeout: Duration) -> PluginDetector {
    let mut args = vec![fixture(script).display().to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    PluginDetector::new("plugin".into(), "python3".into(), args, timeout)
}

fn run(p: &PluginDetector) -> Result<aedbench_core::detectors::PredictionSeries, DetectorError> {
    let (snap, labels) = tiny();
    p.predict(&snap, &TrainLabels::new(&labels, 8), &ctx())
}

#[test]
fn transcript_matches_conformance_input() {
    let (snap, labels) = tiny();
    let got = transcript(&snap, &TrainLabels::new(&labels, 8), &ctx());
    let path = fixture("conformance_input.jsonl");
    if std::env::var_os("AEDBENCH_BLESS").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(got, want);
}

#[test]
fn echo_plugin_receives_the_transcript_and_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("input.jsonl");
    let p = plugin("echo_plugin.py", &[record.to_str().unwrap()], Duration::from_secs(60));
    let pred = run(&p).unwrap();
    for v in 0..3 {
        for t in 8..11 {
            assert_eq!(pred.get(v, t), Some(Verdict::Normal), "node {v} bin {t}");
        }
    }
    let recorded = std::fs::read_to_string(record).unwrap();
    assert_eq!(recorded, std::fs::read_to_string(fixture("conformance_input.jsonl")).unwrap());
}

#[test]
fn nonzero_exit_is_a_crash() {
    let err = run(&plugin("crash_plugin.py", &[], Duration::from_secs(60))).unwrap_err();
    assert_eq!(err, DetectorError::PluginCrash { code: Some(3) });
}

#[test]
fn error_message_then_failure_is_a_crash() {
    let err = run(&plugin("error_plugin.py", &[], Duration::from_secs(60))).unwrap_err();
    assert_eq!(err, DetectorError::PluginCrash { code: Some(1) });
}

#[test]
fn non_json_output_is_a_protocol_violation() {
    let err = run(&plugin("malformed_plugin.py", &[], Duration::from_secs(60))).unwrap_err();
    assert!(matches!(err, DetectorError::ProtocolViolation(_)), "{err:?}");
}

#[test]
fn incomplete_verdicts_are_a_protocol_violation() {
    let err = run(&plugin("short_plugin.py", &[], Duration::from_secs(60))).unwrap_err();
    assert!(matches!(err, DetectorError::ProtocolViolation(ref m) if m.contains("1 of 9")), "{err:?}");
}

#[test]
fn slow_plugin_times_out_and_is_killed() {
    let start = Instant::now();
    let err = run(&plugin("slow_plugin.py", &[], Duration::from_secs(1))).unwrap_err();
    assert_eq!(err, DetectorError::Timeout { seconds: 1 });
    assert!(start.elapsed() < Duration::from_secs(15));
}

#[test]
fn missing_executable_is_reported() {
    let p = PluginDetector::new("p".into(), "/nonexistent/plugin".into(), vec![], Duration::from_secs(5));
    assert!(matches!(run(&p).unwrap_err(), DetectorError::PluginIo(_)));
}
