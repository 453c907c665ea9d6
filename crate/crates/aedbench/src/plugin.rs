//! External detectors as subprocesses speaking line-delimited JSON.
//!
//! The harness writes `init`, then one `event` per nonzero (bin, edge) in
//! ascending bin order, one `label` per positive training cell and finally
//! `predict` with the target bins. The plugin answers with exactly one
//! `verdict` per (node, target bin), then `done`, and exits with status 0.
//! Nodes are dense indices `0..node_count`.
//!
//! Events after the last bin any target may observe (`last target - lag`)
//! are withheld.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use aedbench_core::detectors::{
    build_native, DetectContext, Detector, DetectorError, DetectorKind, DetectorSpec, ParamValue, PredictionSeries,
    TrainLabels, Verdict,
};
use aedbench_core::snapshot::SnapshotSequence;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

pub const DEFAULT_TIMEOUT_SECONDS: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HarnessMessage {
    Init { z: usize, lag: usize, node_count: usize, num_bins: usize },
    Event { bin: usize, source: u32, target: u32, count: u32 },
    Label { node: usize, bin: usize },
    Predict { bins: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PluginMessage {
    Verdict { node: usize, bin: usize, anomalous: bool },
    Done {},
    Error { message: String },
}

/// Everything the harness sends for one fit, in order.
pub fn harness_messages(snap: &SnapshotSequence, train: &TrainLabels<'_>, ctx: &DetectContext) -> Vec<HarnessMessage> {
    let mut out = vec![HarnessMessage::Init {
        z: train.z(),
        lag: ctx.lag,
        node_count: snap.node_count(),
        num_bins: snap.num_bins(),
    }];
    let visible = ctx.horizon().map_or(0, |h| h + 1);
    for (bin, b) in snap.bins().iter().enumerate().take(visible) {
        out.extend(b.edges().iter().map(|e| HarnessMessage::Event {
            bin,
            source: e.source,
            target: e.target,
            count: e.count,
        }));
    }
    out.extend(train.positives().map(|(node, bin)| HarnessMessage::Label { node, bin }));
    out.push(HarnessMessage::Predict { bins: ctx.targets.clone().collect() });
    out
}

/// The harness side of the exchange as the bytes written to the plugin.
pub fn transcript(snap: &SnapshotSequence, train: &TrainLabels<'_>, ctx: &DetectContext) -> String {
    let mut s = String::new();
    for m in harness_messages(snap, train, ctx) {
        s.push_str(&serde_json::to_string(&m).expect("message serializes"));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone)]
pub struct PluginDetector {
    name: String,
    command: String,
    args: Vec<String>,
    timeout: Duration,
}

fn bad(key: &str, reason: &'static str) -> DetectorError {
    DetectorError::InvalidHyperparameter { key: key.to_string(), reason }
}

impl PluginDetector {
    pub fn new(name: String, command: String, args: Vec<String>, timeout: Duration) -> Self {
        PluginDetector { name, command, args, timeout }
    }

    /// Hyperparameters: `command` (required), `args`, `timeout_seconds`.
    pub fn from_spec(name: String, spec: &DetectorSpec) -> Result<Self, DetectorError> {
        let mut command = None;
        let mut args = Vec::new();
        let mut timeout = DEFAULT_TIMEOUT_SECONDS;
        for (key, value) in &spec.hyperparameters {
            match (key.as_str(), value) {
                ("command", ParamValue::Text(c)) => command = Some(c.clone()),
                ("args", ParamValue::List(a)) => args = a.clone(),
                ("timeout_seconds", ParamValue::Number(t)) if t.is_finite() && *t > 0.0 => timeout = *t,
                ("command" | "args" | "timeout_seconds", _) => return Err(bad(key, "wrong type or value")),
                _ => return Err(bad(key, "unknown for this detector kind")),
            }
        }
        let command = command.ok_or_else(|| bad("command", "required"))?;
        Ok(Self::new(name, command, args, Duration::from_secs_f64(timeout)))
    }

    fn timeout_error(&self) -> DetectorError {
        DetectorError::Timeout { seconds: self.timeout.as_secs_f64().ceil() as u64 }
    }

    fn spawn(&self) -> Result<Child, DetectorError> {
        Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| DetectorError::PluginIo(format!("cannot start `{}`: {e}", self.command)))
    }

    fn wait_until(&self, child: &mut Child, deadline: Instant) -> Result<ExitStatus, DetectorError> {
        let left = deadline.saturating_duration_since(Instant::now());
        match child.wait_timeout(left) {
            Ok(Some(status)) => Ok(status),
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(self.timeout_error())
            }
            Err(e) => Err(DetectorError::PluginIo(e.to_string())),
        }
    }

    /// Runs one exchange and returns the verdicts in arrival order.
    pub fn exchange(&self, input: String, node_count: usize, bins: &[usize]) -> Result<Vec<(usize, usize, bool)>, DetectorError> {
        let deadline = Instant::now() + self.timeout;
        let mut child = self.spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        // a plugin may stop reading early; the broken pipe then shows up as
        // a crash or violation on the read side
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
        let (tx, rx) = mpsc::channel();
        let reader = thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let result = self.read_verdicts(&rx, &mut child, deadline, node_count, bins);
        if result.is_err() {
            let _ = child.kill();
            let _ = child.wait();
        }
        let _ = writer.join();
        let _ = reader.join();
        result
    }

    fn read_verdicts(
        &self,
        rx: &mpsc::Receiver<std::io::Result<String>>,
        child: &mut Child,
        deadline: Instant,
        node_count: usize,
        bins: &[usize],
    ) -> Result<Vec<(usize, usize, bool)>, DetectorError> {
        let wanted: BTreeSet<usize> = bins.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut verdicts = Vec::new();
        let violation = |m: String| DetectorError::ProtocolViolation(m);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match rx.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(DetectorError::PluginIo(e.to_string())),
                Err(mpsc::RecvTimeoutError::Timeout) => return Err(self.timeout_error()),
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    let status = self.wait_until(child, deadline)?;
                    return Err(if status.success() {
                        violation("output ended before `done`".into())
                    } else {
                        DetectorError::PluginCrash { code: status.code() }
                    });
                }
            };
            let message: PluginMessage =
                serde_json::from_str(&line).map_err(|_| violation(format!("malformed line: {line}")))?;
            match message {
                PluginMessage::Verdict { node, bin, anomalous } => {
                    if node >= node_count || !wanted.contains(&bin) {
                        return Err(violation(format!("verdict outside the requested cells: {line}")));
                    }
                    if !seen.insert((node, bin)) {
                        return Err(violation(format!("duplicate verdict: {line}")));
                    }
                    verdicts.push((node, bin, anomalous));
                }
                PluginMessage::Error { message } => {
                    let status = self.wait_until(child, deadline)?;
                    return Err(match status.code() {
                        Some(0) => violation(format!("plugin error without failure status: {message}")),
                        code => DetectorError::PluginCrash { code },
                    });
                }
                PluginMessage::Done {} => break,
            }
        }
        let expected = node_count * wanted.len();
        if seen.len() != expected {
            return Err(violation(format!("`done` after {} of {expected} verdicts", seen.len())));
        }
        let status = self.wait_until(child, deadline)?;
        if let Ok(Ok(extra)) = rx.recv_timeout(Duration::from_millis(50)) {
            return Err(violation(format!("output after `done`: {extra}")));
        }
        if !status.success() {
            return Err(DetectorError::PluginCrash { code: status.code() });
        }
        Ok(verdicts)
    }
}

impl Detector for PluginDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn windowed(&self) -> bool {
        false
    }

    fn predict(
        &self,
        snap: &SnapshotSequence,
        train: &TrainLabels<'_>,
        ctx: &DetectContext,
    ) -> Result<PredictionSeries, DetectorError> {
        ctx.validate(snap)?;
        let bins: Vec<usize> = ctx.targets.clone().collect();
        let verdicts = self.exchange(transcript(snap, train, ctx), snap.node_count(), &bins)?;
        let mut pred = PredictionSeries::new(snap.node_count(), ctx.targets.clone(), ctx.lag);
        for (node, bin, anomalous) in verdicts {
            pred.set(node, bin, if anomalous { Verdict::Anomalous } else { Verdict::Normal });
        }
        Ok(pred)
    }
}

/// Native detectors and plugins from one spec.
pub fn build_detector(spec: &DetectorSpec) -> Result<Box<dyn Detector>, DetectorError> {
    match spec.kind {
        DetectorKind::Plugin => Ok(Box::new(PluginDetector::from_spec(spec.label(), spec)?)),
        _ => build_native(spec),
    }
}
