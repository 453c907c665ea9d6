//! Report files written by `bench` and `sense`, and the `report` merge.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aedbench_core::evaluation::{BenchParams, BenchReport, DetectorSummary};
use aedbench_core::sensitivity::{SensitivityReport, SensitivityTest};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{read_to_string, write_atomic, Provenance};

pub const BENCH_JSONL: &str = "bench.jsonl";
pub const BENCH_TXT: &str = "bench.txt";
pub const BENCH_F1_CSV: &str = "bench_f1.csv";
pub const SENSE_JSON: &str = "sense.json";
pub const SENSE_TXT: &str = "sense.txt";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const PLOT_BENCH_CSV: &str = "plot_bench_f1.csv";
pub const PLOT_SENSE_CSV: &str = "plot_sensitivity.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BenchHeader {
    #[serde(flatten)]
    provenance: Provenance,
    instances: usize,
    params: BenchParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum BenchLine {
    Header(BenchHeader),
    Detector(DetectorSummary),
}

fn json_line<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("report serializes"));
    out.push('\n');
}

/// Header record, then one record per detector with its per-instance cells.
pub fn bench_jsonl(report: &BenchReport, provenance: &Provenance) -> String {
    let mut out = String::new();
    json_line(
        &mut out,
        &BenchLine::Header(BenchHeader {
            provenance: provenance.clone(),
            instances: report.instances,
            params: report.params,
        }),
    );
    for d in &report.detectors {
        json_line(&mut out, &BenchLine::Detector(d.clone()));
    }
    out
}

pub fn parse_bench_jsonl(text: &str, path: &Path) -> Result<(Provenance, BenchReport)> {
    let mut header = None;
    let mut detectors = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line_no = i as u64 + 1;
        match serde_json::from_str(line).map_err(|e| CliError::parse(path, line_no, e.to_string()))? {
            BenchLine::Header(h) if header.is_none() => header = Some(h),
            BenchLine::Header(_) => return Err(CliError::parse(path, line_no, "second header record")),
            BenchLine::Detector(_) if header.is_none() => {
                return Err(CliError::parse(path, line_no, "detector record before the header"))
            }
            BenchLine::Detector(d) => detectors.push(d),
        }
    }
    let h = header.ok_or_else(|| CliError::parse(path, 1, "missing header record"))?;
    Ok((h.provenance, BenchReport { params: h.params, instances: h.instances, detectors }))
}

pub fn bench_table(report: &BenchReport) -> String {
    let p = &report.params;
    let width = report.detectors.iter().map(|d| d.detector.len()).max().unwrap_or(0).max(8);
    let mut out = format!(
        "weighted F1 over {} instances (z = {}, lag = {}, train fraction {})\n",
        report.instances, p.z, p.lag, p.train_fraction
    );
    let _ = writeln!(out, "{:<width$}  {:>17}  {:>6}  {:>6}", "detector", "mean ± std", "scored", "failed");
    for d in &report.detectors {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4} ± {:<6.4}  {:>6}  {:>6}",
            d.detector, d.mean, d.std, d.scored, d.failed
        );
    }
    out
}

pub fn bench_f1_csv(report: &BenchReport, provenance: &Provenance) -> String {
    let mut out = provenance.comment();
    out.push_str("\ndetector,instance,f1\n");
    for d in &report.detectors {
        for c in &d.cells {
            match c.score() {
                Some(s) => {
                    let _ = writeln!(out, "{},{},{}", d.detector, c.instance, s.f1);
                }
                None => {
                    let _ = writeln!(out, "{},{},", d.detector, c.instance);
                }
            }
        }
    }
    out
}

pub fn write_bench(dir: &Path, report: &BenchReport, provenance: &Provenance) -> Result<()> {
    write_atomic(&dir.join(BENCH_JSONL), bench_jsonl(report, provenance).as_bytes())?;
    let txt = format!("{}\n{}", provenance.comment(), bench_table(report));
    write_atomic(&dir.join(BENCH_TXT), txt.as_bytes())?;
    write_atomic(&dir.join(BENCH_F1_CSV), bench_f1_csv(report, provenance).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SenseFile {
    #[serde(flatten)]
    provenance: Provenance,
    #[serde(flatten)]
    report: SensitivityReport,
}

pub fn sense_json(report: &SensitivityReport, provenance: &Provenance) -> String {
    let file = SenseFile { provenance: provenance.clone(), report: report.clone() };
    let mut out = serde_json::to_string_pretty(&file).expect("report serializes");
    out.push('\n');
    out
}

pub fn parse_sense_json(text: &str, path: &Path) -> Result<(Provenance, SensitivityReport)> {
    let file: SenseFile = serde_json::from_str(text).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))?;
    Ok((file.provenance, file.report))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:+.4}"))
}

/// Detector by test table of mean ΔF1, then every grid point.
pub fn sense_table(report: &SensitivityReport) -> String {
    let mut detectors: Vec<&str> = Vec::new();
    let mut tests: Vec<SensitivityTest> = Vec::new();
    for r in &report.results {
        if !detectors.contains(&r.detector.as_str()) {
            detectors.push(&r.detector);
        }
        if !tests.contains(&r.test) {
            tests.push(r.test);
        }
    }
    let width = detectors.iter().map(|d| d.len()).max().unwrap_or(0).max(8);
    let labels = serde_json::to_value(report.labels).expect("label mode serializes");
    let mut out = format!("mean ΔF1 per test ({} labels)\n", labels.as_str().unwrap_or("?"));
    let _ = write!(out, "{:<width$}", "detector");
    for t in &tests {
        let _ = write!(out, "  {:>8}", t.as_str());
    }
    out.push('\n');
    for d in &detectors {
        let _ = write!(out, "{d:<width$}");
        for &t in &tests {
            let cell = report.result(d, t).map_or_else(|| "-".to_string(), |r| opt(r.delta_f1));
            let _ = write!(out, "  {cell:>8}");
        }
        out.push('\n');
    }
    out
}

/// Every grid point, one row each, for plotting F1 against the perturbation.
pub fn sense_points_csv(report: &SensitivityReport) -> String {
    let mut out = String::from("detector,test,point,f1,std,scored\n");
    let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &report.results {
        for p in &r.points {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.detector, r.test, p.point, f(p.f1), f(p.std), p.scored);
        }
    }
    out
}

pub fn write_sense(dir: &Path, report: &SensitivityReport, provenance: &Provenance) -> Result<()> {
    write_atomic(&dir.join(SENSE_JSON), sense_json(report, provenance).as_bytes())?;
    let txt = format!("{}\n{}\n{}", provenance.comment(), sense_table(report), sense_points_csv(report));
    write_atomic(&dir.join(SENSE_TXT), txt.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
}

fn check_hash(first: &mut Option<(String, PathBuf)>, prov: &Provenance, path: &Path) -> Result<()> {
    match first {
        None => *first = Some((prov.config_hash.clone(), path.to_path_buf())),
        Some((hash, _)) if *hash != prov.config_hash => {
            return Err(CliError::ReportMismatch {
                first: hash.clone(),
                second: prov.config_hash.clone(),
                path: path.to_path_buf(),
            })
        }
        Some(_) => {}
    }
    Ok(())
}

fn input_files(input: &Path) -> Vec<PathBuf> {
    if input.is_dir() {
        [BENCH_JSONL, SENSE_JSON].iter().map(|f| input.join(f)).filter(|p| p.is_file()).collect()
    } else {
        vec![input.to_path_buf()]
    }
}

/// Merges bench and sensitivity outputs that share one config hash.
/// Detector rows from several bench files are concatenated; the same
/// detector twice must carry identical results.
pub fn merge(inputs: &[PathBuf]) -> Result<MergedReport> {
    let mut first: Option<(String, PathBuf)> = None;
    let mut bench: Option<BenchReport> = None;
    let mut sensitivity: Option<SensitivityReport> = None;
    let mut provenance = None;
    for input in inputs {
        let files = input_files(input);
        if files.is_empty() {
            return Err(CliError::Usage(format!("{} holds no bench or sensitivity output", input.display())));
        }
        for path in files {
            let text = read_to_string(&path)?;
            let is_sense = text.trim_start().starts_with('{') && !text.trim_start().starts_with("{\"type\"");
            if is_sense {
                let (prov, rep) = parse_sense_json(&text, &path)?;
                check_hash(&mut first, &prov, &path)?;
                provenance.get_or_insert(prov);
                match &mut sensitivity {
                    None => sensitivity = Some(rep),
                    Some(s) => merge_sense(s, rep, &path)?,
                }
            } else {
                let (prov, rep) = parse_bench_jsonl(&text, &path)?;
                check_hash(&mut first, &prov, &path)?;
                provenance.get_or_insert(prov);
                match &mut bench {
                    None => bench = Some(rep),
                    Some(b) => merge_bench(b, rep, &path)?,
                }
            }
        }
    }
    let provenance = provenance.ok_or_else(|| CliError::Usage("no report inputs".into()))?;
    Ok(MergedReport { provenance, bench, sensitivity })
}

fn conflict(path: &Path, what: &str) -> CliError {
    CliError::parse(path, 1, format!("conflicting results for {what}"))
}

fn merge_bench(into: &mut BenchReport, other: BenchReport, path: &Path) -> Result<()> {
    if into.params != other.params || into.instances != other.instances {
        return Err(conflict(path, "benchmark parameters"));
    }
    for d in other.detectors {
        match into.detector(&d.detector) {
            Some(existing) if *existing != d => return Err(conflict(path, &d.detector)),
            Some(_) => {}
            None => into.detectors.push(d),
        }
    }
    Ok(())
}

fn merge_sense(into: &mut SensitivityReport, other: SensitivityReport, path: &Path) -> Result<()> {
    if into.labels != other.labels {
        return Err(conflict(path, "label mode"));
    }
    for r in other.results {
        match into.result(&r.detector, r.test) {
            Some(existing) if *existing != r => return Err(conflict(path, &r.detector)),
            Some(_) => {}
            None => into.results.push(r),
        }
    }
    Ok(())
}

/// Writes the merged tables, the merged JSON, and plot CSVs for whichever
/// parts are present.
pub fn write_merged(dir: &Path, merged: &MergedReport) -> Result<Vec<PathBuf>> {
    let prov = &merged.provenance;
    let mut txt = prov.comment();
    txt.push('\n');
    let mut written = Vec::new();
    if let Some(b) = &merged.bench {
        txt.push_str(&bench_table(b));
        let path = dir.join(PLOT_BENCH_CSV);
        write_atomic(&path, bench_f1_csv(b, prov).as_bytes())?;
        written.push(path);
    }
    if let Some(s) = &merged.sensitivity {
        if merged.bench.is_some() {
            txt.push('\n');
        }
        txt.push_str(&sense_table(s));
        let path = dir.join(PLOT_SENSE_CSV);
        write_atomic(&path, format!("{}\n{}", prov.comment(), sense_points_csv(s)).as_bytes())?;
        written.push(path);
    }
    let path = dir.join(REPORT_TXT);
    write_atomic(&path, txt.as_bytes())?;
    written.push(path);
    let mut json = serde_json::to_string_pretty(merged).expect("report serializes");
    json.push('\n');
    let path = dir.join(REPORT_JSON);
    write_atomic(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}
