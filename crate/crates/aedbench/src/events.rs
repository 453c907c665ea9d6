//! Events files: one interaction per line, either `source,target,timestamp,action`
//! or a JSON object with those four fields. Both forms may be mixed; `#` lines
//! are comments except for the `# nodes` and `# node_states` directives,
//! which carry nodes without events and the state count.

use std::fmt::Write as _;
use std::num::NonZeroU32;
use std::path::Path;

use aedbench_core::graph::{build_graph, Action, InteractionEvent, NodeId, TemporalGraph};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{read_to_string, write_atomic, Provenance};

const CSV_HEADER: &str = "source,target,timestamp,action";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl EventFormat {
    /// JSONL for `.jsonl` / `.json` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    source: NodeId,
    target: NodeId,
    timestamp: i64,
    action: Action,
}

fn parse_csv_line(line: &str) -> std::result::Result<EventRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let [source, target, timestamp, action] = fields[..] else {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    };
    let id = |s: &str, what| s.parse::<NodeId>().map_err(|_| format!("invalid {what} `{s}`"));
    Ok(EventRecord {
        source: id(source, "source")?,
        target: id(target, "target")?,
        timestamp: timestamp.parse().map_err(|_| format!("invalid timestamp `{timestamp}`"))?,
        action: action.parse().map_err(|()| format!("unknown action `{action}`"))?,
    })
}

/// `0-3,7,9-10` style list of node ids.
fn parse_ranges(s: &str) -> Option<Vec<NodeId>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (NodeId, NodeId) = (a.parse().ok()?, b.parse().ok()?);
                if a > b {
                    return None;
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().ok()?),
        }
    }
    Some(out)
}

fn format_ranges(ids: &[NodeId]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < ids.len() {
        let mut j = i;
        while j + 1 < ids.len() && ids[j + 1] == ids[j] + 1 {
            j += 1;
        }
        if !out.is_empty() {
            out.push(',');
        }
        if j > i {
            let _ = write!(out, "{}-{}", ids[i], ids[j]);
        } else {
            let _ = write!(out, "{}", ids[i]);
        }
        i = j + 1;
    }
    out
}

/// Parsed events file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct EventsFile {
    pub events: Vec<InteractionEvent>,
    pub nodes: Option<Vec<NodeId>>,
    pub node_states: Option<NonZeroU32>,
    pub provenance: Option<Provenance>,
}

impl EventsFile {
    /// Builds the graph; an empty file with no node directive is an empty
    /// graph error from the graph builder.
    pub fn into_graph(self) -> Result<TemporalGraph> {
        Ok(build_graph(self.events, self.nodes.as_deref())?.with_node_state_count(self.node_states))
    }
}

pub fn parse_events(text: &str, path: &Path) -> Result<EventsFile> {
    let mut file = EventsFile { events: Vec::new(), nodes: None, node_states: None, provenance: None };
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(list) = line.strip_prefix("# nodes ") {
                let ids = parse_ranges(list.trim()).ok_or_else(|| CliError::parse(path, line_no, "malformed node list"))?;
                file.nodes = Some(ids);
            } else if let Some(k) = line.strip_prefix("# node_states ") {
                let k = k.trim().parse().map_err(|_| CliError::parse(path, line_no, "malformed node state count"))?;
                file.node_states = Some(k);
            } else if let Some(p) = Provenance::parse_comment(line) {
                file.provenance.get_or_insert(p);
            }
            continue;
        }
        if !seen_data && line.replace(' ', "") == CSV_HEADER {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let record = if line.starts_with('{') {
            serde_json::from_str::<EventRecord>(line).map_err(|e| e.to_string())
        } else {
            parse_csv_line(line)
        }
        .map_err(|m| CliError::parse(path, line_no, m))?;
        if record.source == record.target {
            return Err(CliError::parse(path, line_no, "self-interaction"));
        }
        if record.timestamp < 0 {
            return Err(CliError::parse(path, line_no, "negative timestamp"));
        }
        file.events.push(InteractionEvent::new(record.source, record.target, record.timestamp, record.action));
    }
    Ok(file)
}

pub fn read_events(path: &Path) -> Result<EventsFile> {
    parse_events(&read_to_string(path)?, path)
}

/// Serializes `graph` in canonical event order. The node directive is only
/// written when some node has no events.
pub fn format_events(graph: &TemporalGraph, format: EventFormat, provenance: &Provenance) -> String {
    let mut out = provenance.comment();
    out.push('\n');
    let mut endpoints: Vec<NodeId> = graph.events().iter().flat_map(|e| [e.source, e.target]).collect();
    endpoints.sort_unstable();
    endpoints.dedup();
    if endpoints != graph.nodes() {
        let _ = writeln!(out, "# nodes {}", format_ranges(graph.nodes()));
    }
    if let Some(k) = graph.node_state_count() {
        let _ = writeln!(out, "# node_states {k}");
    }
    if format == EventFormat::Csv {
        out.push_str(CSV_HEADER);
        out.push('\n');
    }
    for e in graph.events() {
        match format {
            EventFormat::Csv => {
                let _ = writeln!(out, "{},{},{},{}", e.source, e.target, e.timestamp, e.action);
            }
            EventFormat::Jsonl => {
                let rec = EventRecord { source: e.source, target: e.target, timestamp: e.timestamp, action: e.action };
                out.push_str(&serde_json::to_string(&rec).expect("event serializes"));
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_events(path: &Path, graph: &TemporalGraph, provenance: &Provenance) -> Result<()> {
    write_atomic(path, format_events(graph, EventFormat::from_path(path), provenance).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("events.csv")
    }

    #[test]
    fn mixed_lines_accepted() {
        let text = "# comment\nsource,target,timestamp,action\n1,2,900,like\n{\"source\":2,\"target\":1,\"timestamp\":5,\"action\":\"share\"}\n";
        let f = parse_events(text, p()).unwrap();
        assert_eq!(f.events.len(), 2);
        assert_eq!(f.events[1], InteractionEvent::new(2, 1, 5, Action::Share));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let cases = [
            ("1,2,3,like\n1,2,x,like\n", 2),
            ("\n\n1,1,3,like\n", 3),
            ("1,2,3,poke\n", 1),
            ("1,2,-3,like\n", 1),
            ("1,2,3\n", 1),
            ("1,2,3,like\n{\"source\":1,\"target\":2}\n", 2),
            ("{\"source\":1,\"target\":2,\"timestamp\":0,\"action\":\"like\",\"extra\":1}\n", 1),
        ];
        for (text, line) in cases {
            match parse_events(text, p()) {
                Err(CliError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn node_ranges() {
        assert_eq!(format_ranges(&[0, 1, 2, 5, 7, 8]), "0-2,5,7-8");
        assert_eq!(parse_ranges("0-2,5,7-8").unwrap(), vec![0, 1, 2, 5, 7, 8]);
        assert_eq!(parse_ranges("3-1"), None);
    }

    #[test]
    fn isolated_nodes_survive() {
        let g = build_graph(vec![InteractionEvent::new(0, 1, 10, Action::Like)], Some(&[0, 1, 2, 3])).unwrap();
        let prov = Provenance::new("h");
        for format in [EventFormat::Csv, EventFormat::Jsonl] {
            let text = format_events(&g, format, &prov);
            let back = parse_events(&text, p()).unwrap();
            assert_eq!(back.provenance.as_ref(), Some(&prov));
            assert_eq!(back.into_graph().unwrap(), g);
        }
    }
}
