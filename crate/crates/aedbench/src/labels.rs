//! Labels files: a header record with the label geometry, then one
//! `node,bin,rule_mask` line per positive cell. Nodes are written by their
//! original id.

use std::fmt::Write as _;
use std::path::Path;

use aedbench_core::graph::NodeId;
use aedbench_core::labeler::{LabelMatrix, RuleMask};

use crate::error::{CliError, Result};
use crate::output::{read_to_string, write_atomic, Provenance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelsHeader {
    pub z: usize,
    pub num_bins: usize,
    pub nodes: usize,
    /// Inclusive bounds of the labeled bins.
    pub defined: (usize, usize),
}

impl LabelsHeader {
    fn line(&self) -> String {
        format!(
            "#labels z={} num_bins={} nodes={} defined={}-{}",
            self.z, self.num_bins, self.nodes, self.defined.0, self.defined.1
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let mut header = LabelsHeader { z: 0, num_bins: 0, nodes: 0, defined: (0, 0) };
        let mut seen = 0u8;
        for field in line.strip_prefix("#labels ")?.split_whitespace() {
            let (key, value) = field.split_once('=')?;
            match key {
                "z" => header.z = value.parse().ok()?,
                "num_bins" => header.num_bins = value.parse().ok()?,
                "nodes" => header.nodes = value.parse().ok()?,
                "defined" => {
                    let (a, b) = value.split_once('-')?;
                    header.defined = (a.parse().ok()?, b.parse().ok()?);
                }
                _ => return None,
            }
            seen += 1;
        }
        (seen == 4).then_some(header)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelsFile {
    pub header: LabelsHeader,
    pub provenance: Option<Provenance>,
    pub positives: Vec<(NodeId, usize, RuleMask)>,
}

impl LabelsFile {
    pub fn from_matrix(labels: &LabelMatrix, node_ids: &[NodeId]) -> Self {
        let defined = labels.defined_range();
        LabelsFile {
            header: LabelsHeader {
                z: labels.z(),
                num_bins: labels.num_bins(),
                nodes: labels.node_count(),
                defined: (*defined.start(), *defined.end()),
            },
            provenance: None,
            positives: labels.positives().map(|(v, t, m)| (node_ids[v], t, m)).collect(),
        }
    }

    /// Rebuilds the matrix over `node_ids` (the instance's sorted node ids).
    pub fn to_matrix(&self, node_ids: &[NodeId], path: &Path) -> Result<LabelMatrix> {
        if node_ids.len() != self.header.nodes {
            return Err(CliError::parse(
                path,
                1,
                format!("header lists {} nodes, instance has {}", self.header.nodes, node_ids.len()),
            ));
        }
        let mut cells = Vec::with_capacity(self.positives.len());
        for &(id, t, mask) in &self.positives {
            let v = node_ids
                .binary_search(&id)
                .map_err(|_| CliError::parse(path, 1, format!("node {id} is not in the instance")))?;
            cells.push((v, t, mask));
        }
        Ok(LabelMatrix::from_positives(node_ids.len(), self.header.num_bins, self.header.z, cells)?)
    }

    pub fn format(&self, provenance: &Provenance) -> String {
        let mut out = provenance.comment();
        out.push('\n');
        out.push_str(&self.header.line());
        out.push('\n');
        out.push_str("node,bin,rule_mask\n");
        for (node, bin, mask) in &self.positives {
            let _ = writeln!(out, "{node},{bin},{}", mask.bits());
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut header = None;
        let mut provenance = None;
        let mut positives = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = raw.trim();
            if line.is_empty() || line == "node,bin,rule_mask" {
                continue;
            }
            if line.starts_with("#labels") {
                header = Some(LabelsHeader::parse(line).ok_or_else(|| CliError::parse(path, line_no, "malformed header"))?);
                continue;
            }
            if line.starts_with('#') {
                if let Some(p) = Provenance::parse_comment(line) {
                    provenance.get_or_insert(p);
                }
                continue;
            }
            let Some(h) = &header else {
                return Err(CliError::parse(path, line_no, "label before the header record"));
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [node, bin, mask] = fields[..] else {
                return Err(CliError::parse(path, line_no, format!("expected 3 fields, found {}", fields.len())));
            };
            let bad = |what: &str| CliError::parse(path, line_no, format!("invalid {what}"));
            let node: NodeId = node.parse().map_err(|_| bad("node"))?;
            let bin: usize = bin.parse().map_err(|_| bad("bin"))?;
            let mask = mask
                .parse::<u8>()
                .ok()
                .and_then(RuleMask::from_bits)
                .filter(|m| !m.is_empty())
                .ok_or_else(|| bad("rule mask"))?;
            if !(h.defined.0..=h.defined.1).contains(&bin) {
                return Err(CliError::parse(path, line_no, format!("bin {bin} outside the defined range")));
            }
            positives.push((node, bin, mask));
        }
        let header = header.ok_or_else(|| CliError::parse(path, 1, "missing #labels header"))?;
        Ok(LabelsFile { header, provenance, positives })
    }
}

pub fn write_labels(path: &Path, file: &LabelsFile, provenance: &Provenance) -> Result<()> {
    write_atomic(path, file.format(provenance).as_bytes())
}

pub fn read_labels(path: &Path) -> Result<LabelsFile> {
    LabelsFile::parse(&read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let ids = [10, 20, 30];
        let m = LabelMatrix::from_positives(
            3,
            12,
            1,
            [(0, 2, RuleMask::DEGREE_SPIKE), (2, 5, RuleMask::from_bits(6).unwrap())],
        )
        .unwrap();
        let file = LabelsFile::from_matrix(&m, &ids);
        assert_eq!(file.header.defined, (2, 9));
        let prov = Provenance::new("x");
        let text = file.format(&prov);
        assert!(text.contains("#labels z=1 num_bins=12 nodes=3 defined=2-9\n"));
        assert!(text.contains("\n30,5,6\n"));
        let back = LabelsFile::parse(&text, Path::new("l")).unwrap();
        assert_eq!(back.provenance, Some(prov));
        assert_eq!(back.to_matrix(&ids, Path::new("l")).unwrap(), m);
    }

    #[test]
    fn rejects_bad_records() {
        let head = "#labels z=1 num_bins=12 nodes=3 defined=2-9\n";
        for (body, line) in [("1,1,1\n", 2), ("1,3,0\n", 2), ("1,3,9\n", 2), ("x,3,1\n", 2)] {
            let err = LabelsFile::parse(&format!("{head}{body}"), Path::new("l")).unwrap_err();
            assert!(matches!(err, CliError::Parse { line: l, .. } if l == line), "{body}: {err}");
        }
        assert!(LabelsFile::parse("1,3,1\n", Path::new("l")).is_err());
    }
}
