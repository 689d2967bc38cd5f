//! One record per line:
//!
//! ```text
//! {"name": str, "x": [[f64; 32]], "edges": [[int, int]], "n": int,
//!  "fs": [f64; 5], "fs_raw": {"macs", "batch", "t_conv", "t_dense", "t_relu"},
//!  "y": {"latency_ms", "memory_mb", "energy_j"}}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetRecord, TargetVector};
use crate::featurize::{GraphEncoding, StaticFeatures, FEATURE_WIDTH, STATIC_WIDTH};
use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    name: String,
    x: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    n: usize,
    fs: [f64; STATIC_WIDTH],
    fs_raw: StaticFeatures,
    y: TargetVector,
}

pub fn record_to_line(record: &DatasetRecord) -> String {
    let enc = &record.encoding;
    let line = RecordLine {
        name: record.model_name.clone(),
        x: (0..enc.num_nodes).map(|r| enc.features.row(r).to_vec()).collect(),
        edges: enc.edges.iter().map(|&(s, d)| [s, d]).collect(),
        n: enc.num_nodes,
        fs: record.fs.as_vector(),
        fs_raw: record.fs,
        y: record.target,
    };
    serde_json::to_string(&line).expect("record serializes")
}

/// Parses one line; `line_no` is 1-based and only used in errors.
pub fn parse_record_line(text: &str, line_no: usize) -> Result<DatasetRecord> {
    let bad = |reason: String| Error::MalformedRecord { line: line_no, reason };
    let line: RecordLine = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if line.x.len() != line.n {
        return Err(bad(format!("n = {} but x has {} rows", line.n, line.x.len())));
    }
    if let Some(row) = line.x.iter().find(|r| r.len() != FEATURE_WIDTH) {
        return Err(bad(format!("feature row of width {}", row.len())));
    }
    if line.fs != line.fs_raw.as_vector() {
        return Err(bad("fs does not match fs_raw".into()));
    }
    let features = Matrix::from_rows(&line.x).map_err(|e| bad(e.to_string()))?;
    let features = if line.n == 0 { Matrix::zeros(0, FEATURE_WIDTH) } else { features };
    let encoding =
        GraphEncoding { num_nodes: line.n, edges: line.edges.iter().map(|e| (e[0], e[1])).collect(), features };
    encoding.validate().map_err(|e| bad(e.to_string()))?;
    line.y.validate().map_err(|e| bad(e.to_string()))?;
    Ok(DatasetRecord { model_name: line.name, encoding, fs: line.fs_raw, target: line.y })
}

pub fn write_dataset(records: &[DatasetRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::IoFailure(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        out.write_all(record_to_line(r).as_bytes()).map_err(io)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads every non-blank line.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::IoFailure(format!("{}: {e}", path.display()));
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record_line(&line, i + 1)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_dataset, FamilyMix};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let records = synth_dataset(12, &FamilyMix::uniform(), 5).unwrap();
        write_dataset(&records, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), records);
    }

    #[test]
    fn empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_y_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let records = synth_dataset(3, &FamilyMix::uniform(), 5).unwrap();
        let mut text: Vec<String> = records.iter().map(record_to_line).collect();
        let mut v: serde_json::Value = serde_json::from_str(&text[1]).unwrap();
        v.as_object_mut().unwrap().remove("y");
        text[1] = v.to_string();
        std::fs::write(&path, text.join("\n")).unwrap();
        match read_dataset(&path) {
            Err(Error::MalformedRecord { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("y"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_failure() {
        assert!(matches!(read_dataset("/nonexistent/dir/x.jsonl"), Err(Error::IoFailure(_))));
    }

    #[test]
    fn inconsistent_n_rejected() {
        let records = synth_dataset(1, &FamilyMix::uniform(), 9).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&record_to_line(&records[0])).unwrap();
        v["n"] = serde_json::json!(999);
        assert!(matches!(parse_record_line(&v.to_string(), 4), Err(Error::MalformedRecord { line: 4, .. })));
    }
}
