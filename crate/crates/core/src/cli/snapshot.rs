//! `SNAP1` field snapshots: a magic line, a one-line JSON header, then raw
//! little-endian f64 values in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &str = "SNAP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub field: String,
    pub time: f64,
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub dtype: String,
    pub layout: String,
}

impl SnapshotHeader {
    pub fn new(field: &str, time: f64, dims: &[usize], spacing: &[f64], origin: &[f64]) -> Self {
        Self {
            field: field.into(),
            time,
            dims: dims.to_vec(),
            spacing: spacing.to_vec(),
            origin: origin.to_vec(),
            dtype: "f64le".into(),
            layout: "row-major".into(),
        }
    }
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, data: &[f64]) -> Result<()> {
    let expected: usize = header.dims.iter().product();
    if data.len() != expected {
        return Err(Error::Internal(format!(
            "snapshot of {} values does not match dims {:?}",
            data.len(),
            header.dims
        )));
    }
    let mut out = Vec::with_capacity(64 + 8 * data.len());
    writeln!(out, "{MAGIC}")?;
    serde_json::to_writer(&mut out, header)?;
    out.push(b'\n');
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Parse(format!("{}: not a {MAGIC} file", path.display())));
    }
    line.clear();
    r.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    if header.dtype != "f64le" || header.layout != "row-major" {
        return Err(Error::Parse(format!(
            "unsupported snapshot encoding {}/{}",
            header.dtype, header.layout
        )));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let n: usize = header.dims.iter().product();
    if bytes.len() != 8 * n {
        return Err(Error::Parse(format!(
            "{}: expected {} bytes of data, found {}",
            path.display(),
            8 * n,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}

/// Writes a `t,value` CSV trace.
pub fn write_trace(path: &Path, trace: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("t,value\n");
    for (t, v) in trace {
        out.push_str(&format!("{t:.17e},{v:.17e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
