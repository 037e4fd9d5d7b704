//! Text file formats.
//!
//! Every numeric file starts with a single comment line `# {json header}`
//! carrying at least `format_version` and `kind`, followed by the values as
//! decimal text with 17 significant digits, so a write/read round trip is
//! exact. Vectors hold one value per line; matrices hold one comma-separated
//! row per line. Probe files list all samples of source 1, then source 2,
//! and so on.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sparsep_core::{ProbeSet, ProblemDims, Variant};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1.0";

/// Accepts any `1.x` version string.
pub fn check_version(version: &str) -> Result<()> {
    match version.split('.').next() {
        Some("1") => Ok(()),
        _ => Err(Error::Version(version.to_string())),
    }
}

fn current_version() -> String {
    FORMAT_VERSION.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHeader {
    pub format_version: String,
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    Measurements,
    Channels,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorHeader {
    pub format_version: String,
    pub kind: VectorKind,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl VectorHeader {
    pub fn new(kind: VectorKind, dims: &ProblemDims) -> Self {
        Self {
            format_version: current_version(),
            kind,
            n: dims.n,
            m: dims.m,
            p: dims.p,
            variant: None,
            epsilon: None,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = Some(variant);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn dims(&self) -> std::result::Result<ProblemDims, sparsep_core::Error> {
        ProblemDims::new(self.n, self.m, self.p)
    }

    /// Number of values the body must hold.
    pub fn expected_len(&self) -> usize {
        match (self.kind, self.variant) {
            (VectorKind::Measurements, Some(Variant::Folded)) => self.m,
            (VectorKind::Measurements, _) => self.m + self.n - 1,
            _ => self.n * self.p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixHeader {
    format_version: String,
    kind: String,
    rows: usize,
    cols: usize,
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_line<T: Serialize>(header: &T) -> String {
    let json = serde_json::to_string(header).expect("header serialization cannot fail");
    format!("# {json}\n")
}

/// Splits a document into its parsed header and the remaining body lines
/// (with 1-based line numbers).
fn split_header<'a, T: DeserializeOwned>(path: &Path, text: &'a str) -> Result<(T, Vec<(usize, &'a str)>)> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| Error::format(path, 1, "missing '# {json}' header line"))?
        .trim();
    let raw: serde_json::Value =
        serde_json::from_str(json).map_err(|e| Error::format(path, 1, format!("bad header: {e}")))?;
    let version = raw
        .get("format_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::format(path, 1, "header lacks format_version"))?;
    check_version(version)?;
    let header = serde_json::from_value(raw).map_err(|e| Error::format(path, 1, format!("bad header: {e}")))?;
    let body = lines
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    Ok((header, body))
}

fn parse_value(path: &Path, line: usize, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(path, line, format!("not a number: {text:?}")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn probes_to_string(probes: &ProbeSet) -> String {
    let d = probes.dims();
    let header = ProbeHeader {
        format_version: current_version(),
        kind: "probes".into(),
        n: d.n,
        m: d.m,
        p: d.p,
        seed: probes.seed(),
    };
    let mut out = header_line(&header);
    for &v in probes.samples() {
        out.push_str(&format_f64(v));
        out.push('\n');
    }
    out
}

pub fn probes_from_str(path: &Path, text: &str) -> Result<ProbeSet> {
    let (header, body): (ProbeHeader, _) = split_header(path, text)?;
    if header.kind != "probes" {
        return Err(Error::format(path, 1, format!("expected kind \"probes\", found {:?}", header.kind)));
    }
    let dims = ProblemDims::new(header.n, header.m, header.p)?;
    let values = body
        .iter()
        .map(|&(i, l)| parse_value(path, i, l))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != dims.m * dims.p {
        return Err(Error::format(
            path,
            1,
            format!("expected {} samples, found {}", dims.m * dims.p, values.len()),
        ));
    }
    Ok(ProbeSet::from_samples(dims, header.seed, values)?)
}

pub fn write_probes(path: &Path, probes: &ProbeSet) -> Result<()> {
    write_text(path, &probes_to_string(probes))
}

pub fn read_probes(path: &Path) -> Result<ProbeSet> {
    probes_from_str(path, &read_text(path)?)
}

pub fn vector_to_string(header: &VectorHeader, values: &[f64]) -> String {
    let mut out = header_line(header);
    for &v in values {
        out.push_str(&format_f64(v));
        out.push('\n');
    }
    out
}

pub fn vector_from_str(path: &Path, text: &str) -> Result<(VectorHeader, Vec<f64>)> {
    let (header, body): (VectorHeader, _) = split_header(path, text)?;
    header.dims()?;
    let values = body
        .iter()
        .map(|&(i, l)| parse_value(path, i, l))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != header.expected_len() {
        return Err(Error::format(
            path,
            1,
            format!("expected {} values, found {}", header.expected_len(), values.len()),
        ));
    }
    Ok((header, values))
}

pub fn write_vector(path: &Path, header: &VectorHeader, values: &[f64]) -> Result<()> {
    write_text(path, &vector_to_string(header, values))
}

pub fn read_vector(path: &Path) -> Result<(VectorHeader, Vec<f64>)> {
    vector_from_str(path, &read_text(path)?)
}

pub fn matrix_to_string(a: &DMatrix<f64>) -> String {
    let header = MatrixHeader {
        format_version: current_version(),
        kind: "matrix".into(),
        rows: a.nrows(),
        cols: a.ncols(),
    };
    let mut out = header_line(&header);
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_f64(a[(r, c)]));
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_str(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let (header, body): (MatrixHeader, _) = split_header(path, text)?;
    if body.len() != header.rows {
        return Err(Error::format(
            path,
            1,
            format!("expected {} rows, found {}", header.rows, body.len()),
        ));
    }
    let mut a = DMatrix::zeros(header.rows, header.cols);
    for (r, &(line, text)) in body.iter().enumerate() {
        let cells: Vec<&str> = text.split(',').collect();
        if cells.len() != header.cols {
            return Err(Error::format(
                path,
                line,
                format!("expected {} columns, found {}", header.cols, cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            a[(r, c)] = parse_value(path, line, cell)?;
        }
    }
    Ok(a)
}

pub fn write_matrix(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_string(a))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    matrix_from_str(path, &read_text(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_text(path, &text)
}

/// Reads JSON, reporting syntax and schema errors with line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?)
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            let back: f64 = format_f64(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn version_gate() {
        assert!(check_version("1.0").is_ok());
        assert!(check_version("1.7").is_ok());
        assert!(check_version("2.0").is_err());
        assert!(check_version("").is_err());
    }

    #[test]
    fn expected_lengths() {
        let d = ProblemDims::new(3, 5, 2).unwrap();
        let h = VectorHeader::new(VectorKind::Measurements, &d);
        assert_eq!(h.expected_len(), 7);
        assert_eq!(h.clone().with_variant(Variant::Folded).expected_len(), 5);
        assert_eq!(VectorHeader::new(VectorKind::Channels, &d).expected_len(), 6);
    }
}
