//! Feature matrix files.
//!
//! Three encodings are supported:
//!
//! * `binary`: the 8-byte magic `PANEVAL1`, then `count` and `dim` as
//!   little-endian `u32`, then `count * dim` little-endian `f64` values in
//!   row-major order. Nothing may follow the payload.
//! * `json`: `{"count": N, "dim": D, "data": [[...], ...]}`.
//! * `csv`: one row per line, comma separated, no header.
//!
//! Writes go to a temporary file in the destination directory and are renamed
//! into place.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fid::FeatureMatrix;
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 8] = b"PANEVAL1";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    #[default]
    Binary,
    Json,
    Csv,
}

impl fmt::Display for FeatureFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureFormat::Binary => "binary",
            FeatureFormat::Json => "json",
            FeatureFormat::Csv => "csv",
        })
    }
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(FeatureFormat::Binary),
            "json" => Ok(FeatureFormat::Json),
            "csv" => Ok(FeatureFormat::Csv),
            other => Err(Error::invalid(format!("unknown feature format '{other}'"))),
        }
    }
}

/// Header of a binary feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub count: u32,
    pub dim: u32,
}

impl FeatureFileHeader {
    pub fn payload_len(&self) -> usize {
        self.count as usize * self.dim as usize * 8
    }
}

#[derive(Serialize, Deserialize)]
struct JsonFeatures {
    count: usize,
    dim: usize,
    data: Vec<Vec<f64>>,
}

fn format_err(path: &Path, position: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_owned(),
        position: position.into(),
        message: message.into(),
    }
}

pub fn read_features(path: &Path, format: FeatureFormat) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        FeatureFormat::Binary => decode_binary(path, &bytes),
        FeatureFormat::Json => decode_json(path, &bytes),
        FeatureFormat::Csv => decode_csv(path, &bytes),
    }
}

pub fn write_features(features: &FeatureMatrix, path: &Path, format: FeatureFormat) -> Result<()> {
    let bytes = match format {
        FeatureFormat::Binary => encode_binary(features)?,
        FeatureFormat::Json => encode_json(features),
        FeatureFormat::Csv => encode_csv(features),
    };
    write_atomic(path, &bytes)
}

/// Writes `bytes` to `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn encode_binary(features: &FeatureMatrix) -> Result<Vec<u8>> {
    let too_big = |what: &str, n: usize| Error::invalid(format!("{what} {n} does not fit in u32"));
    let count = u32::try_from(features.count()).map_err(|_| too_big("count", features.count()))?;
    let dim = u32::try_from(features.dim()).map_err(|_| too_big("dim", features.dim()))?;
    let values = features.matrix().as_slice();
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_header(path: &Path, bytes: &[u8]) -> Result<FeatureFileHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            path,
            format!("byte {}", bytes.len()),
            format!("file ends inside the {HEADER_LEN}-byte header"),
        ));
    }
    if &bytes[..8] != MAGIC {
        return Err(format_err(path, "byte 0", "magic is not PANEVAL1"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let header = FeatureFileHeader {
        count: word(8),
        dim: word(12),
    };
    if header.count == 0 {
        return Err(format_err(path, "byte 8", "count must be >= 1"));
    }
    if header.dim == 0 {
        return Err(format_err(path, "byte 12", "dim must be >= 1"));
    }
    Ok(header)
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix> {
    let header = decode_header(path, bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.payload_len();
    if payload.len() != expected {
        let at = HEADER_LEN + payload.len().min(expected);
        let what = if payload.len() < expected {
            "truncated payload"
        } else {
            "trailing bytes after payload"
        };
        return Err(format_err(
            path,
            format!("byte {at}"),
            format!(
                "{what}: header declares {}x{} ({expected} bytes), found {} bytes",
                header.count,
                header.dim,
                payload.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(expected / 8);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(
                path,
                format!("byte {}", HEADER_LEN + i * 8),
                format!("non-finite value {v}"),
            ));
        }
        data.push(v);
    }
    Matrix::new(header.count as usize, header.dim as usize, data).map(FeatureMatrix::new)
}

fn encode_json(features: &FeatureMatrix) -> Vec<u8> {
    let doc = JsonFeatures {
        count: features.count(),
        dim: features.dim(),
        data: features.matrix().to_rows(),
    };
    serde_json::to_vec(&doc).expect("feature matrix serializes")
}

fn decode_json(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix> {
    let doc: JsonFeatures = serde_json::from_slice(bytes).map_err(|e| {
        format_err(
            path,
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if doc.count == 0 || doc.dim == 0 {
        return Err(format_err(path, "header", "count and dim must be >= 1"));
    }
    if doc.data.len() != doc.count {
        return Err(format_err(
            path,
            format!("row {}", doc.data.len().min(doc.count)),
            format!("count is {} but data has {} rows", doc.count, doc.data.len()),
        ));
    }
    if let Some(i) = doc.data.iter().position(|r| r.len() != doc.dim) {
        return Err(format_err(
            path,
            format!("row {i}"),
            format!("row has {} values, dim is {}", doc.data[i].len(), doc.dim),
        ));
    }
    Matrix::from_rows(&doc.data).map(FeatureMatrix::new)
}

fn encode_csv(features: &FeatureMatrix) -> Vec<u8> {
    let mut out = String::new();
    for row in features.matrix().row_iter() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn decode_csv(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            format_err(path, format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(rows.len() as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        format_err(
                            path,
                            format!("line {line}, column {}", col + 1),
                            format!("'{cell}' is not a finite number"),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format_err(
                    path,
                    format!("line {line}"),
                    format!("row has {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, "line 1", "no rows"));
    }
    Matrix::from_rows(&rows).map(FeatureMatrix::new)
}
