//! Grid dumps (JSON header line + little-endian f64 payload) and the
//! time-series CSV writer.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ChainError;
use crate::field::DistributionField;
use crate::grid::{AxisGrid, Grid};
use crate::index::KinematicIndexSet;

const DUMP_FORMAT: &str = "vlasov-chain-grid-dump";
const DUMP_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed dump header: {msg}", path.display())]
    Header { path: PathBuf, msg: String },
    #[error("{}: payload holds {found} bytes, header declares {expected}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpHeader {
    format: String,
    version: u32,
    index_set: KinematicIndexSet,
    axes: Vec<AxisGrid>,
    time: f64,
    payload_bytes: usize,
}

/// Serializes a field: one JSON header line, then the row-major values.
pub fn encode_grid_dump(f: &DistributionField) -> Vec<u8> {
    let header = DumpHeader {
        format: DUMP_FORMAT.into(),
        version: DUMP_VERSION,
        index_set: f.index_set(),
        axes: f.grid.axes().to_vec(),
        time: f.time,
        payload_bytes: 8 * f.values.len(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(8 * f.values.len());
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_grid_dump`]; `path` only labels errors.
pub fn decode_grid_dump(bytes: &[u8], path: &Path) -> Result<DistributionField, IoError> {
    let header_err = |msg: String| IoError::Header {
        path: path.to_path_buf(),
        msg,
    };
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| header_err("no header line".into()))?;
    let header: DumpHeader = serde_json::from_slice(&bytes[..nl]).map_err(|e| header_err(e.to_string()))?;
    if header.format != DUMP_FORMAT || header.version != DUMP_VERSION {
        return Err(header_err(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let grid = Grid::new(header.axes)?;
    if grid.index_set() != header.index_set {
        return Err(header_err(format!(
            "index set {} disagrees with axes {}",
            header.index_set,
            grid.index_set()
        )));
    }
    let payload = &bytes[nl + 1..];
    let expected = 8 * grid.len();
    if header.payload_bytes != expected || payload.len() != expected {
        return Err(IoError::SizeMismatch {
            path: path.to_path_buf(),
            expected: header.payload_bytes.max(expected),
            found: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(DistributionField::new(grid, values, header.time)?)
}

pub fn write_grid_dump(f: &DistributionField, path: &Path) -> Result<(), IoError> {
    fs::write(path, encode_grid_dump(f)).map_err(io_err(path))
}

pub fn read_grid_dump(path: &Path) -> Result<DistributionField, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_grid_dump(&bytes, path)
}

/// CSV with a fixed header; numbers use the shortest round-trip form.
#[derive(Debug)]
pub struct CsvWriter {
    path: PathBuf,
    file: fs::File,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self, IoError> {
        let mut file = fs::File::create(path).map_err(io_err(path))?;
        writeln!(file, "{}", header.join(",")).map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            columns: header.len(),
        })
    }

    /// Writes one row; `label`, when given, fills the first column.
    pub fn row(&mut self, label: Option<&str>, values: &[f64]) -> Result<(), IoError> {
        let mut line = String::new();
        let mut n = 0;
        if let Some(l) = label {
            line.push_str(l);
            n += 1;
        }
        for v in values {
            if n > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("string write");
            n += 1;
        }
        debug_assert_eq!(n, self.columns, "row width differs from header");
        writeln!(self.file, "{line}").map_err(io_err(&self.path))
    }
}
