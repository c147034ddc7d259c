//! Dataset ingestion: CSV with a `label,f1,...,fm` header and IDX image/label pairs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dataset, SyntheticSpec};
use crate::numeric::Matrix;

const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Idx,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "idx" => Ok(DataFormat::Idx),
            _ => Err(Error::invalid(format!("unknown data format {s:?}; expected csv or idx"))),
        }
    }
}

/// Where a run's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Csv {
        path: PathBuf,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => spec.generate(),
            DatasetSource::Csv { path } => load_csv(path),
            DatasetSource::Idx { images, labels, limit } => load_idx(images, labels, *limit),
        }
    }
}

/// Loads `path` as CSV, or as an IDX image file whose label file follows the
/// usual `*-images-idx3-ubyte` / `*-labels-idx1-ubyte` naming.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    match format {
        DataFormat::Csv => load_csv(path),
        DataFormat::Idx => {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if !name.contains("images-idx3") {
                return Err(Error::Parse {
                    path: path.into(),
                    message: "cannot locate the label file: expected a name containing 'images-idx3'".into(),
                });
            }
            let labels = path.with_file_name(name.replace("images-idx3", "labels-idx1"));
            load_idx(path, &labels, None)
        }
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), message: message.into() }
}

/// CSV with header `label,f1,...,fm`.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(file);
    let header = reader.headers().map_err(|e| parse_err(path, format!("bad header: {e}")))?.clone();
    if header.get(0).map(str::trim) != Some("label") {
        return Err(parse_err(path, "line 1: header must start with 'label'"));
    }
    let m = header.len() - 1;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = record.iter().map(|v| v.trim().parse::<f64>());
        let label = values
            .next()
            .and_then(|v| v.ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(path, format!("line {line}: label is not a finite number")))?;
        labels.push(label);
        for (j, v) in values.enumerate() {
            match v {
                Ok(x) if x.is_finite() => data.push(x),
                _ => return Err(parse_err(path, format!("line {line}: field {} is not a finite number", j + 2))),
            }
        }
    }
    if labels.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(Matrix::from_vec(labels.len(), m, data)?, labels, name)
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]])
}

/// Header dimensions and payload offset of an IDX file with the given magic.
fn idx_header(path: &Path, bytes: &[u8], magic: u32) -> Result<(Vec<usize>, usize)> {
    if bytes.len() < 4 {
        return Err(parse_err(path, format!("byte 0: expected at least 4 header bytes, found {}", bytes.len())));
    }
    let found = read_u32(bytes, 0);
    if found != magic {
        return Err(parse_err(path, format!("byte 0: magic {found:#010x}, expected {magic:#010x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(parse_err(path, format!("byte {}: expected {header_len} header bytes, found {}", bytes.len(), bytes.len())));
    }
    let dims: Vec<usize> = (0..ndims).map(|k| read_u32(bytes, 4 + 4 * k) as usize).collect();
    let expected = header_len + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(parse_err(
            path,
            format!("byte {}: expected {expected} bytes in total, found {}", bytes.len().min(expected), bytes.len()),
        ));
    }
    Ok((dims, header_len))
}

/// IDX images (pixels scaled to [0, 1]) with their labels.
pub fn load_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset> {
    let ib = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lb = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    let (idims, ioff) = idx_header(images, &ib, IDX_IMAGES_MAGIC)?;
    let (ldims, loff) = idx_header(labels, &lb, IDX_LABELS_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(parse_err(labels, format!("{} labels for {} images", ldims[0], idims[0])));
    }
    let n = limit.map_or(idims[0], |l| l.min(idims[0]));
    let m = idims[1] * idims[2];
    let features: Vec<f64> = ib[ioff..ioff + n * m].iter().map(|&b| f64::from(b) / 255.0).collect();
    let ys: Vec<f64> = lb[loff..loff + n].iter().map(|&b| f64::from(b)).collect();
    let name = images.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(Matrix::from_vec(n, m, features)?, ys, name)
}

/// Encodes images and labels in IDX format (inverse of [`load_idx`] up to pixel scaling).
pub fn encode_idx(pixels: &[u8], n: usize, rows: usize, cols: usize, labels: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    if pixels.len() != n * rows * cols || labels.len() != n {
        return Err(Error::invalid("pixel or label count does not match the shape"));
    }
    let mut images = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + n);
    for v in [IDX_LABELS_MAGIC, n as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    Ok((images, lab))
}
