use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DataError, Dataset};

pub const DATASET_MAGIC: &[u8; 6] = b"ANIDS1";

/// CSV with header `x0,x1,...` and one row per observation.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<(), DataError> {
    let mut out = String::with_capacity(ds.rows().len() * 24);
    let header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in ds.iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text)
}

pub(crate) fn parse_csv(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or(DataError::Parse {
        offset: 0,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    for (j, c) in cols.iter().enumerate() {
        if c.trim() != format!("x{j}") {
            return Err(DataError::Parse {
                offset: 0,
                msg: format!("bad header column {c:?}, expected x{j}"),
            });
        }
    }
    let dim = cols.len();
    let mut rows = Vec::new();
    let mut offset = header.len();
    let mut row = 0;
    for line in lines {
        let body = line.trim_end();
        if body.is_empty() {
            offset += line.len();
            continue;
        }
        let mut field_offset = offset;
        let fields: Vec<&str> = body.split(',').collect();
        if fields.len() != dim {
            return Err(DataError::Parse {
                offset,
                msg: format!("row {row} has {} fields, expected {dim}", fields.len()),
            });
        }
        for (column, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| DataError::Parse {
                offset: field_offset,
                msg: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column,
                    offset: field_offset,
                });
            }
            rows.push(v);
            field_offset += field.len() + 1;
        }
        offset += line.len();
        row += 1;
    }
    Dataset::new(dim, rows)
}

/// `ANIDS1`, `u32` row count, `u32` dimension, then `f64` values, all little-endian.
pub fn encode_binary(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 8 * ds.rows().len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    for v in ds.rows() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Dataset, DataError> {
    if bytes.len() < 14 {
        return Err(DataError::Truncated {
            offset: bytes.len(),
            expected: 14,
        });
    }
    if &bytes[..6] != DATASET_MAGIC {
        return Err(DataError::Parse {
            offset: 0,
            msg: "bad magic".into(),
        });
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let need = n.checked_mul(dim).and_then(|c| c.checked_mul(8)).ok_or(DataError::Parse {
        offset: 6,
        msg: "size overflow".into(),
    })?;
    if bytes.len() - 14 < need {
        return Err(DataError::Truncated {
            offset: bytes.len(),
            expected: 14 + need,
        });
    }
    if bytes.len() - 14 > need {
        return Err(DataError::Parse {
            offset: 14 + need,
            msg: "trailing bytes".into(),
        });
    }
    let mut rows = Vec::with_capacity(n * dim);
    for (i, chunk) in bytes[14..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(DataError::NonFinite {
                row: i / dim,
                column: i % dim,
                offset: 14 + 8 * i,
            });
        }
        rows.push(v);
    }
    Dataset::new(dim.max(1), rows)
}

/// Binary for `.bin`, CSV otherwise.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), DataError> {
    if is_binary(path) {
        atomic_write(path, &encode_binary(ds))
    } else {
        write_dataset_csv(path, ds)
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    if is_binary(path) {
        decode_binary(&fs::read(path)?)
    } else {
        read_dataset_csv(path)
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Writes to `<path>.tmp`, syncs, then renames over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
