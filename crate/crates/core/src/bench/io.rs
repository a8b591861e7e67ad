//! Matrix and trace file formats.
//!
//! * Matrix CSV: one channel per line, comma-separated numbers.
//! * `PICO` binary: magic `b"PICO"`, `u32` version (1), `u64` channel count,
//!   `u64` sample count, then the samples as `f64`, channel by channel. All
//!   integers and floats little-endian.
//! * Trace CSV: header `algorithm,seed,iter,grad_norm,loss,elapsed_s,ls_count,sign_flips`,
//!   floats written with 17 significant digits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::bench::runner::RunRecord;
use crate::error::{IcaError, Result};
use crate::linalg::{Mat, SignalMatrix};

pub const BIN_MAGIC: &[u8; 4] = b"PICO";
pub const BIN_VERSION: u32 = 1;
const BIN_HEADER_LEN: usize = 4 + 4 + 8 + 8;

pub const TRACE_HEADER: &str = "algorithm,seed,iter,grad_norm,loss,elapsed_s,ls_count,sign_flips";

fn parse_rows(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let parse_err = |line: usize, msg: String| IcaError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let row = raw
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                field.trim().parse::<f64>().map_err(|e| {
                    parse_err(line, format!("field {} ({:?}): {e}", col + 1, field.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data".into()));
    }
    Ok(rows)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IcaError::io(path, e))?;
    let rows = parse_rows(&text, path)?;
    SignalMatrix::from_rows(&rows)
}

/// Like [`read_matrix_csv`] but without the signal-shape checks, for small
/// square matrices such as a mixing matrix.
pub fn read_dense_csv(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IcaError::io(path, e))?;
    let rows = parse_rows(&text, path)?;
    Ok(Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

/// Writes one row per line using the shortest representation that parses
/// back to the same `f64`.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| IcaError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for row in m.row_iter() {
            let mut first = true;
            for v in row.iter() {
                if !first {
                    out.write_all(b",")?;
                }
                write!(out, "{v}")?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| IcaError::io(path, e))
}

pub fn encode_matrix_bin(m: &SignalMatrix) -> Vec<u8> {
    let (n, t) = (m.n_channels(), m.n_samples());
    let mut buf = Vec::with_capacity(BIN_HEADER_LEN + 8 * n * t);
    buf.extend_from_slice(BIN_MAGIC);
    buf.extend_from_slice(&BIN_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(t as u64).to_le_bytes());
    let data = m.as_matrix();
    for i in 0..n {
        for j in 0..t {
            buf.extend_from_slice(&data[(i, j)].to_le_bytes());
        }
    }
    buf
}

pub fn decode_matrix_bin(bytes: &[u8], path: &Path) -> Result<SignalMatrix> {
    let fail = |offset: usize, msg: String| IcaError::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };
    if bytes.len() < BIN_HEADER_LEN {
        return Err(fail(
            bytes.len(),
            format!("header needs {BIN_HEADER_LEN} bytes"),
        ));
    }
    if &bytes[0..4] != BIN_MAGIC {
        return Err(fail(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BIN_VERSION {
        return Err(fail(4, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let t = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n
        .checked_mul(t)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(BIN_HEADER_LEN as u64))
        .ok_or_else(|| fail(8, format!("dimensions {n}x{t} overflow")))?;
    if (bytes.len() as u64) < expected {
        return Err(fail(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes for {n}x{t}"),
        ));
    }
    if (bytes.len() as u64) > expected {
        return Err(fail(
            expected as usize,
            "trailing bytes after payload".into(),
        ));
    }
    let (n, t) = (n as usize, t as usize);
    let payload = &bytes[BIN_HEADER_LEN..];
    let m = Mat::from_fn(n, t, |i, j| {
        let at = 8 * (i * t + j);
        f64::from_le_bytes(payload[at..at + 8].try_into().unwrap())
    });
    SignalMatrix::new(m)
}

pub fn write_matrix_bin(path: impl AsRef<Path>, m: &SignalMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix_bin(m)).map_err(|e| IcaError::io(path, e))
}

pub fn read_matrix_bin(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IcaError::io(path, e))?;
    decode_matrix_bin(&bytes, path)
}

/// Dispatches on the extension: `.bin` is the binary format, anything else CSV.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_matrix_bin(path),
        _ => read_matrix_csv(path),
    }
}

pub fn write_trace_csv(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| IcaError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for rec in records {
            for r in rec.trace.records() {
                writeln!(
                    out,
                    "{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
                    rec.algorithm.name(),
                    rec.seed,
                    r.iter,
                    r.grad_norm,
                    r.loss,
                    r.elapsed_s,
                    r.ls_count,
                    r.sign_flips
                )?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| IcaError::io(path, e))
}

/// One parsed trace CSV line.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub algorithm: String,
    pub seed: u64,
    pub iter: usize,
    pub grad_norm: f64,
    pub loss: f64,
    pub elapsed_s: f64,
    pub ls_count: usize,
    pub sign_flips: usize,
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IcaError::io(path, e))?;
    let err = |line: usize, msg: String| IcaError::Parse {
        path: PathBuf::from(path),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(err(1, "missing trace header".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err(
                line_no,
                format!("expected 8 fields, found {}", f.len()),
            ));
        }
        let num = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|e| err(line_no, format!("{}: {e}", f[i])))
        };
        let int = |i: usize| {
            f[i].parse::<u64>()
                .map_err(|e| err(line_no, format!("{}: {e}", f[i])))
        };
        rows.push(TraceRow {
            algorithm: f[0].to_string(),
            seed: int(1)?,
            iter: int(2)? as usize,
            grad_norm: num(3)?,
            loss: num(4)?,
            elapsed_s: num(5)?,
            ls_count: int(6)? as usize,
            sign_flips: int(7)? as usize,
        });
    }
    Ok(rows)
}
