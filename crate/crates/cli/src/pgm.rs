//! 8-bit binary PGM (P5) export of magnitude images.

use std::path::Path;

use ssisar_core::metrics::normalized_magnitude;
use ssisar_core::{ComplexTensor, Tensor};

use crate::error::CliError;

/// Grey levels of `|X| / max |X|`: linear by default, or in dB above
/// `db_floor` (negative) mapped onto `0..=255`.
pub fn grey_levels(x: &ComplexTensor<f64>, db_floor: Option<f64>) -> Vec<u8> {
    let mag = normalized_magnitude(x);
    mag.data()
        .iter()
        .map(|&v| {
            let t = match db_floor {
                None => v,
                Some(floor) => {
                    let db = if v > 0.0 { 20.0 * v.log10() } else { f64::NEG_INFINITY };
                    ((db - floor) / -floor).clamp(0.0, 1.0)
                }
            };
            (t * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect()
}

pub fn encode(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write(path: &Path, x: &ComplexTensor<f64>, db_floor: Option<f64>) -> Result<(), CliError> {
    if let Some(f) = db_floor {
        if !(f < 0.0 && f.is_finite()) {
            return Err(CliError::Validation(format!("--db-floor must be negative, got {f}")));
        }
    }
    let bytes = encode(x.rows(), x.cols(), &grey_levels(x, db_floor));
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Parses a P5 file with maxval 255 into grey levels scaled to `[0, 1]`.
pub fn decode(bytes: &[u8]) -> Result<Tensor<f64>, CliError> {
    let bad = |m: &str| CliError::Format(format!("PGM: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?.to_string());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected P5 with maxval 255"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimension"));
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
    if data.len() != rows * cols {
        return Err(bad("raster size mismatch"));
    }
    Tensor::new(vec![rows, cols], data.iter().map(|&b| b as f64 / 255.0).collect())
        .map_err(|e| bad(&e.to_string()))
}
