//! File formats: data vectors (CSV or IDX), relevance maps, PGM heatmaps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adf::{AdfMode, DistortionReport};
use crate::error::{Error, Result};
use crate::rde::Termination;

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads data vectors from a CSV or IDX file, detected by content.
pub fn read_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    let name = path.display().to_string();
    if is_idx(&bytes) {
        parse_idx(&bytes, &name)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| parse_error(&name, 1, "neither IDX nor UTF-8 text"))?;
        parse_csv_vectors(text, &name)
    }
}

/// One vector per non-empty line, comma or whitespace separated. A
/// non-numeric first line is taken as a header.
pub fn parse_csv_vectors(text: &str, name: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let row = match fields {
            Ok(r) => r,
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(None);
                continue;
            }
            Err(e) => return Err(parse_error(name, n + 1, format!("bad number: {e}"))),
        };
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(parse_error(name, n + 1, format!("field {i} is not finite")));
        }
        match width {
            Some(Some(w)) if w != row.len() => {
                return Err(parse_error(
                    name,
                    n + 1,
                    format!("{} fields, expected {w}", row.len()),
                ))
            }
            _ => width = Some(Some(row.len())),
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(name, 1, "no data rows"));
    }
    Ok(rows)
}

fn is_idx(bytes: &[u8]) -> bool {
    bytes.len() >= 4
        && bytes[0] == 0
        && bytes[1] == 0
        && matches!(bytes[2], 0x08 | 0x09 | 0x0B | 0x0C | 0x0D | 0x0E)
        && bytes[3] >= 1
}

/// IDX layout: two zero bytes, element type, number of dimensions, then the
/// dimensions and the data, all big-endian. The first dimension indexes
/// items; the rest are flattened row-major. Unsigned bytes are scaled by
/// 1/255, other types are taken as-is.
pub fn parse_idx(bytes: &[u8], name: &str) -> Result<Vec<Vec<f64>>> {
    if !is_idx(bytes) {
        return Err(parse_error(name, 0, "bad IDX magic"));
    }
    let kind = bytes[2];
    let ndims = bytes[3] as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(parse_error(name, 0, "truncated IDX header"));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let items = dims[0];
    let width: usize = dims[1..].iter().product();
    let size = match kind {
        0x08 | 0x09 => 1,
        0x0B => 2,
        0x0C | 0x0D => 4,
        _ => 8,
    };
    let data = &bytes[header..];
    if data.len() != items * width * size {
        return Err(parse_error(
            name,
            0,
            format!(
                "IDX payload has {} bytes, expected {}",
                data.len(),
                items * width * size
            ),
        ));
    }
    let value = |c: &[u8]| -> f64 {
        match kind {
            0x08 => f64::from(c[0]) / 255.0,
            0x09 => f64::from(c[0] as i8),
            0x0B => f64::from(i16::from_be_bytes([c[0], c[1]])),
            0x0C => f64::from(i32::from_be_bytes(c.try_into().unwrap())),
            0x0D => f64::from(f32::from_be_bytes(c.try_into().unwrap())),
            _ => f64::from_be_bytes(c.try_into().unwrap()),
        }
    };
    let values: Vec<f64> = data.chunks_exact(size).map(value).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(parse_error(
            name,
            0,
            format!("non-finite value at element {i}"),
        ));
    }
    Ok(values
        .chunks(width.max(1))
        .map(<[f64]>::to_vec)
        .take(items)
        .collect())
}

/// Encodes vectors as IDX with 64-bit float elements.
pub fn write_idx_f64(rows: &[Vec<f64>]) -> Vec<u8> {
    let width = rows.first().map_or(0, Vec::len);
    let mut out = vec![0, 0, 0x0E, 2];
    out.extend_from_slice(&(rows.len() as u32).to_be_bytes());
    out.extend_from_slice(&(width as u32).to_be_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Relevance map of one input row, as written by `explain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedInput {
    pub row: usize,
    pub s: Vec<f64>,
    pub objective: f64,
    pub distortion: DistortionReport,
    pub iterations: usize,
    pub termination: Termination,
}

/// Output file of `explain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainOutput {
    pub lambda: f64,
    pub mode: AdfMode,
    pub results: Vec<ExplainedInput>,
}

/// CSV with header `index,value`, 0-based indices.
pub fn relevance_csv(s: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in s.iter().enumerate() {
        out.push_str(&format!("{i},{v:?}\n"));
    }
    out
}

/// Reads relevance maps from the JSON written by `explain` (one map per
/// result) or from a single `index,value` CSV. In the CSV every index in
/// `0..d` must appear exactly once.
pub fn read_relevance_maps(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    if text.trim_start().starts_with('{') {
        let file: ExplainOutput =
            serde_json::from_str(&text).map_err(|e| parse_error(&name, e.line(), e.to_string()))?;
        return Ok(file.results.into_iter().map(|r| r.s).collect());
    }
    Ok(vec![parse_relevance_csv(&text, &name)?])
}

pub fn parse_relevance_csv(text: &str, name: &str) -> Result<Vec<f64>> {
    let mut entries: Vec<(usize, f64, usize)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((a, b)) = line.split_once(',') else {
            return Err(parse_error(name, n + 1, "expected index,value"));
        };
        let index = match a.trim().parse::<usize>() {
            Ok(i) => i,
            Err(_) if entries.is_empty() && n == 0 => continue,
            Err(e) => return Err(parse_error(name, n + 1, format!("bad index: {e}"))),
        };
        let value: f64 = b
            .trim()
            .parse()
            .map_err(|e| parse_error(name, n + 1, format!("bad value: {e}")))?;
        entries.push((index, value, n + 1));
    }
    let d = entries.len();
    let mut out = vec![f64::NAN; d];
    let mut seen = vec![false; d];
    for (index, value, line) in entries {
        if index >= d || std::mem::replace(&mut seen[index], true) {
            return Err(parse_error(
                name,
                line,
                format!("index {index} duplicated or outside 0..{d}"),
            ));
        }
        out[index] = value;
    }
    Ok(out)
}

/// Binary 8-bit PGM of a `width × height` map (row-major), scaling
/// `[min, max]` linearly to `[0, 255]`. A constant map renders mid-gray.
pub fn render_pgm(values: &[f64], width: usize, height: usize) -> Result<Vec<u8>> {
    crate::error::check_dim("heatmap pixels", width * height, values.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("heatmap values must be finite".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if max > min {
            (255.0 * (v - min) / (max - min)).round() as u8
        } else {
            128
        }
    }));
    Ok(out)
}
