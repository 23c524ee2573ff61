//! Single-channel Portable Float Map ("Pf"), little-endian, rows stored
//! bottom-to-top.

use std::path::Path;

use super::{ProbMap, PROB_SLACK};
use crate::{Error, Result};

pub fn encode_pfm(map: &ProbMap) -> Result<Vec<u8>> {
    let (w, h) = map.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in map.values().chunks_exact(w).rev() {
        for &v in row {
            if !v.is_finite() {
                return Err(Error::Pfm(format!(
                    "refusing to write non-finite value {v}"
                )));
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_pfm(map: &ProbMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pfm(map)?).map_err(|e| Error::io(path, e))
}

/// Splits off the next whitespace-delimited header token.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Pfm("truncated header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Pfm("non-ASCII header".into()))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<ProbMap> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != "Pf" {
        return Err(Error::Pfm(format!(
            "expected magic \"Pf\", found {magic:?}"
        )));
    }
    let parse_dim = |tok: &str| -> Result<usize> {
        tok.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Pfm(format!("bad dimension {tok:?}")))
    };
    let width = parse_dim(next_token(bytes, &mut pos)?)?;
    let height = parse_dim(next_token(bytes, &mut pos)?)?;
    let scale_tok = next_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::Pfm(format!("bad scale {scale_tok:?}")))?;
    if scale.is_nan() || scale >= 0.0 {
        return Err(Error::Pfm(format!(
            "scale {scale_tok} is not negative; only little-endian maps are supported"
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Pfm("missing header terminator".into()));
    }
    pos += 1;

    let payload = &bytes[pos..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Pfm("dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Pfm(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }

    let mut data = vec![0f32; width * height];
    for (file_row, chunk) in payload.chunks_exact(width * 4).enumerate() {
        let y = height - 1 - file_row;
        for (x, b) in chunk.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if !v.is_finite() {
                return Err(Error::Pfm(format!("non-finite value at ({x},{y})")));
            }
            if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&v) {
                return Err(Error::Pfm(format!("value {v} at ({x},{y}) outside [0,1]")));
            }
            data[y * width + x] = v.clamp(0.0, 1.0);
        }
    }
    ProbMap::new(width, height, data)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ProbMap> {
    let path = path.as_ref();
    decode_pfm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
