//! PFM grayscale ("Pf") float maps, used for depth and disparity.
//!
//! PFM stores rows bottom-to-top; the scale line's sign encodes endianness
//! (negative = little-endian). The writer always emits `-1.0` and f32
//! little-endian payloads. Color "PF" files are rejected.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::panorama::{PanoKind, Panorama};

pub fn read_pfm(path: &Path) -> Result<Panorama, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    let mut pos = 0usize;

    let magic = read_line(path, &bytes, &mut pos)?;
    match magic.as_str() {
        "Pf" => {}
        "PF" => {
            return Err(IoError::unsupported(
                path,
                "color PFM ('PF') is not supported, only grayscale 'Pf'",
            ))
        }
        other => {
            return Err(IoError::parse(
                path,
                0,
                format!("expected magic 'Pf', found {other:?}"),
            ))
        }
    }

    let dims_line = read_line(path, &bytes, &mut pos)?;
    let mut it = dims_line.split_whitespace();
    let (w, h): (usize, usize) = match (it.next(), it.next(), it.next()) {
        (Some(w), Some(h), None) => (
            w.parse()
                .map_err(|_| IoError::parse(path, pos, format!("invalid width {w:?}")))?,
            h.parse()
                .map_err(|_| IoError::parse(path, pos, format!("invalid height {h:?}")))?,
        ),
        _ => return Err(IoError::parse(path, pos, "expected 'width height' line")),
    };

    let scale_line = read_line(path, &bytes, &mut pos)?;
    let scale: f64 = scale_line
        .trim()
        .parse()
        .map_err(|_| IoError::parse(path, pos, format!("invalid scale {scale_line:?}")))?;
    let little_endian = scale < 0.0;

    let expected = w * h * 4;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(IoError::parse(
            path,
            pos,
            format!(
                "payload length mismatch: expected {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    // Bottom-to-top row order.
    let mut data = vec![0.0f64; w * h];
    for (row_idx, row) in payload.chunks_exact(w * 4).enumerate() {
        let y = h - 1 - row_idx;
        for (x, chunk) in row.chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            data[y * w + x] = v as f64;
        }
    }
    Panorama::new(w, h, 1, PanoKind::Depth, data).map_err(|e| IoError::invalid(path, e.to_string()))
}

pub fn write_pfm(pano: &Panorama, path: &Path) -> Result<(), IoError> {
    if pano.channels != 1 {
        return Err(IoError::invalid(
            path,
            format!("PFM 'Pf' requires 1 channel, panorama has {}", pano.channels),
        ));
    }
    if pano.data.iter().any(|v| v.is_nan()) {
        return Err(IoError::invalid(path, "refusing to write NaN values"));
    }
    let mut out = Vec::with_capacity(32 + pano.data.len() * 4);
    out.extend_from_slice(format!("Pf\n{} {}\n-1.0\n", pano.width, pano.height).as_bytes());
    for y in (0..pano.height).rev() {
        for x in 0..pano.width {
            out.extend_from_slice(&(pano.at(x, y) as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| IoError::file(path, e))
}

fn read_line(path: &Path, bytes: &[u8], pos: &mut usize) -> Result<String, IoError> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\n' {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(IoError::parse(path, start, "unexpected end of header"));
    }
    let line = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| IoError::parse(path, start, "header is not UTF-8"))?
        .trim()
        .to_string();
    *pos += 1;
    Ok(line)
}
