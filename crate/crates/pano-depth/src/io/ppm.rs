//! Binary PPM (P6, maxval 255) for RGB panoramas.
//!
//! The writer emits the canonical header `P6\n{w} {h}\n255\n`; the reader
//! accepts any standard P6 header (whitespace and `#` comments between
//! tokens). Values are stored as byte/255 and written back as
//! round(v·255), so write(read(f)) is byte-identical for files this module
//! writes.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::panorama::{PanoKind, Panorama};

pub fn read_ppm(path: &Path) -> Result<Panorama, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    let mut pos = 0usize;

    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(IoError::parse(path, 0, "expected magic 'P6'"));
    }
    pos += 2;

    let width = read_header_int(path, &bytes, &mut pos)?;
    let height = read_header_int(path, &bytes, &mut pos)?;
    let maxval = read_header_int(path, &bytes, &mut pos)?;
    if maxval != 255 {
        return Err(IoError::unsupported(
            path,
            format!("maxval {maxval}, only 255 is supported"),
        ));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(IoError::parse(path, pos, "expected whitespace after maxval"));
    }
    pos += 1;

    let expected = width * height * 3;
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
    let data: Vec<f64> = payload.iter().map(|&b| b as f64 / 255.0).collect();
    Panorama::new(width, height, 3, PanoKind::Rgb, data)
        .map_err(|e| IoError::invalid(path, e.to_string()))
}

pub fn write_ppm(pano: &Panorama, path: &Path) -> Result<(), IoError> {
    if pano.channels != 3 {
        return Err(IoError::invalid(
            path,
            format!("PPM requires 3 channels, panorama has {}", pano.channels),
        ));
    }
    let mut out = Vec::with_capacity(32 + pano.data.len());
    out.extend_from_slice(format!("P6\n{} {}\n255\n", pano.width, pano.height).as_bytes());
    for &v in &pano.data {
        out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    fs::write(path, out).map_err(|e| IoError::file(path, e))
}

/// Skip whitespace and `#` comments, then parse a decimal integer.
fn read_header_int(path: &Path, bytes: &[u8], pos: &mut usize) -> Result<usize, IoError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(IoError::parse(path, start, "expected integer"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::parse(path, start, "invalid integer"))
}
