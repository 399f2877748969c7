//! Tone-mapped PGM export for eyeballing depth maps: darker nearby, lighter
//! in the distance, black for invalid pixels. Visualization only; PFM is
//! the storage format.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::panorama::Panorama;

pub fn write_depth_vis_pgm(depth: &Panorama, cap: f64, path: &Path) -> Result<(), IoError> {
    if depth.channels != 1 {
        return Err(IoError::invalid(path, "depth visualization requires 1 channel"));
    }
    let mut out = Vec::with_capacity(32 + depth.data.len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", depth.width, depth.height).as_bytes());
    for &v in &depth.data {
        let byte = if v > 0.0 {
            // 1..=255 so valid-but-near pixels stay distinguishable from invalid.
            (1.0 + (v.min(cap) / cap) * 254.0).round() as u8
        } else {
            0
        };
        out.push(byte);
    }
    fs::write(path, out).map_err(|e| IoError::file(path, e))
}
