//! Model checkpoints: an ASCII manifest terminated by a blank line, then
//! the concatenated little-endian f32 payload of every tensor in manifest
//! order.
//!
//! ```text
//! panodepth-checkpoint v1
//! phase supervised
//! meta baseline 0.26
//! tensor enc1.conv1.weight 16 3 3 3
//! tensor enc1.conv1.bias 16
//!
//! <raw f32 little-endian payload>
//! ```
//!
//! Loading then saving reproduces the file byte for byte: meta keys are
//! kept sorted and tensor order is preserved.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::IoError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointMeta {
    /// Training phase tag: `unsupervised`, `supervised`, or `fused`.
    pub phase: String,
    /// Sorted auxiliary key/value pairs (rig and network configuration).
    pub extra: BTreeMap<String, String>,
}

impl CheckpointMeta {
    pub fn new(phase: &str) -> Self {
        CheckpointMeta {
            phase: phase.to_string(),
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub meta: CheckpointMeta,
    /// (name, shape, data) in manifest order.
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
    }
}

pub fn save_checkpoint(
    tensors: &[(String, Vec<usize>, &[f32])],
    meta: &CheckpointMeta,
    path: &Path,
) -> Result<(), IoError> {
    let mut seen = std::collections::BTreeSet::new();
    for (name, _, _) in tensors {
        if !seen.insert(name.as_str()) {
            return Err(IoError::invalid(path, format!("duplicate tensor name {name:?}")));
        }
        if name.contains(char::is_whitespace) || name.is_empty() {
            return Err(IoError::invalid(path, format!("bad tensor name {name:?}")));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(format!("panodepth-checkpoint v{CHECKPOINT_VERSION}\n").as_bytes());
    out.extend_from_slice(format!("phase {}\n", meta.phase).as_bytes());
    for (k, v) in &meta.extra {
        out.extend_from_slice(format!("meta {k} {v}\n").as_bytes());
    }
    for (name, shape, data) in tensors {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(IoError::invalid(
                path,
                format!(
                    "tensor {name:?}: shape {:?} implies {count} elements, data has {}",
                    shape,
                    data.len()
                ),
            ));
        }
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        out.extend_from_slice(format!("tensor {} {}\n", name, dims.join(" ")).as_bytes());
    }
    out.push(b'\n');
    for (_, _, data) in tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| IoError::file(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    let header_end = find_blank_line(&bytes)
        .ok_or_else(|| IoError::parse(path, bytes.len(), "no blank line terminating manifest"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| IoError::parse(path, 0, "manifest is not UTF-8"))?;

    let mut lines = header.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 0, "empty manifest"))?;
    let version: u32 = first
        .strip_prefix("panodepth-checkpoint v")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| IoError::parse(path, 0, format!("bad magic line {first:?}")))?;
    if version != CHECKPOINT_VERSION {
        return Err(IoError::unsupported(
            path,
            format!("checkpoint version {version}, this build reads v{CHECKPOINT_VERSION}"),
        ));
    }

    let mut meta = CheckpointMeta::new("");
    let mut manifest: Vec<(String, Vec<usize>)> = Vec::new();
    for (lineno, line) in lines {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("phase") => {
                meta.phase = parts.collect::<Vec<_>>().join(" ");
            }
            Some("meta") => {
                let key = parts
                    .next()
                    .ok_or_else(|| IoError::parse(path, lineno, "meta line missing key"))?;
                meta.extra
                    .insert(key.to_string(), parts.collect::<Vec<_>>().join(" "));
            }
            Some("tensor") => {
                let name = parts
                    .next()
                    .ok_or_else(|| IoError::parse(path, lineno, "tensor line missing name"))?;
                let shape: Result<Vec<usize>, _> = parts.map(|p| p.parse()).collect();
                let shape = shape
                    .map_err(|_| IoError::parse(path, lineno, "tensor line has bad dimension"))?;
                manifest.push((name.to_string(), shape));
            }
            Some(other) => {
                return Err(IoError::parse(
                    path,
                    lineno,
                    format!("unknown manifest directive {other:?}"),
                ))
            }
            None => {}
        }
    }

    let payload = &bytes[header_end..];
    let expected: usize = manifest
        .iter()
        .map(|(_, s)| s.iter().product::<usize>() * 4)
        .sum();
    if payload.len() != expected {
        return Err(IoError::parse(
            path,
            header_end,
            format!(
                "payload length mismatch: manifest implies {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }

    let mut tensors = Vec::with_capacity(manifest.len());
    let mut offset = 0usize;
    for (name, shape) in manifest {
        let count: usize = shape.iter().product();
        let data: Vec<f32> = payload[offset..offset + count * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        offset += count * 4;
        tensors.push((name, shape, data));
    }
    Ok(Checkpoint {
        version,
        meta,
        tensors,
    })
}

/// Byte offset just past the first blank line (`\n\n`).
fn find_blank_line(bytes: &[u8]) -> Option<usize> {
    bytes.windows(2).position(|w| w == b"\n\n").map(|p| p + 2)
}
