//! File formats: PPM (RGB), PFM (float maps), PGM depth visualization,
//! checkpoints, and run configuration.
//!
//! Every reader/writer pair round-trips bit-exactly on files this crate
//! writes, and parse errors carry a byte offset or line number.

mod checkpoint;
mod config;
mod pfm;
mod pgm;
mod ppm;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use pfm::{read_pfm, write_pfm};
pub use pgm::write_depth_vis_pgm;
pub use ppm::{read_ppm, write_ppm};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} at byte {offset}: {message}")]
    Parse {
        path: String,
        offset: usize,
        message: String,
    },
    #[error("{path}: unsupported format: {message}")]
    Unsupported { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },
}

impl IoError {
    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, offset: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.display().to_string(),
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(path: &std::path::Path, message: impl Into<String>) -> Self {
        IoError::Unsupported {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(path: &std::path::Path, message: impl Into<String>) -> Self {
        IoError::Invalid {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}
