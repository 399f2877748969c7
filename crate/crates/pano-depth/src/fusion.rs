//! Median-anchor fusion: globally rescale network depth so its median
//! matches the SGM depth median.
//!
//! The network recovers relative structure well but its absolute scale can
//! drift on unseen rigs; SGM is noisy but metrically anchored. Multiplying
//! the network map by `median_sgm / median_network` (the default
//! `AnchorToSgm` mode) moves the prediction onto SGM's scale while
//! preserving depth ordering exactly. `PaperLiteral` applies the reciprocal
//! ratio `median_network / median_sgm` instead; it is kept selectable
//! because the two disagree, and the choice is visible in the report.
//!
//! Medians are lower-of-two for even counts and are computed over valid
//! pixels (0 < depth ≤ cap) of the entire panorama.

use thiserror::Error;

use crate::panorama::Panorama;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("shape mismatch: network {nw}x{nh}, sgm {sw}x{sh}")]
    ShapeMismatch {
        nw: usize,
        nh: usize,
        sw: usize,
        sh: usize,
    },
    #[error("no valid pixels in {0} map")]
    NoValidPixels(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionMode {
    /// Scale by `median_sgm / median_network`; fused median equals SGM's.
    AnchorToSgm,
    /// Scale by `median_network / median_sgm` (the printed form).
    PaperLiteral,
}

#[derive(Clone, Debug)]
pub struct FusionReport {
    pub median_network: f64,
    pub median_sgm: f64,
    pub scale: f64,
    pub network_valid_count: usize,
    pub sgm_valid_count: usize,
    pub mode: FusionMode,
}

impl FusionReport {
    pub fn key_values(&self) -> String {
        format!(
            "mode={}\nmedian_network={}\nmedian_sgm={}\nscale={}\nnetwork_valid={}\nsgm_valid={}\n",
            match self.mode {
                FusionMode::AnchorToSgm => "anchor",
                FusionMode::PaperLiteral => "paper",
            },
            self.median_network,
            self.median_sgm,
            self.scale,
            self.network_valid_count,
            self.sgm_valid_count
        )
    }
}

/// Median of valid depths (0 < v ≤ cap), lower-of-two for even counts.
pub fn median_valid(depth: &Panorama, cap: f64) -> Result<f64, FusionError> {
    let mut values: Vec<f64> = depth.valid_values(Some(cap)).collect();
    if values.is_empty() {
        return Err(FusionError::NoValidPixels("depth"));
    }
    values.sort_by(f64::total_cmp);
    Ok(values[(values.len() - 1) / 2])
}

/// Rescale `network_depth` by the median ratio against `sgm_depth`.
///
/// Invalid network pixels stay invalid; SGM contributes only the scalar
/// anchor, so its per-pixel validity does not mask the output.
pub fn fuse(
    network_depth: &Panorama,
    sgm_depth: &Panorama,
    cap: f64,
    mode: FusionMode,
) -> Result<(Panorama, FusionReport), FusionError> {
    if network_depth.width != sgm_depth.width || network_depth.height != sgm_depth.height {
        return Err(FusionError::ShapeMismatch {
            nw: network_depth.width,
            nh: network_depth.height,
            sw: sgm_depth.width,
            sh: sgm_depth.height,
        });
    }
    let median_network = median_valid(network_depth, cap).map_err(|_| {
        FusionError::NoValidPixels("network")
    })?;
    let median_sgm = median_valid(sgm_depth, cap).map_err(|_| FusionError::NoValidPixels("sgm"))?;
    let scale = match mode {
        FusionMode::AnchorToSgm => median_sgm / median_network,
        FusionMode::PaperLiteral => median_network / median_sgm,
    };
    let mut fused = network_depth.clone();
    for v in fused.data.iter_mut() {
        if *v > 0.0 {
            *v *= scale;
        }
    }
    let report = FusionReport {
        median_network,
        median_sgm,
        scale,
        network_valid_count: network_depth.valid_values(Some(cap)).count(),
        sgm_valid_count: sgm_depth.valid_values(Some(cap)).count(),
        mode,
    };
    Ok((fused, report))
}
