//! Depth estimation for vertically displaced equirectangular camera rigs.
//!
//! Two panoramic cameras mounted one above the other share every longitude
//! column, so stereo correspondence reduces to a one-dimensional search
//! along latitude. This crate implements the full pipeline around that
//! observation:
//!
//! * [`geometry`] — pixel/angle mappings and the angular disparity ↔ metric
//!   depth relation for a vertical rig.
//! * [`scenegen`] — a procedural raycaster that produces synthetic indoor
//!   stereo pairs with analytic ground-truth depth and disparity.
//! * [`sgm`] — semi-global matching over latitude disparities, with
//!   longitude-cyclic aggregation paths.
//! * [`autodiff`] — the small set of differentiable tensor kernels the
//!   network needs, an Adam optimizer, and a finite-difference checker.
//! * [`padenet`] — an encoder / scene-understanding / decoder disparity
//!   network emitting predictions at four scales.
//! * [`losses`] — supervised smooth-L1 and unsupervised photometric +
//!   smoothness objectives, including the differentiable vertical warp.
//! * [`trainer`] — supervised, unsupervised, and fused training loops.
//! * [`fusion`] — median-anchor rescaling of network depth against SGM depth.
//! * [`metrics`] — the standard seven-number depth evaluation suite.
//! * [`io`] — deterministic PPM/PFM/checkpoint/config file handling.
//!
//! All file formats and every pipeline stage are deterministic: identical
//! seeds and inputs reproduce identical bytes on the same platform.

pub mod autodiff;
pub mod dataset;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod padenet;
pub mod panorama;
pub mod rng;
pub mod scenegen;
pub mod sgm;
pub mod trainer;

pub use geometry::RigConfig;
pub use panorama::{PanoKind, Panorama};
